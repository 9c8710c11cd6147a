// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dereverb/train.h"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "dereverb/checkpoint.h"
#include "dereverb/error.h"
#include "dereverb/log.h"
#include "dereverb/nn.h"

namespace dereverb {
namespace fs = std::filesystem;

namespace {

constexpr uint64_t kEpochStreamBase = 1000;
constexpr char kLogHeader[] = "epoch,train_loss,val_loss,seconds,improved";

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       since)
      .count();
}

std::vector<int64_t> Lengths(const std::vector<Utterance>& data) {
  std::vector<int64_t> out;
  for (const auto& u : data) out.push_back(u.frames);
  return out;
}

// Builds the batches of one epoch on a helper thread, at most `capacity`
// ahead of the consumer. Batches come out in plan order.
template <typename T>
class BatchPrefetcher {
 public:
  BatchPrefetcher(const std::vector<Utterance>& data,
                  const std::vector<std::vector<size_t>>& plan, int capacity)
      : data_(data), plan_(plan),
        capacity_(static_cast<size_t>(std::max(capacity, 1))) {
    worker_ = std::thread([this] { Run(); });
  }

  ~BatchPrefetcher() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  // Next batch in plan order; rethrows a producer failure.
  Batch<T> Next() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty() || error_; });
    if (queue_.empty()) std::rethrow_exception(error_);
    Batch<T> b = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return b;
  }

 private:
  void Run() {
    try {
      for (const auto& indices : plan_) {
        auto b = MakeBatch<T>(data_, indices);
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return queue_.size() < capacity_ || stop_; });
        if (stop_) return;
        queue_.push_back(std::move(b));
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  const std::vector<Utterance>& data_;
  const std::vector<std::vector<size_t>>& plan_;
  size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Batch<T>> queue_;
  std::exception_ptr error_;
  bool stop_ = false;
  std::thread worker_;
};

void CheckData(const ModelConfig& cfg, const std::vector<Utterance>& data,
               const char* name) {
  for (const auto& u : data) {
    if (u.bins != cfg.bins) {
      throw DimensionError(std::string(name) + " item " + u.id + " has " +
                           std::to_string(u.bins) + " bins, model expects " +
                           std::to_string(cfg.bins));
    }
  }
}

}  // namespace

std::string ConfigHash(const ModelConfig& model, const TrainConfig& train) {
  std::ostringstream s;
  s << DescribeConfig(model) << "|epochs=" << train.epochs
    << "|batch=" << train.batch_size << "|lr=" << train.learning_rate
    << "|seed=" << train.seed;
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <typename T>
double EvaluateLoss(const DereverbModel<T>& model,
                    const std::vector<Utterance>& data, int batch_size) {
  if (data.empty()) throw DataError("evaluate: no items");
  const auto lengths = Lengths(data);
  double weighted = 0.0;
  int64_t frames = 0;
  for (const auto& indices : PlanBatches(lengths, batch_size, nullptr)) {
    const auto b = MakeBatch<T>(data, indices);
    Tape<T> tape(false);
    tape.set_check_finite(false);
    const auto pred = model.Forward(tape, b.inputs);
    const auto loss = nn::MaskedMse(tape, pred, b.targets, b.mask);
    weighted += static_cast<double>(loss.item()) *
                static_cast<double>(b.valid_frames());
    frames += b.valid_frames();
  }
  return weighted / static_cast<double>(frames);
}

template <typename T>
TrainReport Train(const ModelConfig& model_config, const TrainConfig& config,
                  const std::vector<Utterance>& train,
                  const std::vector<Utterance>& val, const NormStats& stats) {
  model_config.Validate();
  if (train.empty()) throw DataError("train: training split is empty");
  if (config.epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (stats.bins() != model_config.bins) {
    throw DimensionError("train: stats have " + std::to_string(stats.bins()) +
                         " bins, model expects " +
                         std::to_string(model_config.bins));
  }
  CheckData(model_config, train, "train");
  CheckData(model_config, val, "val");
  if (val.empty()) {
    LogWarning("train: no validation items; selecting on training loss");
  }

  const auto start = std::chrono::steady_clock::now();
  const bool files = !config.out_dir.empty();
  const fs::path last_path = config.out_dir / "last.ckpt";
  const fs::path best_path = config.out_dir / "best.ckpt";
  const fs::path log_path = config.out_dir / "train_log.csv";
  if (files) fs::create_directories(config.out_dir);

  TrainReport report;
  report.seed = config.seed;
  report.config_hash = ConfigHash(model_config, config);
  report.best_val_loss = std::numeric_limits<double>::infinity();

  std::optional<DereverbModel<T>> model;
  int64_t first_epoch = 1;
  std::optional<Checkpoint> resumed;
  if (config.resume && files && fs::exists(last_path)) {
    resumed = LoadCheckpoint(last_path, model_config);
    model.emplace(ModelFromCheckpoint<T>(*resumed));
    first_epoch = resumed->meta.epoch + 1;
    report.best_epoch = resumed->meta.best_epoch;
    report.best_val_loss = resumed->meta.best_val_loss;
    if (fs::exists(log_path)) {
      for (const auto& e : ReadTrainLog(log_path)) {
        if (e.epoch < first_epoch) report.epochs.push_back(e);
      }
    }
    LogInfo("train: resuming after epoch " +
            std::to_string(resumed->meta.epoch));
  } else {
    Rng init(Rng::Derive(config.seed, 0));
    model.emplace(DereverbModel<T>::Build(model_config, init));
  }
  model->SetRequiresGrad(true);
  nn::AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  nn::Adam<T> optimizer(model->parameters(), adam_config);
  if (resumed) RestoreOptimizer(*resumed, optimizer);

  auto meta_for = [&](int64_t epoch, double val_loss) {
    TrainingMeta meta;
    meta.epoch = epoch;
    meta.val_loss = val_loss;
    meta.seed = config.seed;
    meta.optimizer_step = optimizer.step_count();
    meta.best_epoch = report.best_epoch;
    meta.best_val_loss = report.best_val_loss;
    return meta;
  };

  const auto lengths = Lengths(train);
  for (int64_t epoch = first_epoch; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    Rng rng(Rng::Derive(config.seed, kEpochStreamBase +
                                          static_cast<uint64_t>(epoch)));
    const auto plan = PlanBatches(lengths, config.batch_size, &rng);
    BatchPrefetcher<T> prefetch(train, plan, config.prefetch);
    double weighted = 0.0;
    int64_t frames = 0;
    for (size_t bi = 0; bi < plan.size(); ++bi) {
      const auto b = prefetch.Next();
      const auto where = [&] {
        std::string ids;
        for (size_t i : b.items) ids += (ids.empty() ? "" : " ") + train[i].id;
        return "epoch " + std::to_string(epoch) + " batch " +
               std::to_string(bi + 1) + "/" + std::to_string(plan.size()) +
               " (items: " + ids + ")";
      };
      Tape<T> tape;
      tape.set_check_finite(false);
      const auto pred = model->Forward(tape, b.inputs);
      const auto loss = nn::MaskedMse(tape, pred, b.targets, b.mask);
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at " + where());
      }
      tape.Backward(loss);
      try {
        optimizer.Step();
      } catch (const NumericError& e) {
        throw NumericError("train: " + std::string(e.what()) + " at " +
                           where());
      }
      optimizer.ZeroGrad();
      weighted += value * static_cast<double>(b.valid_frames());
      frames += b.valid_frames();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weighted / static_cast<double>(frames);
    rec.val_loss = val.empty() ? rec.train_loss
                               : EvaluateLoss(*model, val, config.batch_size);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("train: non-finite validation loss at epoch " +
                         std::to_string(epoch));
    }
    rec.improved = rec.val_loss < report.best_val_loss;
    if (rec.improved) {
      report.best_val_loss = rec.val_loss;
      report.best_epoch = epoch;
      if (files) {
        SaveCheckpoint(best_path,
                       MakeCheckpoint(*model, stats, meta_for(epoch,
                                                              rec.val_loss)));
      }
    }
    rec.seconds = Seconds(epoch_start);
    report.epochs.push_back(rec);
    if (files) {
      SaveCheckpoint(last_path, MakeCheckpoint(*model, stats,
                                               meta_for(epoch, rec.val_loss),
                                               &optimizer));
      WriteTrainLog(log_path, report);
    }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "epoch %lld/%d train %.6f val %.6f%s (%.1f s)",
                  static_cast<long long>(epoch), config.epochs, rec.train_loss,
                  rec.val_loss, rec.improved ? " *" : "", rec.seconds);
    LogInfo(line);
  }
  report.wall_seconds = Seconds(start);
  return report;
}

void WriteTrainLog(const fs::path& path, const TrainReport& report) {
  std::ostringstream out;
  out << "# seed=" << report.seed << " config=" << report.config_hash
      << " best_epoch=" << report.best_epoch << "\n";
  out << kLogHeader << "\n";
  char buf[160];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.3f,%d\n",
                  static_cast<long long>(e.epoch), e.train_loss, e.val_loss,
                  e.seconds, e.improved ? 1 : 0);
    out << buf;
  }
  std::ofstream file(path, std::ios::binary);
  file << out.str();
  if (!file) throw DataError(path.string() + ": write failed");
}

std::vector<EpochRecord> ReadTrainLog(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<EpochRecord> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kLogHeader) {
        throw DataError(path.string() + ": unexpected header");
      }
      header = true;
      continue;
    }
    EpochRecord e;
    long long epoch = 0;
    int improved = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%d", &epoch,
                    &e.train_loss, &e.val_loss, &e.seconds, &improved) != 5) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    e.epoch = epoch;
    e.improved = improved != 0;
    out.push_back(e);
  }
  return out;
}

#define DEREVERB_INSTANTIATE_TRAIN(T)                                       \
  template double EvaluateLoss(const DereverbModel<T>&,                     \
                               const std::vector<Utterance>&, int);         \
  template TrainReport Train<T>(const ModelConfig&, const TrainConfig&,     \
                                const std::vector<Utterance>&,              \
                                const std::vector<Utterance>&,              \
                                const NormStats&);

DEREVERB_INSTANTIATE_TRAIN(float)
DEREVERB_INSTANTIATE_TRAIN(double)

#undef DEREVERB_INSTANTIATE_TRAIN

}  // namespace dereverb
