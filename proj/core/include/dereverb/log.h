// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_LOG_H_
#define DEREVERB_LOG_H_

#include <functional>
#include <string_view>

namespace dereverb {

enum class LogLevel { kDebug, kInfo, kWarning, kError };

using LogSink = std::function<void(LogLevel, std::string_view)>;

// Library diagnostics go through one process-wide sink. The default writes
// "[level] message" lines to stderr and drops debug messages. Passing an
// empty function restores the default. Thread-safe.
void SetLogSink(LogSink sink);
void Log(LogLevel level, std::string_view message);

inline void LogInfo(std::string_view m) { Log(LogLevel::kInfo, m); }
inline void LogWarning(std::string_view m) { Log(LogLevel::kWarning, m); }

}  // namespace dereverb

#endif  // DEREVERB_LOG_H_
