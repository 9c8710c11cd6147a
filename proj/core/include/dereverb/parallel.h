// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_PARALLEL_H_
#define DEREVERB_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace dereverb {

// Worker count for `requested` (<= 0 means hardware concurrency), never
// more than `items` and never less than one.
int ResolveWorkers(int requested, size_t items);

// Calls fn(i) for i in [0, n) on up to `workers` threads, claiming indices
// in increasing order. The first exception thrown by any call is rethrown
// after all threads have joined; remaining indices are abandoned.
void ParallelFor(size_t n, int workers, const std::function<void(size_t)>& fn);

}  // namespace dereverb

#endif  // DEREVERB_PARALLEL_H_
