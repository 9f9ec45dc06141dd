// Copyright 2026 The CDVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CDVM_PARALLEL_H_
#define CDVM_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace cdvm {

// Worker count used when a caller passes threads == 0: the CDVM_THREADS
// environment variable if set, otherwise 1.
int DefaultThreads();

// Runs body(i) for i in [0, count) on up to `threads` workers. Bodies must
// write only to per-index state; any reduction happens afterwards in index
// order, which keeps results independent of the thread count. The first
// exception thrown by a body is rethrown on the calling thread.
void ParallelFor(std::size_t count, int threads,
                 const std::function<void(std::size_t)>& body);

}  // namespace cdvm

#endif  // CDVM_PARALLEL_H_
