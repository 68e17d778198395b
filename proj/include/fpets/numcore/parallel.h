// Copyright 2026 The FPETS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FPETS_NUMCORE_PARALLEL_H_
#define FPETS_NUMCORE_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace fpets {

// Worker count for kernels: FPETS_THREADS if set, else the hardware
// concurrency, never less than 1.
std::size_t kernel_threads();
// Overrides the environment for the rest of the process (bench pins 1).
void set_kernel_threads(std::size_t n);

// Runs body(begin, end) over disjoint chunks of [0, n). Falls back to a
// single call when the estimated work is below a threshold, so small ops do
// not pay thread start-up costs. Chunks must write disjoint outputs.
void parallel_for(std::size_t n, std::size_t work_per_item,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace fpets

#endif  // FPETS_NUMCORE_PARALLEL_H_
