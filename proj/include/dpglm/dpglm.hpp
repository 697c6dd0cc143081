// Copyright 2026 The dpglm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGLM_DPGLM_HPP
#define DPGLM_DPGLM_HPP

#include "dpglm/approx.hpp"
#include "dpglm/common.hpp"
#include "dpglm/data.hpp"
#include "dpglm/diagnostics.hpp"
#include "dpglm/experiment.hpp"
#include "dpglm/inference.hpp"
#include "dpglm/moments.hpp"
#include "dpglm/oracles.hpp"
#include "dpglm/privacy.hpp"
#include "dpglm/rng.hpp"
#include "dpglm/sstats.hpp"

#endif  // DPGLM_DPGLM_HPP
