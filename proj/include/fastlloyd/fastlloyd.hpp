// Copyright 2026 The FastLloyd Authors
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

#ifndef FASTLLOYD_FASTLLOYD_HPP
#define FASTLLOYD_FASTLLOYD_HPP

#include "fastlloyd/baselines.hpp"
#include "fastlloyd/cluster.hpp"
#include "fastlloyd/core.hpp"
#include "fastlloyd/data.hpp"
#include "fastlloyd/dpcalib.hpp"
#include "fastlloyd/eval.hpp"
#include "fastlloyd/msa.hpp"
#include "fastlloyd/ringcodec.hpp"

#endif  // FASTLLOYD_FASTLLOYD_HPP
