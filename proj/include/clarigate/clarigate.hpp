// Copyright 2026 The Clarigate Authors
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


// Umbrella header.

#pragma once

#include "clarigate/adam.hpp"
#include "clarigate/checkpoint.hpp"
#include "clarigate/config.hpp"
#include "clarigate/core_types.hpp"
#include "clarigate/datagen.hpp"
#include "clarigate/dataset_io.hpp"
#include "clarigate/detectors.hpp"
#include "clarigate/error.hpp"
#include "clarigate/eval.hpp"
#include "clarigate/featurizer.hpp"
#include "clarigate/layers.hpp"
#include "clarigate/neural.hpp"
#include "clarigate/params.hpp"
#include "clarigate/tensor.hpp"
#include "clarigate/training.hpp"
