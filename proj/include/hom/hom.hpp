// Copyright 2026 The hom-indist Authors
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

// Everything in one include.

#pragma once

#include "hom/errors.hpp"
#include "hom/curve.hpp"
#include "hom/exp_terms.hpp"
#include "hom/lindblad.hpp"
#include "hom/emitter_models.hpp"
#include "hom/irf.hpp"
#include "hom/correlation_functions.hpp"
#include "hom/experiment_sim.hpp"
#include "hom/fitting.hpp"
#include "hom/g2_fit.hpp"
#include "hom/indistinguishability.hpp"
#include "hom/io.hpp"
#include "hom/config.hpp"
#include "hom/pipeline.hpp"
