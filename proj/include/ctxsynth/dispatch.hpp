// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "ctxsynth/backend.hpp"
#include "ctxsynth/sampler.hpp"

namespace ctxsynth {

/// Sends every plan item to `generator` with at most config.max_in_flight
/// requests outstanding. Each item is generated with its own plan seed.
/// Output order equals plan order; failed items carry their error.
std::vector<GenerationResult> dispatch_plan(const GenerationPlan& plan, const GenerationParams& params,
                                            const BackendConfig& config, ImageGenerator& generator);

}  // namespace ctxsynth
