// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/dispatch.hpp"

namespace ctxsynth {

std::vector<GenerationResult> dispatch_plan(const GenerationPlan& plan, const GenerationParams& params,
                                            const BackendConfig& config, ImageGenerator& generator) {
  config.validate();
  if (plan.items.empty()) throw ValidationError("dispatch_plan: empty plan");
  std::vector<GenerationRequest> requests;
  requests.reserve(plan.items.size());
  for (const auto& it : plan.items) requests.push_back({it.prompt, it.seed});
  return dispatch_generation(requests, params, config.max_in_flight, generator);
}

}  // namespace ctxsynth
