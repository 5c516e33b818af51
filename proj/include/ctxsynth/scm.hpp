// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact finite structural causal model for checking context
// marginalization. Y (class-relevant) and Z (class-agnostic) are
// independent in the population and X ~ P(X | Y, Z). A small training draw
// ties Y and Z together through the sample identity; the pipeline policies
// differ in which Z values they pair with a requested Y:
//
//   observational     cycle through the draw's own samples of that Y
//   class_marginal    uniform over the draw's samples of that Y
//   dataset_marginal  uniform over every sample in the draw
//
// exact_interventional() is the reference: sum_z P(X | y, z) P(z).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctxsynth {

using Distribution = std::vector<double>;

struct DiscreteSCM {
  std::vector<std::string> y_domain;
  std::vector<std::string> z_domain;
  std::vector<std::string> x_domain;
  Distribution p_y;
  Distribution p_z;
  // p_x_given_yz[y][z] is a distribution over x_domain.
  std::vector<std::vector<Distribution>> p_x_given_yz;

  /// Throws ValidationError unless every distribution sums to 1 within 1e-12.
  void validate() const;
  std::size_t y_index(const std::string& y) const;
};

/// JSON {y_domain, z_domain, x_domain?, p_y, p_z, p_x_given_yz}. Without
/// x_domain the X atoms are named "0".."m-1".
DiscreteSCM scm_from_json(const std::string& text);
std::string scm_to_json(const DiscreteSCM& scm);

/// Y, Z in {0, 1}, both uniform; X is the pair (y, z) deterministically.
DiscreteSCM toy_scm();

enum class PipelinePolicy { observational, class_marginal, dataset_marginal };

std::string to_string(PipelinePolicy p);
PipelinePolicy parse_policy(const std::string& s);

struct DrawSample {
  std::size_t id = 0;  // the sample identity I
  std::size_t y = 0;
  std::size_t z = 0;
};

struct TrainingDraw {
  std::vector<DrawSample> samples;  // ids are 0..n-1
};

/// n i.i.d. samples from P(Y) P(Z).
TrainingDraw draw_iid(const DiscreteSCM& scm, std::size_t n, std::uint64_t seed);
/// n_per_class samples for every y with z = y (requires |Z| >= |Y|).
TrainingDraw draw_confounded(const DiscreteSCM& scm, std::size_t n_per_class);

Distribution exact_interventional(const DiscreteSCM& scm, std::size_t y);

/// Empirical distribution over X of n_samples pipeline outputs for class y.
Distribution simulate_pipeline(const DiscreteSCM& scm, const TrainingDraw& draw,
                               PipelinePolicy policy, std::size_t y, std::size_t n_samples,
                               std::uint64_t seed);

/// Empirical distribution of the Z values the policy pairs with y.
Distribution simulate_context(const DiscreteSCM& scm, const TrainingDraw& draw,
                              PipelinePolicy policy, std::size_t y, std::size_t n_samples,
                              std::uint64_t seed);

/// 0.5 * sum |p - q|.
double tv_distance(const Distribution& p, const Distribution& q);

/// Mean over the draw's classes of TV(P^(Z | Y = y), P^(Z)).
double spuriousness_score(const TrainingDraw& draw);

/// Average spuriousness of i.i.d. draws of size n over seeds
/// first_seed .. first_seed + n_seeds - 1. OpenMP over seeds.
double mean_spuriousness(const DiscreteSCM& scm, std::size_t n, std::size_t n_seeds,
                         std::uint64_t first_seed);
double mean_spuriousness_serial(const DiscreteSCM& scm, std::size_t n, std::size_t n_seeds,
                                std::uint64_t first_seed);

struct DemoRow {
  std::string draw;  // "confounded" or "iid"
  PipelinePolicy policy;
  std::size_t n;  // draw size per class (confounded) or total (iid)
  double tv;      // mean over y of TV(pipeline, interventional)
};

/// Sweeps draw sizes and policies. `model` is "toy-confounded" (z = y draws
/// of the toy SCM) or "toy-iid"; any other SCM uses i.i.d. draws.
std::vector<DemoRow> scm_demo(const DiscreteSCM& scm, const std::string& model,
                              std::size_t n_samples, std::uint64_t seed);
std::string demo_csv(const std::vector<DemoRow>& rows);

}  // namespace ctxsynth
