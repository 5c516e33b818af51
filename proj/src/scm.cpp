// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ctxsynth/util.hpp"
#include "json.hpp"

namespace ctxsynth {

namespace {

void check_distribution(const Distribution& p, std::size_t size, const std::string& what, double tol) {
  if (p.size() != size)
    throw ValidationError(what + ": expected " + std::to_string(size) + " probabilities, got " +
                          std::to_string(p.size()));
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + ": invalid probability");
    s += v;
  }
  if (std::abs(s - 1.0) > tol) throw ValidationError(what + ": probabilities do not sum to 1");
}

}  // namespace

void DiscreteSCM::validate() const {
  if (y_domain.empty() || z_domain.empty() || x_domain.empty())
    throw ValidationError("scm: empty domain");
  check_distribution(p_y, y_domain.size(), "scm p_y", 1e-12);
  check_distribution(p_z, z_domain.size(), "scm p_z", 1e-12);
  if (p_x_given_yz.size() != y_domain.size()) throw ValidationError("scm: p_x_given_yz has wrong y size");
  for (std::size_t y = 0; y < y_domain.size(); ++y) {
    if (p_x_given_yz[y].size() != z_domain.size())
      throw ValidationError("scm: p_x_given_yz has wrong z size");
    for (std::size_t z = 0; z < z_domain.size(); ++z)
      check_distribution(p_x_given_yz[y][z], x_domain.size(),
                         "scm p_x_given_yz[" + y_domain[y] + "][" + z_domain[z] + "]", 1e-12);
  }
}

std::size_t DiscreteSCM::y_index(const std::string& y) const {
  for (std::size_t i = 0; i < y_domain.size(); ++i)
    if (y_domain[i] == y) return i;
  throw ValidationError("scm: unknown y '" + y + "'");
}

DiscreteSCM scm_from_json(const std::string& text) {
  DiscreteSCM s;
  try {
    const auto j = nlohmann::json::parse(text);
    auto names = [](const nlohmann::json& v) {
      std::vector<std::string> out;
      for (const auto& e : v) out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
      return out;
    };
    s.y_domain = names(j.at("y_domain"));
    s.z_domain = names(j.at("z_domain"));
    s.p_y = j.at("p_y").get<Distribution>();
    s.p_z = j.at("p_z").get<Distribution>();
    s.p_x_given_yz = j.at("p_x_given_yz").get<std::vector<std::vector<Distribution>>>();
    if (j.contains("x_domain")) {
      s.x_domain = names(j["x_domain"]);
    } else if (!s.p_x_given_yz.empty() && !s.p_x_given_yz[0].empty()) {
      for (std::size_t i = 0; i < s.p_x_given_yz[0][0].size(); ++i) s.x_domain.push_back(std::to_string(i));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scm: malformed: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scm_to_json(const DiscreteSCM& s) {
  nlohmann::ordered_json j;
  j["y_domain"] = s.y_domain;
  j["z_domain"] = s.z_domain;
  j["x_domain"] = s.x_domain;
  j["p_y"] = s.p_y;
  j["p_z"] = s.p_z;
  j["p_x_given_yz"] = s.p_x_given_yz;
  return j.dump(2) + "\n";
}

DiscreteSCM toy_scm() {
  DiscreteSCM s;
  s.y_domain = {"y0", "y1"};
  s.z_domain = {"z0", "z1"};
  s.x_domain = {"y0z0", "y0z1", "y1z0", "y1z1"};
  s.p_y = {0.5, 0.5};
  s.p_z = {0.5, 0.5};
  s.p_x_given_yz.assign(2, std::vector<Distribution>(2, Distribution(4, 0.0)));
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t z = 0; z < 2; ++z) s.p_x_given_yz[y][z][2 * y + z] = 1.0;
  return s;
}

std::string to_string(PipelinePolicy p) {
  switch (p) {
    case PipelinePolicy::observational: return "observational";
    case PipelinePolicy::class_marginal: return "class_marginal";
    case PipelinePolicy::dataset_marginal: return "dataset_marginal";
  }
  return "observational";
}

PipelinePolicy parse_policy(const std::string& s) {
  if (s == "observational") return PipelinePolicy::observational;
  if (s == "class_marginal") return PipelinePolicy::class_marginal;
  if (s == "dataset_marginal") return PipelinePolicy::dataset_marginal;
  throw ValidationError("unknown policy '" + s + "'");
}

TrainingDraw draw_iid(const DiscreteSCM& scm, std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "draw"));
  TrainingDraw d;
  d.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = rng.categorical(scm.p_y);
    const auto z = rng.categorical(scm.p_z);
    d.samples.push_back({i, y, z});
  }
  return d;
}

TrainingDraw draw_confounded(const DiscreteSCM& scm, std::size_t n_per_class) {
  if (scm.z_domain.size() < scm.y_domain.size())
    throw ValidationError("draw_confounded: need |Z| >= |Y|");
  TrainingDraw d;
  for (std::size_t y = 0; y < scm.y_domain.size(); ++y)
    for (std::size_t k = 0; k < n_per_class; ++k) d.samples.push_back({d.samples.size(), y, y});
  return d;
}

Distribution exact_interventional(const DiscreteSCM& scm, std::size_t y) {
  if (y >= scm.y_domain.size()) throw ValidationError("exact_interventional: unknown y");
  Distribution out(scm.x_domain.size(), 0.0);
  for (std::size_t z = 0; z < scm.z_domain.size(); ++z)
    for (std::size_t x = 0; x < out.size(); ++x) out[x] += scm.p_x_given_yz[y][z][x] * scm.p_z[z];
  return out;
}

namespace {

// Z values the policy draws from, with multiplicity.
std::vector<std::size_t> context_pool(const TrainingDraw& draw, PipelinePolicy policy, std::size_t y) {
  if (draw.samples.empty()) throw ValidationError("simulate_pipeline: empty draw");
  std::vector<std::size_t> pool;
  for (const auto& s : draw.samples)
    if (policy == PipelinePolicy::dataset_marginal || s.y == y) pool.push_back(s.z);
  if (pool.empty())
    throw ValidationError("simulate_pipeline: draw has no samples for y index " + std::to_string(y));
  return pool;
}

template <class Emit>
void run_policy(const TrainingDraw& draw, PipelinePolicy policy, std::size_t y, std::size_t n_samples,
                Rng& rng, Emit&& emit) {
  if (n_samples == 0) throw ValidationError("simulate_pipeline: n_samples must be positive");
  const auto pool = context_pool(draw, policy, y);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const std::size_t z =
        policy == PipelinePolicy::observational ? pool[k % pool.size()] : pool[rng.below(pool.size())];
    emit(z);
  }
}

}  // namespace

Distribution simulate_pipeline(const DiscreteSCM& scm, const TrainingDraw& draw,
                               PipelinePolicy policy, std::size_t y, std::size_t n_samples,
                               std::uint64_t seed) {
  if (y >= scm.y_domain.size()) throw ValidationError("simulate_pipeline: unknown y");
  Rng rng(derive_seed(seed, "pipeline\x1f" + to_string(policy), y));
  Distribution counts(scm.x_domain.size(), 0.0);
  run_policy(draw, policy, y, n_samples, rng, [&](std::size_t z) {
    if (z >= scm.z_domain.size()) throw ValidationError("simulate_pipeline: draw z out of domain");
    counts[rng.categorical(scm.p_x_given_yz[y][z])] += 1.0;
  });
  for (auto& c : counts) c /= static_cast<double>(n_samples);
  return counts;
}

Distribution simulate_context(const DiscreteSCM& scm, const TrainingDraw& draw,
                              PipelinePolicy policy, std::size_t y, std::size_t n_samples,
                              std::uint64_t seed) {
  Rng rng(derive_seed(seed, "context\x1f" + to_string(policy), y));
  Distribution counts(scm.z_domain.size(), 0.0);
  run_policy(draw, policy, y, n_samples, rng, [&](std::size_t z) { counts.at(z) += 1.0; });
  for (auto& c : counts) c /= static_cast<double>(n_samples);
  return counts;
}

double tv_distance(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw ValidationError("tv_distance: domain mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double spuriousness_score(const TrainingDraw& draw) {
  if (draw.samples.empty()) throw ValidationError("spuriousness_score: empty draw");
  std::size_t ny = 0, nz = 0;
  for (const auto& s : draw.samples) {
    ny = std::max(ny, s.y + 1);
    nz = std::max(nz, s.z + 1);
  }
  std::vector<std::vector<double>> joint(ny, std::vector<double>(nz, 0.0));
  Distribution pz(nz, 0.0);
  std::vector<double> ycount(ny, 0.0);
  for (const auto& s : draw.samples) {
    joint[s.y][s.z] += 1.0;
    pz[s.z] += 1.0;
    ycount[s.y] += 1.0;
  }
  const double n = static_cast<double>(draw.samples.size());
  for (auto& v : pz) v /= n;
  double total = 0.0;
  int classes = 0;
  for (std::size_t y = 0; y < ny; ++y) {
    if (ycount[y] == 0.0) continue;
    Distribution cond(nz);
    for (std::size_t z = 0; z < nz; ++z) cond[z] = joint[y][z] / ycount[y];
    total += tv_distance(cond, pz);
    ++classes;
  }
  if (classes < 2) throw ValidationError("spuriousness_score: need at least 2 distinct classes");
  return total / classes;
}

namespace {

// Draws with a single class are redrawn under the next sub-seed.
double seed_spuriousness(const DiscreteSCM& scm, std::size_t n, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const auto draw = draw_iid(scm, n, derive_seed(seed, "spurious", attempt));
    bool multi = false;
    for (const auto& s : draw.samples) multi |= s.y != draw.samples.front().y;
    if (multi) return spuriousness_score(draw);
    if (attempt > 1000) throw ValidationError("mean_spuriousness: cannot draw two classes");
  }
}

}  // namespace

double mean_spuriousness_serial(const DiscreteSCM& scm, std::size_t n, std::size_t n_seeds,
                                std::uint64_t first_seed) {
  if (n_seeds == 0) throw ValidationError("mean_spuriousness: n_seeds must be positive");
  double s = 0.0;
  for (std::size_t k = 0; k < n_seeds; ++k) s += seed_spuriousness(scm, n, first_seed + k);
  return s / static_cast<double>(n_seeds);
}

double mean_spuriousness(const DiscreteSCM& scm, std::size_t n, std::size_t n_seeds,
                         std::uint64_t first_seed) {
  if (n_seeds == 0) throw ValidationError("mean_spuriousness: n_seeds must be positive");
  std::vector<double> scores(n_seeds, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(n_seeds);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < count; ++k)
    scores[static_cast<std::size_t>(k)] = seed_spuriousness(scm, n, first_seed + static_cast<std::uint64_t>(k));
  // Summed in seed order so the result matches the serial kernel bit for bit.
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(n_seeds);
}

std::vector<DemoRow> scm_demo(const DiscreteSCM& scm, const std::string& model,
                              std::size_t n_samples, std::uint64_t seed) {
  scm.validate();
  const bool confounded = model == "toy-confounded";
  const std::vector<std::size_t> sizes =
      confounded ? std::vector<std::size_t>{5, 50, 500} : std::vector<std::size_t>{10, 100, 1000, 10000};
  std::vector<DemoRow> rows;
  for (const auto n : sizes) {
    const auto draw = confounded ? draw_confounded(scm, n) : draw_iid(scm, n, derive_seed(seed, "demo", n));
    for (auto policy : {PipelinePolicy::observational, PipelinePolicy::class_marginal,
                        PipelinePolicy::dataset_marginal}) {
      double tv = 0.0;
      std::size_t used = 0;
      for (std::size_t y = 0; y < scm.y_domain.size(); ++y) {
        const bool present = std::any_of(draw.samples.begin(), draw.samples.end(),
                                         [&](const DrawSample& s) { return s.y == y; });
        if (!present) continue;
        tv += tv_distance(simulate_pipeline(scm, draw, policy, y, n_samples, seed),
                          exact_interventional(scm, y));
        ++used;
      }
      rows.push_back({confounded ? "confounded" : "iid", policy, n, used ? tv / used : 1.0});
    }
  }
  return rows;
}

std::string demo_csv(const std::vector<DemoRow>& rows) {
  std::ostringstream out;
  out << "draw,policy,n,tv_to_interventional\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& r : rows) out << r.draw << ',' << to_string(r.policy) << ',' << r.n << ',' << r.tv << '\n';
  return out.str();
}

}  // namespace ctxsynth
