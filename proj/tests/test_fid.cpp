// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <complex>

#include <Eigen/Eigenvalues>

#include "ctxsynth/fid.hpp"
#include "ctxsynth/util.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace ctxsynth;

namespace {

GaussianStats gauss1d(double mean, double var) {
  GaussianStats g;
  g.mean = Eigen::VectorXd::Constant(1, mean);
  g.cov = Eigen::MatrixXd::Constant(1, 1, var);
  return g;
}

Eigen::MatrixXd random_spd(Rng& rng, int d) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.uniform() * 2.0 - 1.0;
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

GaussianStats random_gaussian(Rng& rng, int d) {
  GaussianStats g;
  g.mean = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i) g.mean(i) = rng.uniform() * 4.0 - 2.0;
  g.cov = random_spd(rng, d);
  return g;
}

// Independent reference: eigenvalues of the non-symmetric product S_a S_b.
double reference_fid(const GaussianStats& a, const GaussianStats& b) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a.cov * b.cov);
  std::complex<double> tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(es.eigenvalues()(i));
  return (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr.real();
}

Eigen::MatrixXd random_features(Rng& rng, int n, int d, double shift) {
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform() + shift * j;
  return x;
}

}  // namespace

TEST_CASE("closed-form univariate cases") {
  CHECK(std::abs(frechet_distance(gauss1d(0, 1), gauss1d(3, 1)) - 9.0) < 1e-6);
  CHECK(std::abs(frechet_distance(gauss1d(0, 1), gauss1d(0, 4)) - 1.0) < 1e-6);
  CHECK(std::abs(frechet_distance(gauss1d(2, 9), gauss1d(-1, 1)) - (9.0 + 10.0 - 6.0)) < 1e-9);
}

TEST_CASE("identity is zero") {
  Rng rng(3);
  for (int d = 1; d <= 8; ++d) {
    const auto g = random_gaussian(rng, d);
    CHECK(frechet_distance(g, g) < 1e-6);
    CHECK(frechet_distance_adaptive(g, g).distance < 1e-6);
  }
}

TEST_CASE("symmetry and agreement with an eigen-based reference") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + static_cast<int>(rng.below(8));
    const auto a = random_gaussian(rng, d), b = random_gaussian(rng, d);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    CHECK(std::abs(ab - ba) < 1e-8);
    CHECK(std::abs(ab - reference_fid(a, b)) < 1e-5);
  }
}

TEST_CASE("singular covariances") {
  // Rank-deficient covariances still yield a finite, non-negative distance.
  GaussianStats a, b;
  a.mean = Eigen::VectorXd::Zero(3);
  b.mean = Eigen::VectorXd::Zero(3);
  a.cov = Eigen::MatrixXd::Zero(3, 3);
  a.cov(0, 0) = 1.0;
  b.cov = Eigen::MatrixXd::Zero(3, 3);
  b.cov(1, 1) = 1.0;
  const auto r = frechet_distance_adaptive(a, b);
  CHECK(r.distance == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(r.distance >= 0.0);
  CHECK(frechet_distance_detail(a, b, 1e-6).eps_used == 1e-6);
  CHECK_THROWS_AS(frechet_distance_detail(a, b, -1.0), ValidationError);
  CHECK_THROWS_AS(frechet_distance(a, gauss1d(0, 1)), ValidationError);
}

TEST_CASE("fit_gaussian: parallel matches serial and known moments") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 9;
  const auto g = fit_gaussian(x);
  CHECK(g.mean(0) == doctest::Approx(4.0));
  CHECK(g.mean(1) == doctest::Approx(5.25));
  CHECK(g.cov(0, 0) == doctest::Approx(20.0 / 3.0));
  CHECK(g.cov(0, 1) == doctest::Approx(g.cov(1, 0)));

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto f = random_features(rng, 50 + t, 1 + t % 8, 0.3);
    const auto p = fit_gaussian(f), s = fit_gaussian_serial(f);
    CHECK((p.mean - s.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((p.cov - s.cov).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(fit_gaussian(Eigen::MatrixXd::Zero(1, 3)), ValidationError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_gaussian(bad), ValidationError);
}

TEST_CASE("per_class_fid: parallel equals serial") {
  Rng rng(8);
  std::vector<FeatureSet> real, syn;
  for (int c = 0; c < 12; ++c) {
    real.push_back({"c" + std::to_string(c), random_features(rng, 40, 4, 0.0)});
    syn.push_back({"c" + std::to_string(11 - c), random_features(rng, 30, 4, 0.1 * c)});
  }
  const auto p = per_class_fid(real, syn), s = per_class_fid_serial(real, syn);
  CHECK(p.per_class.size() == 12);
  for (const auto& [label, v] : p.per_class) CHECK(std::abs(v - s.per_class.at(label)) < 1e-10);
  CHECK(p.n_real.at("c3") == 40);
  CHECK(p.n_syn.at("c3") == 30);
  CHECK(p.mode_estimate == s.mode_estimate);
}

TEST_CASE("per_class_fid errors") {
  Rng rng(1);
  const std::vector<FeatureSet> real{{"a", random_features(rng, 5, 2, 0)}};
  CHECK_THROWS_AS(per_class_fid(real, {{"b", random_features(rng, 5, 2, 0)}}), ValidationError);
  CHECK_THROWS_AS(per_class_fid(real, {{"a", random_features(rng, 1, 2, 0)}}), ValidationError);
  CHECK_THROWS_AS(per_class_fid(real, {{"a", random_features(rng, 5, 3, 0)}}), ValidationError);
  CHECK_THROWS_AS(per_class_fid(real, {{"a", random_features(rng, 5, 2, 0)}, {"a", random_features(rng, 5, 2, 0)}}),
                  ValidationError);
}

TEST_CASE("histogram") {
  const std::vector<double> v{0.2, 0.7, 1.5, 3.9, 1.1, 1.2};
  const auto bins = histogram(v, 1.0);
  REQUIRE(bins.size() == 4);
  CHECK(bins[0].count == 2);
  CHECK(bins[1].count == 3);
  CHECK(bins[2].count == 0);
  CHECK(bins[3].lo == 3.0);
  CHECK(histogram_mode(v) == 1.5);
  CHECK(histogram_mode({0.5, 2.5}) == 0.5);
  CHECK(histogram_mode({-0.5, -0.4}) == -0.5);
  CHECK(histogram({}).empty());
  CHECK(histogram_csv(histogram({0.5}, 1.0)) == "bin_lo,bin_hi,count\n0,1,1\n");
  CHECK_THROWS_AS(histogram(v, 0.0), ValidationError);
}

TEST_CASE("fid_delta and report json") {
  FidReport a, b;
  a.per_class = {{"x", 5.0}, {"y", 2.0}};
  b.per_class = {{"x", 3.0}, {"y", 4.0}};
  a.n_real = a.n_syn = {{"x", 2}, {"y", 3}};
  const auto d = fid_delta(a, b);
  CHECK(d.at("x") == 2.0);
  CHECK(d.at("y") == -2.0);
  b.per_class.erase("y");
  CHECK_THROWS_AS(fid_delta(a, b), ValidationError);
  a.mode_estimate = 2.5;
  const auto back = fid_report_from_json(fid_report_to_json(a));
  CHECK(back.per_class == a.per_class);
  CHECK(back.n_syn == a.n_syn);
  CHECK(back.mode_estimate == 2.5);
}

TEST_CASE("feature files and index") {
  ctxsynth::testing::TempDir dir("fid");
  Eigen::MatrixXd m(3, 2);
  m << 1.5, -2, 0.25, 1e3, 7, 8;
  write_feature_file(dir.path() / "a.bin", m);
  CHECK(read_feature_file(dir.path() / "a.bin") == m);
  CHECK(read_file(dir.path() / "a.bin").substr(0, 4) == "BOBF");
  CHECK(read_file(dir.path() / "a.bin").size() == 12 + 4 * 6);

  write_feature_index(dir.path() / "index.tsv", {{"F/A-18", "a.bin"}});
  const auto sets = load_feature_index(dir.path() / "index.tsv");
  REQUIRE(sets.size() == 1);
  CHECK(sets[0].class_label == "F/A-18");
  CHECK(sets[0].features == m);

  write_file_atomic(dir.path() / "bad.bin", "XXXX0000");
  CHECK_THROWS_AS(read_feature_file(dir.path() / "bad.bin"), ValidationError);
  auto bytes = read_file(dir.path() / "a.bin");
  write_file_atomic(dir.path() / "short.bin", bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(read_feature_file(dir.path() / "short.bin"), ValidationError);
}
