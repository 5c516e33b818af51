// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-class Frechet distance between Gaussian fits of real and synthetic
// image features:
//
//   d^2 = |mu_a - mu_b|^2 + tr(S_a) + tr(S_b) - 2 tr((S_a S_b)^(1/2))
//
// The trace of the product square root is computed from the symmetric
// matrix (S_a + eps I)^(1/2) (S_b + eps I) (S_a + eps I)^(1/2), which has the
// same eigenvalues as (S_a + eps I)(S_b + eps I).
//
// Kernels come in two flavours: OpenMP-parallel (default) and a serial
// reference kept for testing and benchmarking.

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ctxsynth {

struct FeatureSet {
  std::string class_label;
  Eigen::MatrixXd features;  // n x d, one row per image
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Column means and the unbiased sample covariance, symmetrized.
GaussianStats fit_gaussian(const Eigen::MatrixXd& features);
GaussianStats fit_gaussian_serial(const Eigen::MatrixXd& features);

struct FrechetResult {
  double distance = 0.0;
  double min_eigenvalue = 0.0;  // smallest eigenvalue of the symmetric product, before clamping
  double eps_used = 0.0;
};

/// Fixed regularization `eps` (>= 0). Negative eigenvalues of the product
/// are clamped to zero; the most negative one is reported in min_eigenvalue.
FrechetResult frechet_distance_detail(const GaussianStats& a, const GaussianStats& b, double eps);
double frechet_distance(const GaussianStats& a, const GaussianStats& b, double eps = 0.0);

/// Tries eps = 0 first and retries with `fallback_eps` only when the product
/// has an eigenvalue below -1e-8.
FrechetResult frechet_distance_adaptive(const GaussianStats& a, const GaussianStats& b,
                                        double fallback_eps = 1e-6);

struct FidReport {
  std::map<std::string, double> per_class;
  std::map<std::string, int> n_real;
  std::map<std::string, int> n_syn;
  double mode_estimate = 0.0;
};

struct FidOptions {
  double eps = 1e-6;
  bool adaptive = true;  // apply eps only when needed
};

FidReport per_class_fid(const std::vector<FeatureSet>& real, const std::vector<FeatureSet>& syn,
                        const FidOptions& options = {});
FidReport per_class_fid_serial(const std::vector<FeatureSet>& real,
                               const std::vector<FeatureSet>& syn, const FidOptions& options = {});

/// report_a - report_b per class.
std::map<std::string, double> fid_delta(const FidReport& a, const FidReport& b);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

/// Bins aligned to multiples of `bin_width`. Empty input gives no bins.
std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width = 1.0);
/// Centre of the most populated bin; ties go to the lowest bin.
double histogram_mode(const std::vector<double>& values, double bin_width = 1.0);
std::string histogram_csv(const std::vector<HistogramBin>& bins);

std::string fid_report_to_json(const FidReport& report);
FidReport fid_report_from_json(const std::string& text);

// Feature files: "BOBF", u32 n, u32 d (little-endian), then n*d float32 row-major.
void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& features);
Eigen::MatrixXd read_feature_file(const std::filesystem::path& path);

/// Sidecar index: one "class_label<TAB>file" line per class; relative file
/// paths resolve against the index's directory.
std::vector<FeatureSet> load_feature_index(const std::filesystem::path& index_path);
void write_feature_index(const std::filesystem::path& index_path,
                         const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace ctxsynth
