// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/fid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "ctxsynth/util.hpp"
#include "json.hpp"

namespace ctxsynth {

namespace {

void check_features(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw ValidationError("fit_gaussian: need at least 2 rows");
  if (x.cols() < 1) throw ValidationError("fit_gaussian: zero-dimensional features");
  if (!x.allFinite()) throw ValidationError("fit_gaussian: non-finite feature value");
}

struct SymEig {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

SymEig sym_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw ValidationError("frechet_distance: eigendecomposition did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace

GaussianStats fit_gaussian_serial(const Eigen::MatrixXd& x) {
  check_features(x);
  GaussianStats g;
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  g.cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  g.cov = 0.5 * (g.cov + g.cov.transpose()).eval();
  return g;
}

GaussianStats fit_gaussian(const Eigen::MatrixXd& x) {
  check_features(x);
  const Eigen::Index n = x.rows(), d = x.cols();
  GaussianStats g;
  g.mean = Eigen::VectorXd::Zero(d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < d; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += x(i, j);
    g.mean(j) = s / static_cast<double>(n);
  }
  g.cov = Eigen::MatrixXd::Zero(d, d);
  // Upper triangle by column pairs, mirrored below.
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j; k < d; ++k) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += (x(i, j) - g.mean(j)) * (x(i, k) - g.mean(k));
      const double c = s / static_cast<double>(n - 1);
      g.cov(j, k) = c;
      g.cov(k, j) = c;
    }
  }
  return g;
}

FrechetResult frechet_distance_detail(const GaussianStats& a, const GaussianStats& b, double eps) {
  const auto d = a.mean.size();
  if (b.mean.size() != d || a.cov.rows() != d || a.cov.cols() != d || b.cov.rows() != d ||
      b.cov.cols() != d)
    throw ValidationError("frechet_distance: dimension mismatch");
  if (!(eps >= 0.0)) throw ValidationError("frechet_distance: eps must be >= 0");

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd ca = 0.5 * (a.cov + a.cov.transpose()) + eps * eye;
  const Eigen::MatrixXd cb = 0.5 * (b.cov + b.cov.transpose()) + eps * eye;

  const auto ea = sym_eig(ca);
  const Eigen::VectorXd sqrt_vals = ea.values.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = ea.vectors * sqrt_vals.asDiagonal() * ea.vectors.transpose();

  Eigen::MatrixXd prod = sqrt_a * cb * sqrt_a;
  prod = 0.5 * (prod + prod.transpose()).eval();
  const auto ep = sym_eig(prod);

  FrechetResult r;
  r.eps_used = eps;
  r.min_eigenvalue = std::min(ep.values.minCoeff(), ea.values.minCoeff());
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < ep.values.size(); ++i) tr_sqrt += std::sqrt(std::max(0.0, ep.values(i)));

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  r.distance = std::max(0.0, value);
  if (!std::isfinite(r.distance)) throw ValidationError("frechet_distance: non-finite result");
  return r;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b, double eps) {
  return frechet_distance_detail(a, b, eps).distance;
}

FrechetResult frechet_distance_adaptive(const GaussianStats& a, const GaussianStats& b,
                                        double fallback_eps) {
  auto r = frechet_distance_detail(a, b, 0.0);
  if (r.min_eigenvalue < -1e-8 && fallback_eps > 0.0) r = frechet_distance_detail(a, b, fallback_eps);
  return r;
}

namespace {

struct ClassPair {
  const FeatureSet* real;
  const FeatureSet* syn;
};

std::vector<ClassPair> match_classes(const std::vector<FeatureSet>& real,
                                     const std::vector<FeatureSet>& syn) {
  std::map<std::string, const FeatureSet*> syn_by;
  for (const auto& s : syn)
    if (!syn_by.emplace(s.class_label, &s).second)
      throw ValidationError("per_class_fid: duplicate synthetic class '" + s.class_label + "'");
  if (syn_by.size() != real.size()) {
    for (const auto& s : syn)
      if (std::none_of(real.begin(), real.end(),
                       [&](const FeatureSet& r) { return r.class_label == s.class_label; }))
        throw ValidationError("per_class_fid: class '" + s.class_label + "' missing from real set");
  }
  std::vector<ClassPair> pairs;
  std::optional<Eigen::Index> dim;
  for (const auto& r : real) {
    auto it = syn_by.find(r.class_label);
    if (it == syn_by.end())
      throw ValidationError("per_class_fid: class '" + r.class_label + "' missing from synthetic set");
    for (const auto* fs : {&r, it->second}) {
      if (fs->features.rows() < 2)
        throw ValidationError("per_class_fid: class '" + fs->class_label + "' has fewer than 2 samples");
      if (dim && fs->features.cols() != *dim)
        throw ValidationError("per_class_fid: feature dimension differs across sets");
      dim = fs->features.cols();
    }
    pairs.push_back({&r, it->second});
  }
  return pairs;
}

double class_fid(const ClassPair& p, const FidOptions& o, GaussianStats (*fit)(const Eigen::MatrixXd&)) {
  const auto a = fit(p.real->features);
  const auto b = fit(p.syn->features);
  return o.adaptive ? frechet_distance_adaptive(a, b, o.eps).distance : frechet_distance(a, b, o.eps);
}

FidReport finish_report(const std::vector<ClassPair>& pairs, const std::vector<double>& values) {
  FidReport rep;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& label = pairs[i].real->class_label;
    rep.per_class[label] = values[i];
    rep.n_real[label] = static_cast<int>(pairs[i].real->features.rows());
    rep.n_syn[label] = static_cast<int>(pairs[i].syn->features.rows());
  }
  rep.mode_estimate = histogram_mode(values, 1.0);
  return rep;
}

}  // namespace

FidReport per_class_fid_serial(const std::vector<FeatureSet>& real,
                               const std::vector<FeatureSet>& syn, const FidOptions& options) {
  const auto pairs = match_classes(real, syn);
  std::vector<double> values;
  values.reserve(pairs.size());
  for (const auto& p : pairs) values.push_back(class_fid(p, options, fit_gaussian_serial));
  return finish_report(pairs, values);
}

FidReport per_class_fid(const std::vector<FeatureSet>& real, const std::vector<FeatureSet>& syn,
                        const FidOptions& options) {
  const auto pairs = match_classes(real, syn);
  std::vector<double> values(pairs.size(), 0.0);
  std::vector<std::string> errors(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      values[static_cast<std::size_t>(i)] = class_fid(pairs[static_cast<std::size_t>(i)], options, fit_gaussian);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ValidationError(e);
  return finish_report(pairs, values);
}

std::map<std::string, double> fid_delta(const FidReport& a, const FidReport& b) {
  if (a.per_class.size() != b.per_class.size())
    throw ValidationError("fid_delta: class sets differ");
  std::map<std::string, double> out;
  for (const auto& [label, v] : a.per_class) {
    auto it = b.per_class.find(label);
    if (it == b.per_class.end()) throw ValidationError("fid_delta: class '" + label + "' missing");
    out[label] = v - it->second;
  }
  return out;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0)) throw ValidationError("histogram: bin width must be positive");
  std::map<long long, int> counts;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("histogram: non-finite value");
    ++counts[static_cast<long long>(std::floor(v / bin_width))];
  }
  std::vector<HistogramBin> bins;
  if (counts.empty()) return bins;
  for (long long k = counts.begin()->first; k <= counts.rbegin()->first; ++k) {
    auto it = counts.find(k);
    bins.push_back({static_cast<double>(k) * bin_width, static_cast<double>(k + 1) * bin_width,
                    it == counts.end() ? 0 : it->second});
  }
  return bins;
}

double histogram_mode(const std::vector<double>& values, double bin_width) {
  const auto bins = histogram(values, bin_width);
  if (bins.empty()) return 0.0;
  const auto best = std::max_element(bins.begin(), bins.end(),
                                     [](const HistogramBin& x, const HistogramBin& y) { return x.count < y.count; });
  return 0.5 * (best->lo + best->hi);
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : bins) out << b.lo << ',' << b.hi << ',' << b.count << '\n';
  return out.str();
}

std::string fid_report_to_json(const FidReport& r) {
  nlohmann::ordered_json j;
  j["mode_estimate"] = r.mode_estimate;
  auto classes = nlohmann::ordered_json::object();
  for (const auto& [label, v] : r.per_class)
    classes[label] = {{"fid", v}, {"n_real", r.n_real.at(label)}, {"n_syn", r.n_syn.at(label)}};
  j["per_class"] = std::move(classes);
  return j.dump(2) + "\n";
}

FidReport fid_report_from_json(const std::string& text) {
  FidReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.mode_estimate = j.at("mode_estimate").get<double>();
    for (const auto& [label, v] : j.at("per_class").items()) {
      r.per_class[label] = v.at("fid").get<double>();
      r.n_real[label] = v.at("n_real").get<int>();
      r.n_syn[label] = v.at("n_syn").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fid report: malformed: ") + e.what());
  }
  return r;
}

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'O', 'B', 'F'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

}  // namespace

void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& features) {
  std::string out(kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  out.reserve(out.size() + 4 * static_cast<std::size_t>(features.size()));
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      const float f = static_cast<float>(features(i, j));
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  write_file_atomic(path, out);
}

Eigen::MatrixXd read_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 12 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw ValidationError("feature file " + path.string() + ": bad magic");
  const std::uint32_t n = get_u32(bytes, 4), d = get_u32(bytes, 8);
  const std::size_t expect = 12 + 4ull * n * d;
  if (bytes.size() != expect)
    throw ValidationError("feature file " + path.string() + ": expected " + std::to_string(expect) +
                          " bytes, got " + std::to_string(bytes.size()));
  Eigen::MatrixXd m(n, d);
  std::size_t off = 12;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j, off += 4) {
      const std::uint32_t bits = get_u32(bytes, off);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      m(i, j) = f;
    }
  if (!m.allFinite()) throw ValidationError("feature file " + path.string() + ": non-finite value");
  return m;
}

std::vector<FeatureSet> load_feature_index(const std::filesystem::path& index_path) {
  std::istringstream in(read_file(index_path));
  const auto dir = index_path.parent_path();
  std::vector<FeatureSet> sets;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError("feature index " + index_path.string() + ": expected 'class<TAB>file'");
    std::filesystem::path file = line.substr(tab + 1);
    if (file.is_relative()) file = dir / file;
    sets.push_back({line.substr(0, tab), read_feature_file(file)});
  }
  if (sets.empty()) throw ValidationError("feature index " + index_path.string() + ": no entries");
  return sets;
}

void write_feature_index(const std::filesystem::path& index_path,
                         const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [label, file] : entries) out += label + "\t" + file + "\n";
  write_file_atomic(index_path, out);
}

}  // namespace ctxsynth
