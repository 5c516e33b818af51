// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset catalogs and deterministic few-shot / long-tail / validation
// splits.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctxsynth {

enum class SplitTag { train, val, test };

std::string to_string(SplitTag tag);
SplitTag parse_split_tag(const std::string& s);

struct ImageRecord {
  std::string image_id;
  std::string class_label;
  std::string path;
  SplitTag split = SplitTag::train;

  bool operator==(const ImageRecord&) const = default;
};

struct DatasetConfig {
  std::string name;
  std::string descriptor;  // dataset-level noun used in every prompt, e.g. "aircraft"
  std::vector<std::string> classes;
  int val_per_class = 0;
  int duplication_factor_c = 1;
  int total_budget_T = 200;
  // Long-tail override; replaces the exponential profile when present.
  std::optional<std::vector<int>> per_class_counts;

  /// Throws ValidationError on an invariant violation.
  void validate() const;
};

DatasetConfig load_dataset_config(const std::filesystem::path& path);
std::string dataset_config_to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const std::string& text);

struct DatasetCatalog {
  std::vector<std::string> classes;
  std::vector<ImageRecord> records;

  const ImageRecord* find(const std::string& image_id) const;
};

/// Parses line-delimited JSON records. With `classes` empty the class list
/// is taken from the records in order of first appearance; otherwise every
/// record must name one of `classes`.
DatasetCatalog parse_catalog(const std::string& text, std::span<const std::string> classes = {});
DatasetCatalog load_catalog(const std::filesystem::path& path,
                            std::span<const std::string> classes = {});
std::string serialize_catalog(const DatasetCatalog& catalog);

/// Selected image ids, in catalog order.
struct SplitAssignment {
  std::vector<std::string> image_ids;

  bool contains(const std::string& image_id) const;
  bool operator==(const SplitAssignment&) const = default;
};

/// Draws `counts[class]` images per class from the records tagged `pool`,
/// uniformly without replacement. Each class uses its own stream derived
/// from (seed, class_label, salt), so the result does not depend on class
/// iteration order.
SplitAssignment sample_per_class(const DatasetCatalog& catalog,
                                 const std::map<std::string, int>& counts, SplitTag pool,
                                 std::uint64_t seed, std::string_view salt,
                                 const SplitAssignment* exclude = nullptr);

/// k train images per class.
SplitAssignment make_fewshot_split(const DatasetCatalog& catalog, int k, std::uint64_t seed);

/// Per-class train counts following a long-tail profile, class rank = catalog class order.
SplitAssignment make_longtail_split(const DatasetCatalog& catalog, std::span<const int> counts,
                                    std::uint64_t seed);

/// `per_class` images per class from `pool`, disjoint from `train`.
SplitAssignment make_validation_split(const DatasetCatalog& catalog, int per_class,
                                      std::uint64_t seed, const SplitAssignment& train,
                                      SplitTag pool = SplitTag::train);

struct LongTailProfile {
  double imbalance_factor = 1.0;
  int n_max = 1;
  std::vector<int> per_class_counts;
};

/// count_i = max(1, round(n_max * IF^(-i/(C-1)))) for rank i in [0, C).
LongTailProfile long_tail_counts(int n_max, double imbalance_factor, int n_classes);

}  // namespace ctxsynth
