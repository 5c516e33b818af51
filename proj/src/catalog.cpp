// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ctxsynth/util.hpp"
#include "json.hpp"

namespace ctxsynth {

using nlohmann::ordered_json;

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "train";
}

SplitTag parse_split_tag(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "val") return SplitTag::val;
  if (s == "test") return SplitTag::test;
  throw ValidationError("unknown split tag '" + s + "'");
}

void DatasetConfig::validate() const {
  if (descriptor.empty()) throw ValidationError("dataset config: descriptor is empty");
  if (classes.empty()) throw ValidationError("dataset config: no classes");
  std::set<std::string> seen;
  for (const auto& c : classes) {
    if (c.empty()) throw ValidationError("dataset config: empty class label");
    if (!seen.insert(c).second) throw ValidationError("dataset config: duplicate class '" + c + "'");
  }
  if (val_per_class < 0) throw ValidationError("dataset config: val_per_class < 0");
  if (duplication_factor_c < 1) throw ValidationError("dataset config: duplication_factor_c < 1");
  if (total_budget_T < 1) throw ValidationError("dataset config: total_budget_T < 1");
  if (per_class_counts) {
    if (per_class_counts->size() != classes.size())
      throw ValidationError("dataset config: per_class_counts length != number of classes");
    for (int c : *per_class_counts)
      if (c < 1) throw ValidationError("dataset config: per_class_counts entries must be >= 1");
  }
}

DatasetConfig dataset_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("dataset config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("dataset config: expected a JSON object");
  DatasetConfig c;
  try {
    c.name = j.value("name", "");
    c.descriptor = j.at("descriptor").get<std::string>();
    c.classes = j.at("classes").get<std::vector<std::string>>();
    c.val_per_class = j.value("val_per_class", 0);
    c.duplication_factor_c = j.value("duplication_factor_c", 1);
    c.total_budget_T = j.value("total_budget_T", 200);
    if (j.contains("per_class_counts") && !j["per_class_counts"].is_null())
      c.per_class_counts = j["per_class_counts"].get<std::vector<int>>();
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("dataset config: ") + e.what());
  }
  c.validate();
  return c;
}

DatasetConfig load_dataset_config(const std::filesystem::path& path) {
  return dataset_config_from_json(read_file(path));
}

std::string dataset_config_to_json(const DatasetConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["descriptor"] = c.descriptor;
  j["classes"] = c.classes;
  j["val_per_class"] = c.val_per_class;
  j["duplication_factor_c"] = c.duplication_factor_c;
  j["total_budget_T"] = c.total_budget_T;
  if (c.per_class_counts) j["per_class_counts"] = *c.per_class_counts;
  return j.dump(2) + "\n";
}

const ImageRecord* DatasetCatalog::find(const std::string& image_id) const {
  for (const auto& r : records)
    if (r.image_id == image_id) return &r;
  return nullptr;
}

DatasetCatalog parse_catalog(const std::string& text, std::span<const std::string> classes) {
  DatasetCatalog cat;
  cat.classes.assign(classes.begin(), classes.end());
  std::unordered_set<std::string> known(cat.classes.begin(), cat.classes.end());
  const bool derive_classes = cat.classes.empty();
  std::unordered_set<std::string> ids;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = "catalog line " + std::to_string(lineno);
    ImageRecord rec;
    try {
      const auto j = ordered_json::parse(line);
      rec.image_id = j.at("image_id").get<std::string>();
      rec.class_label = j.at("class_label").get<std::string>();
      rec.path = j.at("path").get<std::string>();
      rec.split = parse_split_tag(j.value("split", "train"));
    } catch (const ordered_json::exception& e) {
      throw ValidationError(where + ": malformed record: " + e.what());
    }
    if (rec.image_id.empty()) throw ValidationError(where + ": empty image_id");
    if (rec.path.empty()) throw ValidationError(where + ": empty path for '" + rec.image_id + "'");
    if (!ids.insert(rec.image_id).second)
      throw ValidationError(where + ": duplicate image_id '" + rec.image_id + "'");
    if (!known.count(rec.class_label)) {
      if (!derive_classes)
        throw ValidationError(where + ": unknown class '" + rec.class_label + "'");
      known.insert(rec.class_label);
      cat.classes.push_back(rec.class_label);
    }
    cat.records.push_back(std::move(rec));
  }
  if (cat.records.empty()) throw ValidationError("catalog: no records");
  return cat;
}

DatasetCatalog load_catalog(const std::filesystem::path& path, std::span<const std::string> classes) {
  if (!std::filesystem::exists(path)) throw ValidationError("catalog not found: " + path.string());
  return parse_catalog(read_file(path), classes);
}

std::string serialize_catalog(const DatasetCatalog& catalog) {
  std::string out;
  for (const auto& r : catalog.records) {
    ordered_json j;
    j["image_id"] = r.image_id;
    j["class_label"] = r.class_label;
    j["path"] = r.path;
    j["split"] = to_string(r.split);
    out += j.dump();
    out += '\n';
  }
  return out;
}

bool SplitAssignment::contains(const std::string& image_id) const {
  return std::find(image_ids.begin(), image_ids.end(), image_id) != image_ids.end();
}

SplitAssignment sample_per_class(const DatasetCatalog& catalog,
                                 const std::map<std::string, int>& counts, SplitTag pool,
                                 std::uint64_t seed, std::string_view salt,
                                 const SplitAssignment* exclude) {
  std::unordered_set<std::string> excluded;
  if (exclude) excluded.insert(exclude->image_ids.begin(), exclude->image_ids.end());

  std::unordered_map<std::string, std::vector<std::size_t>> eligible;
  for (std::size_t i = 0; i < catalog.records.size(); ++i) {
    const auto& r = catalog.records[i];
    if (r.split == pool && !excluded.count(r.image_id)) eligible[r.class_label].push_back(i);
  }

  std::vector<std::size_t> chosen;
  for (const auto& [label, k] : counts) {
    if (std::find(catalog.classes.begin(), catalog.classes.end(), label) == catalog.classes.end())
      throw ValidationError("split: unknown class '" + label + "'");
    if (k < 0) throw ValidationError("split: negative count for class '" + label + "'");
    auto& idx = eligible[label];
    if (static_cast<std::size_t>(k) > idx.size())
      throw ValidationError("split: class '" + label + "' has " + std::to_string(idx.size()) +
                            " eligible " + to_string(pool) + " images, need " + std::to_string(k));
    // Partial Fisher-Yates: the first k positions are a uniform k-subset.
    Rng rng(derive_seed(seed, std::string(salt) + '\x1f' + label));
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + k);
  }
  std::sort(chosen.begin(), chosen.end());
  SplitAssignment out;
  out.image_ids.reserve(chosen.size());
  for (auto i : chosen) out.image_ids.push_back(catalog.records[i].image_id);
  return out;
}

SplitAssignment make_fewshot_split(const DatasetCatalog& catalog, int k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("fewshot split: k must be positive");
  std::map<std::string, int> counts;
  for (const auto& c : catalog.classes) counts[c] = k;
  return sample_per_class(catalog, counts, SplitTag::train, seed, "train");
}

SplitAssignment make_longtail_split(const DatasetCatalog& catalog, std::span<const int> counts,
                                    std::uint64_t seed) {
  if (counts.size() != catalog.classes.size())
    throw ValidationError("longtail split: need one count per class");
  std::map<std::string, int> per_class;
  for (std::size_t i = 0; i < counts.size(); ++i) per_class[catalog.classes[i]] = counts[i];
  return sample_per_class(catalog, per_class, SplitTag::train, seed, "train");
}

SplitAssignment make_validation_split(const DatasetCatalog& catalog, int per_class,
                                      std::uint64_t seed, const SplitAssignment& train,
                                      SplitTag pool) {
  if (per_class < 0) throw ValidationError("validation split: per_class < 0");
  if (per_class == 0) return {};
  std::map<std::string, int> counts;
  for (const auto& c : catalog.classes) counts[c] = per_class;
  return sample_per_class(catalog, counts, pool, seed, "val", &train);
}

LongTailProfile long_tail_counts(int n_max, double imbalance_factor, int n_classes) {
  if (n_max < 1) throw ValidationError("long_tail_counts: n_max must be >= 1");
  if (!(imbalance_factor >= 1.0) || !std::isfinite(imbalance_factor))
    throw ValidationError("long_tail_counts: imbalance factor must be >= 1");
  if (n_classes < 2) throw ValidationError("long_tail_counts: need at least 2 classes");
  LongTailProfile p;
  p.imbalance_factor = imbalance_factor;
  p.n_max = n_max;
  p.per_class_counts.reserve(static_cast<std::size_t>(n_classes));
  for (int i = 0; i < n_classes; ++i) {
    const double exponent = -static_cast<double>(i) / static_cast<double>(n_classes - 1);
    const double v = static_cast<double>(n_max) * std::pow(imbalance_factor, exponent);
    p.per_class_counts.push_back(std::max(1, static_cast<int>(std::lround(v))));
  }
  return p;
}

}  // namespace ctxsynth
