// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// The caption bank: one (background, pose) pair per training image. The
// bank is the empirical distribution of class-agnostic context, so
// duplicate pairs are kept.

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ctxsynth/backend.hpp"
#include "ctxsynth/catalog.hpp"

namespace ctxsynth {

struct AttributePair {
  std::string background;
  std::string pose;

  auto operator<=>(const AttributePair&) const = default;
};

struct BankEntry {
  std::string image_id;
  std::string class_label;
  AttributePair pair;
  bool degraded = false;

  bool operator==(const BankEntry&) const = default;
};

struct CaptionBank {
  std::vector<BankEntry> entries;  // sorted by image_id
  std::string source_dataset;
  std::string captioner_name;
  // Digest of the upstream split artifact; empty when built in memory.
  std::string upstream_digest;

  const BankEntry* find(const std::string& image_id) const;
  bool operator==(const CaptionBank&) const = default;
};

/// Attribute used when extraction fails after retries.
inline constexpr const char* kFallbackAttribute = "plain";

/// Trims, collapses whitespace runs (newlines included) to one space and
/// drops one trailing period. Casing is preserved. Throws ValidationError
/// if nothing is left.
std::string normalize_attribute(std::string_view text);

using ImageLoader = std::function<std::string(const ImageRecord&)>;

/// Reads the image file named by the record's path.
std::string load_image_file(const ImageRecord& record);

struct BuildBankOptions {
  int max_in_flight = 1;
  ImageLoader loader = load_image_file;
};

/// Extracts background and pose for every image in `train`. A failed or
/// empty extraction becomes kFallbackAttribute and flags the entry degraded.
CaptionBank build_bank(const DatasetCatalog& catalog, const SplitAssignment& train,
                       const std::string& descriptor, const std::string& source_dataset,
                       Captioner& captioner, const BuildBankOptions& options = {});

struct BankStats {
  std::map<std::string, int> per_class;
  int total = 0;
  int distinct_pairs = 0;
  int degraded = 0;
};

BankStats bank_stats(const CaptionBank& bank);

/// Header line followed by one JSON object per entry. The header carries a
/// digest of the entry lines, checked on load.
std::string serialize_bank(const CaptionBank& bank);
CaptionBank parse_bank(const std::string& text);
void save_bank(const CaptionBank& bank, const std::filesystem::path& path);
CaptionBank load_bank(const std::filesystem::path& path);

}  // namespace ctxsynth
