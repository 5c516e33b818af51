// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/caption_bank.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ctxsynth/prompt.hpp"
#include "json.hpp"

namespace ctxsynth {

using nlohmann::ordered_json;

const BankEntry* CaptionBank::find(const std::string& image_id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), image_id,
                             [](const BankEntry& e, const std::string& id) { return e.image_id < id; });
  if (it != entries.end() && it->image_id == image_id) return &*it;
  return nullptr;
}

std::string normalize_attribute(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == '.') out.pop_back();
  while (!out.empty() && out.back() == ' ') out.pop_back();
  if (out.empty()) throw ValidationError("empty after normalization");
  return out;
}

std::string load_image_file(const ImageRecord& record) {
  if (!std::filesystem::exists(record.path))
    throw ValidationError("image not found for " + record.image_id + ": " + record.path);
  return read_file(record.path);
}

CaptionBank build_bank(const DatasetCatalog& catalog, const SplitAssignment& train,
                       const std::string& descriptor, const std::string& source_dataset,
                       Captioner& captioner, const BuildBankOptions& options) {
  if (train.image_ids.empty()) throw ValidationError("build_bank: empty train split");
  std::vector<const ImageRecord*> records;
  for (const auto& id : train.image_ids) {
    const auto* r = catalog.find(id);
    if (!r) throw ValidationError("build_bank: train image '" + id + "' not in catalog");
    records.push_back(r);
  }
  const std::string bg_prompt = render_extraction_prompt(AttributeKind::background, descriptor);
  const std::string pose_prompt = render_extraction_prompt(AttributeKind::pose, descriptor);

  // Loading is a configuration concern and fails the build; extraction failures degrade.
  std::vector<std::string> images(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) images[i] = options.loader(*records[i]);

  std::vector<BankEntry> entries(records.size());
  bounded_for_each(records.size(), options.max_in_flight, [&](std::size_t i) {
    const auto& rec = *records[i];
    auto& e = entries[i];
    e.image_id = rec.image_id;
    e.class_label = rec.class_label;
    auto extract = [&](const std::string& prompt) -> std::string {
      try {
        return normalize_attribute(caption_image(captioner, {rec.image_id, images[i], prompt}).text);
      } catch (const TransportError&) {
      } catch (const ValidationError&) {
      }
      e.degraded = true;
      return kFallbackAttribute;
    };
    e.pair.background = extract(bg_prompt);
    e.pair.pose = extract(pose_prompt);
  });

  std::sort(entries.begin(), entries.end(),
            [](const BankEntry& a, const BankEntry& b) { return a.image_id < b.image_id; });
  CaptionBank bank;
  bank.entries = std::move(entries);
  bank.source_dataset = source_dataset;
  bank.captioner_name = captioner.name();
  return bank;
}

BankStats bank_stats(const CaptionBank& bank) {
  BankStats s;
  std::set<AttributePair> distinct;
  for (const auto& e : bank.entries) {
    ++s.per_class[e.class_label];
    ++s.total;
    if (e.degraded) ++s.degraded;
    distinct.insert(e.pair);
  }
  s.distinct_pairs = static_cast<int>(distinct.size());
  return s;
}

namespace {

std::string entry_line(const BankEntry& e) {
  ordered_json j;
  j["image_id"] = e.image_id;
  j["class_label"] = e.class_label;
  j["background"] = e.pair.background;
  j["pose"] = e.pair.pose;
  j["degraded"] = e.degraded;
  return j.dump() + "\n";
}

}  // namespace

std::string serialize_bank(const CaptionBank& bank) {
  std::string body;
  for (const auto& e : bank.entries) body += entry_line(e);
  ordered_json h;
  h["source_dataset"] = bank.source_dataset;
  h["captioner_name"] = bank.captioner_name;
  h["count"] = bank.entries.size();
  h["upstream_digest"] = bank.upstream_digest;
  h["entries_digest"] = sha256_hex(body);
  return h.dump() + "\n" + body;
}

CaptionBank parse_bank(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("bank: missing header");
  CaptionBank bank;
  std::string expected_digest;
  std::size_t count = 0;
  try {
    const auto h = ordered_json::parse(line);
    bank.source_dataset = h.at("source_dataset").get<std::string>();
    bank.captioner_name = h.at("captioner_name").get<std::string>();
    bank.upstream_digest = h.value("upstream_digest", "");
    count = h.at("count").get<std::size_t>();
    expected_digest = h.at("entries_digest").get<std::string>();
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("bank: malformed header: ") + e.what());
  }
  const std::string body = text.substr(line.size() + 1 > text.size() ? text.size() : line.size() + 1);
  if (sha256_hex(body) != expected_digest)
    throw ProvenanceError("bank: entries digest mismatch (file modified after it was written)");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      BankEntry e;
      e.image_id = j.at("image_id").get<std::string>();
      e.class_label = j.at("class_label").get<std::string>();
      e.pair.background = j.at("background").get<std::string>();
      e.pair.pose = j.at("pose").get<std::string>();
      e.degraded = j.value("degraded", false);
      bank.entries.push_back(std::move(e));
    } catch (const ordered_json::exception& e) {
      throw ValidationError(std::string("bank: malformed entry: ") + e.what());
    }
  }
  if (bank.entries.size() != count) throw ValidationError("bank: header count does not match entries");
  if (!std::is_sorted(bank.entries.begin(), bank.entries.end(),
                      [](const BankEntry& a, const BankEntry& b) { return a.image_id < b.image_id; }))
    throw ValidationError("bank: entries not in image_id order");
  return bank;
}

void save_bank(const CaptionBank& bank, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_bank(bank));
}

CaptionBank load_bank(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("bank not found: " + path.string());
  return parse_bank(read_file(path));
}

}  // namespace ctxsynth
