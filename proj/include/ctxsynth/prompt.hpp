// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0
//
// Caption and extraction-prompt templates. Rendering is plain textual
// substitution: no article fix-up, no casing changes.

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ctxsynth {

struct CaptionSlots {
  std::string descriptor;
  std::string classname;
  std::string background;
  std::string pose;

  bool operator==(const CaptionSlots&) const = default;
};

enum class AttributeKind { background, pose };

std::string to_string(AttributeKind kind);

/// "a {descriptor} photo of a {classname} in the {background} background with the {pose} pose"
std::string render_training_caption(const CaptionSlots& slots);

/// The captioner instruction for one attribute kind.
std::string render_extraction_prompt(AttributeKind kind, std::string_view descriptor);

/// "a photo of a {classname}", the caption used without context preservation.
std::string render_class_only_caption(std::string_view descriptor, std::string_view classname);

/// Inverse of render_training_caption. Returns nullopt when `caption` does not
/// follow the template. Slot values containing template keywords may split
/// differently than they were rendered; callers comparing against known slots
/// should re-render instead.
std::optional<CaptionSlots> parse_training_caption(std::string_view caption);

/// Whether `caption` has the shape of a rendered training caption.
bool matches_training_template(std::string_view caption);

}  // namespace ctxsynth
