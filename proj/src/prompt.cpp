// Copyright 2026 The ctxsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxsynth/prompt.hpp"

#include "ctxsynth/util.hpp"

namespace ctxsynth {

namespace {

constexpr std::string_view kPrefix = "a ";
constexpr std::string_view kPhotoOf = " photo of a ";
constexpr std::string_view kInThe = " in the ";
constexpr std::string_view kBackgroundWith = " background with the ";
constexpr std::string_view kPoseSuffix = " pose";

void check_slot(std::string_view name, std::string_view value) {
  if (value.empty()) throw ValidationError("caption slot '" + std::string(name) + "' is empty");
  if (value.find('\n') != std::string_view::npos || value.find('\r') != std::string_view::npos)
    throw ValidationError("caption slot '" + std::string(name) + "' contains a newline");
  if (trim(value).size() != value.size())
    throw ValidationError("caption slot '" + std::string(name) +
                          "' has leading or trailing whitespace");
}

}  // namespace

std::string to_string(AttributeKind kind) {
  return kind == AttributeKind::background ? "background" : "pose";
}

std::string render_training_caption(const CaptionSlots& s) {
  check_slot("descriptor", s.descriptor);
  check_slot("classname", s.classname);
  check_slot("background", s.background);
  check_slot("pose", s.pose);
  std::string out;
  out.reserve(96 + s.descriptor.size() + s.classname.size() + s.background.size() + s.pose.size());
  out += kPrefix;
  out += s.descriptor;
  out += kPhotoOf;
  out += s.classname;
  out += kInThe;
  out += s.background;
  out += kBackgroundWith;
  out += s.pose;
  out += kPoseSuffix;
  return out;
}

std::string render_extraction_prompt(AttributeKind kind, std::string_view descriptor) {
  check_slot("descriptor", descriptor);
  const std::string d(descriptor);
  return "describe the " + to_string(kind) + " of the " + d +
         " in as few words as possible. Refer to the " + d + " as simply 'a " + d + "'";
}

std::string render_class_only_caption(std::string_view descriptor, std::string_view classname) {
  check_slot("descriptor", descriptor);
  check_slot("classname", classname);
  return "a photo of a " + std::string(classname);
}

std::optional<CaptionSlots> parse_training_caption(std::string_view c) {
  if (!c.starts_with(kPrefix) || !c.ends_with(kPoseSuffix)) return std::nullopt;
  const auto photo = c.find(kPhotoOf, kPrefix.size());
  if (photo == std::string_view::npos) return std::nullopt;
  const auto class_begin = photo + kPhotoOf.size();
  const auto bg_with = c.rfind(kBackgroundWith);
  if (bg_with == std::string_view::npos || bg_with < class_begin) return std::nullopt;
  const auto in_the = c.find(kInThe, class_begin);
  if (in_the == std::string_view::npos || in_the >= bg_with) return std::nullopt;
  const auto pose_begin = bg_with + kBackgroundWith.size();
  const auto pose_end = c.size() - kPoseSuffix.size();
  if (pose_end < pose_begin) return std::nullopt;

  CaptionSlots s;
  s.descriptor = std::string(c.substr(kPrefix.size(), photo - kPrefix.size()));
  s.classname = std::string(c.substr(class_begin, in_the - class_begin));
  s.background = std::string(c.substr(in_the + kInThe.size(), bg_with - in_the - kInThe.size()));
  s.pose = std::string(c.substr(pose_begin, pose_end - pose_begin));
  if (s.descriptor.empty() || s.classname.empty() || s.background.empty() || s.pose.empty())
    return std::nullopt;
  return s;
}

bool matches_training_template(std::string_view caption) {
  return parse_training_caption(caption).has_value();
}

}  // namespace ctxsynth
