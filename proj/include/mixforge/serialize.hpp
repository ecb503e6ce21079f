#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mixforge/core.hpp"
#include "mixforge/data.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/mixers.hpp"
#include "mixforge/trainer.hpp"
#include "mixforge/transforms.hpp"

namespace mixforge {

// JSON forms of the pipeline vocabulary. Transform and stage records are
// {"kind": ..., params...}; uses explicit named functions rather than ADL
// hooks since most of the types are std::variant aliases.

using json = nlohmann::json;

inline std::string axis_to_string(Axis a) { return to_string(a); }

inline Axis axis_from_string(const std::string& s) {
  if (s == "height") return Axis::height;
  if (s == "width") return Axis::width;
  if (s == "channel") return Axis::channel;
  throw ConfigError("unknown axis '" + s + "'");
}

inline json transform_to_json(const TransformSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PadRandomCrop>) {
          return {{"kind", "pad_random_crop"}, {"pad", s.pad}};
        } else if constexpr (std::is_same_v<T, HorizontalFlip>) {
          return {{"kind", "horizontal_flip"}, {"p", s.p}};
        } else if constexpr (std::is_same_v<T, Normalize>) {
          return {{"kind", "normalize"}, {"mean", s.mean}, {"std", s.std}};
        } else if constexpr (std::is_same_v<T, CenterCrop>) {
          return {{"kind", "center_crop"}, {"size", s.size}};
        } else if constexpr (std::is_same_v<T, Rotate>) {
          return {{"kind", "rotate"}, {"max_degrees", s.max_degrees}};
        } else if constexpr (std::is_same_v<T, TranslateX>) {
          return {{"kind", "translate_x"}, {"max_fraction", s.max_fraction}};
        } else if constexpr (std::is_same_v<T, TranslateY>) {
          return {{"kind", "translate_y"}, {"max_fraction", s.max_fraction}};
        } else if constexpr (std::is_same_v<T, ShearX>) {
          return {{"kind", "shear_x"}, {"max_factor", s.max_factor}};
        } else if constexpr (std::is_same_v<T, ShearY>) {
          return {{"kind", "shear_y"}, {"max_factor", s.max_factor}};
        } else if constexpr (std::is_same_v<T, Posterize>) {
          return {{"kind", "posterize"}, {"min_bits", s.min_bits}};
        } else if constexpr (std::is_same_v<T, Solarize>) {
          return {{"kind", "solarize"}, {"threshold", s.threshold}};
        } else if constexpr (std::is_same_v<T, Autocontrast>) {
          return {{"kind", "autocontrast"}};
        } else {
          return {{"kind", "equalize"}};
        }
      },
      spec);
}

inline TransformSpec transform_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "pad_random_crop") {
      return PadRandomCrop{j.value("pad", 4)};
    } else if (kind == "horizontal_flip") {
      return HorizontalFlip{j.value("p", 0.5)};
    } else if (kind == "normalize") {
      Normalize n;
      n.mean = j.at("mean").get<std::vector<float>>();
      n.std = j.at("std").get<std::vector<float>>();
      return n;
    } else if (kind == "center_crop") {
      return CenterCrop{j.at("size").get<int>()};
    } else if (kind == "rotate") {
      return Rotate{j.value("max_degrees", 30.0)};
    } else if (kind == "translate_x") {
      return TranslateX{j.value("max_fraction", 1.0 / 3.0)};
    } else if (kind == "translate_y") {
      return TranslateY{j.value("max_fraction", 1.0 / 3.0)};
    } else if (kind == "shear_x") {
      return ShearX{j.value("max_factor", 0.3)};
    } else if (kind == "shear_y") {
      return ShearY{j.value("max_factor", 0.3)};
    } else if (kind == "posterize") {
      return Posterize{j.value("min_bits", 4)};
    } else if (kind == "solarize") {
      return Solarize{j.value("threshold", 0.5)};
    } else if (kind == "autocontrast") {
      return Autocontrast{};
    } else if (kind == "equalize") {
      return Equalize{};
    }
    throw ConfigError("unknown transform kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad transform record: ") + e.what());
  }
}

inline json chain_to_json(const TransformChain& chain) {
  json arr = json::array();
  for (const auto& spec : chain.specs()) arr.push_back(transform_to_json(spec));
  return arr;
}

inline TransformChain chain_from_json(const json& j) {
  std::vector<TransformSpec> specs;
  for (const auto& item : j) specs.push_back(transform_from_json(item));
  return TransformChain(std::move(specs));
}

inline json stage_to_json(const MixerStage& stage) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StackMixStage>) {
          json j = {{"kind", "stackmix"}, {"k", s.k}, {"axis", axis_to_string(s.axis)}};
          if (s.same_image) j["same"] = true;
          return j;
        } else if constexpr (std::is_same_v<T, MixUpStage>) {
          return {{"kind", "mixup"}, {"alpha", s.alpha}, {"k", s.k}};
        } else if constexpr (std::is_same_v<T, CutMixStage>) {
          json j = {{"kind", "cutmix"}, {"alpha", s.alpha}, {"k", s.k}};
          if (s.box_scale > 0.0) j["box_scale"] = s.box_scale;
          return j;
        } else {
          return {{"kind", "augmix"}, {"alpha", s.alpha}, {"width", s.width},
                  {"max_depth", s.max_depth}};
        }
      },
      stage);
}

inline MixerStage stage_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "stackmix") {
      StackMixStage s;
      s.k = j.value("k", 2);
      s.axis = axis_from_string(j.value("axis", std::string("height")));
      s.same_image = j.value("same", false);
      return s;
    } else if (kind == "mixup") {
      MixUpStage s;
      s.alpha = j.value("alpha", 1.0);
      s.k = j.value("k", 2);
      return s;
    } else if (kind == "cutmix") {
      CutMixStage s;
      s.alpha = j.value("alpha", 1.0);
      s.k = j.value("k", 2);
      s.box_scale = j.value("box_scale", 0.0);
      return s;
    } else if (kind == "augmix") {
      AugMixStage s;
      s.alpha = j.value("alpha", 1.0);
      s.width = j.value("width", 3);
      s.max_depth = j.value("max_depth", 3);
      return s;
    }
    throw ConfigError("unknown mixer stage kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad mixer stage record: ") + e.what());
  }
}

inline json pipeline_to_json(const PipelineSpec& spec) {
  json stages = json::array();
  for (const auto& s : spec.stages) stages.push_back(stage_to_json(s));
  return {{"base", chain_to_json(spec.base)}, {"stages", stages}};
}

inline PipelineSpec pipeline_from_json(const json& j) {
  PipelineSpec spec;
  if (j.contains("base")) spec.base = chain_from_json(j.at("base"));
  if (j.contains("stages")) {
    for (const auto& item : j.at("stages")) {
      // "none" is accepted as an explicit no-op stage marker
      if (item.is_string() && item.get<std::string>() == "none") continue;
      if (item.is_object() && item.value("kind", "") == "none") continue;
      spec.stages.push_back(stage_from_json(item));
    }
  }
  validate(spec);
  return spec;
}

/// FNV-1a over the canonical (sorted-key) JSON serialization. Any change to
/// the pipeline spec changes this hash.
inline std::uint64_t spec_hash(const PipelineSpec& spec) {
  const std::string s = pipeline_to_json(spec).dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace mixforge
