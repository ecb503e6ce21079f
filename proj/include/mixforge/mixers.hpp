#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/data.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/parallel.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/transforms.hpp"

namespace mixforge {

// Multi-sample combination operators and the A->B composition machinery.
//
// A pipeline is: base transform chain per raw image, then mixer stages left
// to right. Each stage consumes groups of `arity` samples from the previous
// stage, so a terminal stackmix(k) fed by a pairwise mixer consumes 2k raw
// images in total.

/// Stacks k images into one input and averages their labels.
struct StackMixStage {
  int k = 2;
  Axis axis = Axis::height;
  // Control variant: all k inputs are the same raw image, each transformed
  // independently; the mixed label is then the original one-hot.
  bool same_image = false;
};

struct MixUpStage {
  double alpha = 1.0;
  int k = 2;
};

struct CutMixStage {
  double alpha = 1.0;
  int k = 2;
  // Shrink factor for the sampled box area; <= 0 selects the default rule
  // (1 for k <= 2, 2/k above, so higher k leaves room for every paste).
  double box_scale = 0.0;
};

struct AugMixStage {
  double alpha = 1.0;
  int width = 3;
  int max_depth = 3;
};

using MixerStage = std::variant<StackMixStage, MixUpStage, CutMixStage, AugMixStage>;

/// How many inputs one application of the stage consumes.
inline int stage_arity(const MixerStage& stage) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AugMixStage>) return 1;
        else return s.k;
      },
      stage);
}

inline double resolved_box_scale(const CutMixStage& s) {
  if (s.box_scale > 0.0) return s.box_scale;
  return s.k <= 2 ? 1.0 : 2.0 / static_cast<double>(s.k);
}

/// Declarative description of a composed augmentation chain.
struct PipelineSpec {
  TransformChain base;
  std::vector<MixerStage> stages;
};

inline void validate(const PipelineSpec& spec) {
  int stackmix_count = 0;
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, StackMixStage>) {
            ++stackmix_count;
            if (s.k < 1) throw ConfigError("stackmix: k must be >= 1");
            if (i + 1 != spec.stages.size()) {
              throw ConfigError("stackmix must be the last stage (it changes input shape)");
            }
            if (s.same_image && spec.stages.size() != 1) {
              throw ConfigError("stackmix(same) is only defined as the sole stage");
            }
          } else if constexpr (std::is_same_v<T, MixUpStage>) {
            if (s.alpha <= 0.0) throw ConfigError("mixup: alpha must be > 0");
            if (s.k < 2) throw ConfigError("mixup: k must be >= 2");
          } else if constexpr (std::is_same_v<T, CutMixStage>) {
            if (s.alpha <= 0.0) throw ConfigError("cutmix: alpha must be > 0");
            if (s.k < 2) throw ConfigError("cutmix: k must be >= 2");
            if (s.box_scale > 1.0) throw ConfigError("cutmix: box_scale must be in (0,1]");
          } else {
            if (s.alpha <= 0.0) throw ConfigError("augmix: alpha must be > 0");
            if (s.width < 1 || s.max_depth < 1) {
              throw ConfigError("augmix: width and max_depth must be >= 1");
            }
            if (spec.base.has_normalize()) {
              throw ConfigError("augmix stage needs unit-range inputs; "
                                "drop normalize from the base chain");
            }
          }
        },
        spec.stages[i]);
  }
  if (stackmix_count > 1) throw ConfigError("at most one stackmix stage");
}

/// Raw dataset images consumed per composed sample: the product of stage
/// arities (one when there are no stages).
inline std::size_t raw_images_needed(const PipelineSpec& spec) {
  std::size_t n = 1;
  for (const auto& stage : spec.stages) {
    n *= static_cast<std::size_t>(stage_arity(stage));
  }
  return n;
}

/// The terminal stackmix stage, if the pipeline has one.
inline std::optional<StackMixStage> terminal_stackmix(const PipelineSpec& spec) {
  if (!spec.stages.empty()) {
    if (const auto* s = std::get_if<StackMixStage>(&spec.stages.back())) return *s;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// StackMix

/// Concatenates the samples' images along `axis` and averages their labels
/// with uniform weights 1/k. k = 1 reproduces the input sample unchanged.
inline Sample stackmix(std::span<const Sample> samples, Axis axis) {
  if (samples.empty()) throw EmptyInputError("stackmix: no samples");
  const auto k = samples.size();

  std::vector<Image> images;
  std::vector<LabelVector> labels;
  std::vector<std::int64_t> sources;
  images.reserve(k);
  labels.reserve(k);
  for (const auto& s : samples) {
    images.push_back(s.image);
    labels.push_back(s.label);
    sources.insert(sources.end(), s.source_indices.begin(), s.source_indices.end());
  }
  const std::vector<double> weights(k, 1.0 / static_cast<double>(k));
  return Sample{concat_images(images, axis), mix_labels(labels, weights), std::move(sources)};
}

// ---------------------------------------------------------------------------
// MixUp

/// Convex combination with a fixed coefficient: lambda * a + (1-lambda) * b.
inline Sample mixup_with_lambda(const Sample& a, const Sample& b, double lambda) {
  if (!a.image.same_shape(b.image)) throw ShapeError("mixup: image shape mismatch");
  if (a.image.range_tag() != b.image.range_tag()) {
    throw RangeTagError("mixup: mixed range tags");
  }
  const auto lf = static_cast<float>(lambda);
  const bool unit = a.image.range_tag() == RangeTag::unit;
  std::vector<float> data(a.image.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = lf * a.image.data()[i] + (1.0f - lf) * b.image.data()[i];
    data[i] = unit ? std::clamp(v, 0.0f, 1.0f) : v;
  }
  Image img(a.image.height(), a.image.width(), a.image.channels(), std::move(data),
            a.image.range_tag());

  const std::array labels = {a.label, b.label};
  const std::array weights = {lambda, 1.0 - lambda};
  std::vector<std::int64_t> sources = a.source_indices;
  sources.insert(sources.end(), b.source_indices.begin(), b.source_indices.end());
  return Sample{std::move(img), mix_labels(labels, weights), std::move(sources)};
}

/// MixUp proper: lambda ~ Beta(alpha, alpha).
inline Sample mixup(const Sample& a, const Sample& b, double alpha, RngStream& rng) {
  if (alpha <= 0.0) throw ConfigError("mixup: alpha must be > 0");
  return mixup_with_lambda(a, b, rng.beta(alpha, alpha));
}

/// k-way generalization with explicit convex weights.
inline Sample mixup_k_with_weights(std::span<const Sample> samples,
                                   std::span<const double> weights) {
  if (samples.empty()) throw EmptyInputError("mixup_k: no samples");
  if (samples.size() != weights.size()) throw ShapeError("mixup_k: weight count mismatch");
  const Image& first = samples.front().image;
  for (const auto& s : samples) {
    if (!s.image.same_shape(first)) throw ShapeError("mixup_k: image shape mismatch");
    if (s.image.range_tag() != first.range_tag()) {
      throw RangeTagError("mixup_k: mixed range tags");
    }
  }
  const bool unit = first.range_tag() == RangeTag::unit;
  std::vector<float> data(first.size(), 0.0f);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto wf = static_cast<float>(weights[j]);
    const auto src = samples[j].image.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += wf * src[i];
  }
  if (unit) {
    for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
  }
  Image img(first.height(), first.width(), first.channels(), std::move(data),
            first.range_tag());

  std::vector<LabelVector> labels;
  std::vector<std::int64_t> sources;
  labels.reserve(samples.size());
  for (const auto& s : samples) {
    labels.push_back(s.label);
    sources.insert(sources.end(), s.source_indices.begin(), s.source_indices.end());
  }
  return Sample{std::move(img), mix_labels(labels, weights), std::move(sources)};
}

/// k-way MixUp: weights ~ symmetric Dirichlet(alpha). For k = 2 the weight
/// marginal is Beta(alpha, alpha), matching pairwise MixUp in distribution.
inline Sample mixup_k(std::span<const Sample> samples, double alpha, RngStream& rng) {
  if (samples.size() < 2) throw ShapeError("mixup_k: needs k >= 2 samples");
  if (alpha <= 0.0) throw ConfigError("mixup_k: alpha must be > 0");
  const auto weights = rng.dirichlet(alpha, static_cast<int>(samples.size()));
  return mixup_k_with_weights(samples, weights);
}

// ---------------------------------------------------------------------------
// CutMix

/// Half-open paste region [y0,y1) x [x0,x1), already clipped to the image.
struct CutBox {
  int y0 = 0, x0 = 0, y1 = 0, x1 = 0;

  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
  }
};

/// Samples a box with target area (1-lambda) * box_scale * H * W,
/// square-root aspect, uniform center, clipped to the borders.
inline CutBox sample_cut_box(int height, int width, double alpha, double box_scale,
                             RngStream& rng) {
  if (alpha <= 0.0) throw ConfigError("cutmix: alpha must be > 0");
  if (box_scale <= 0.0 || box_scale > 1.0) {
    throw ConfigError("cutmix: box_scale must be in (0,1]");
  }
  const double lambda = rng.beta(alpha, alpha);
  const double cut_frac = std::sqrt((1.0 - lambda) * box_scale);
  const int bh = static_cast<int>(std::lround(height * cut_frac));
  const int bw = static_cast<int>(std::lround(width * cut_frac));
  const int cy = static_cast<int>(rng.uniform_int(height));
  const int cx = static_cast<int>(rng.uniform_int(width));
  CutBox box;
  box.y0 = std::clamp(cy - bh / 2, 0, height);
  box.y1 = std::clamp(cy - bh / 2 + bh, 0, height);
  box.x0 = std::clamp(cx - bw / 2, 0, width);
  box.x1 = std::clamp(cx - bw / 2 + bw, 0, width);
  return box;
}

/// Pastes b's box region onto a. The label weight of each side is exactly
/// its surviving-pixel fraction, recomputed from the clipped box.
inline Sample cutmix_with_box(const Sample& a, const Sample& b, const CutBox& box) {
  if (!a.image.same_shape(b.image)) throw ShapeError("cutmix: image shape mismatch");
  if (a.image.range_tag() != b.image.range_tag()) {
    throw RangeTagError("cutmix: mixed range tags");
  }
  const Image& ia = a.image;
  std::vector<float> data(ia.data().begin(), ia.data().end());
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      for (int c = 0; c < ia.channels(); ++c) {
        data[(static_cast<std::size_t>(y) * ia.width() + x) * ia.channels() + static_cast<std::size_t>(c)] =
            b.image.at(y, x, c);
      }
    }
  }
  Image img(ia.height(), ia.width(), ia.channels(), std::move(data), ia.range_tag());

  const double total = static_cast<double>(ia.height()) * ia.width();
  const double lambda_eff = 1.0 - static_cast<double>(box.area()) / total;
  const std::array labels = {a.label, b.label};
  const std::array weights = {lambda_eff, 1.0 - lambda_eff};
  std::vector<std::int64_t> sources = a.source_indices;
  sources.insert(sources.end(), b.source_indices.begin(), b.source_indices.end());
  return Sample{std::move(img), mix_labels(labels, weights), std::move(sources)};
}

inline Sample cutmix(const Sample& a, const Sample& b, double alpha, double box_scale,
                     RngStream& rng) {
  const CutBox box = sample_cut_box(a.image.height(), a.image.width(), alpha, box_scale, rng);
  return cutmix_with_box(a, b, box);
}

/// k-way CutMix: samples 1..k-1 are pasted sequentially onto sample 0, and
/// label weights are recomputed from surviving-pixel provenance, so later
/// boxes correctly steal weight from earlier ones.
inline Sample cutmix_k(std::span<const Sample> samples, double alpha, double box_scale,
                       RngStream& rng) {
  if (samples.size() < 2) throw ShapeError("cutmix_k: needs k >= 2 samples");
  const Image& first = samples.front().image;
  for (const auto& s : samples) {
    if (!s.image.same_shape(first)) throw ShapeError("cutmix_k: image shape mismatch");
    if (s.image.range_tag() != first.range_tag()) {
      throw RangeTagError("cutmix_k: mixed range tags");
    }
  }

  std::vector<float> data(first.data().begin(), first.data().end());
  std::vector<std::size_t> owner(static_cast<std::size_t>(first.height()) * first.width(), 0);
  for (std::size_t j = 1; j < samples.size(); ++j) {
    const CutBox box =
        sample_cut_box(first.height(), first.width(), alpha, box_scale, rng);
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) {
        owner[static_cast<std::size_t>(y) * first.width() + x] = j;
        for (int c = 0; c < first.channels(); ++c) {
          data[(static_cast<std::size_t>(y) * first.width() + x) * first.channels() + static_cast<std::size_t>(c)] =
              samples[j].image.at(y, x, c);
        }
      }
    }
  }
  Image img(first.height(), first.width(), first.channels(), std::move(data),
            first.range_tag());

  std::vector<double> weights(samples.size(), 0.0);
  for (std::size_t o : owner) weights[o] += 1.0;
  const double total = static_cast<double>(owner.size());
  for (auto& w : weights) w /= total;

  std::vector<LabelVector> labels;
  std::vector<std::int64_t> sources;
  labels.reserve(samples.size());
  for (const auto& s : samples) {
    labels.push_back(s.label);
    sources.insert(sources.end(), s.source_indices.begin(), s.source_indices.end());
  }
  return Sample{std::move(img), mix_labels(labels, weights), std::move(sources)};
}

// ---------------------------------------------------------------------------
// AugMix

/// skip_weight * original + (1 - skip_weight) * sum_i w_i * chain_i.
/// Accumulated in double, clamped back to unit range.
inline Image augmix_blend(const Image& original, std::span<const Image> chain_outputs,
                          double skip_weight, std::span<const double> chain_weights) {
  if (chain_outputs.size() != chain_weights.size()) {
    throw ShapeError("augmix_blend: weight count mismatch");
  }
  for (const auto& img : chain_outputs) {
    if (!img.same_shape(original)) throw ShapeError("augmix_blend: shape mismatch");
  }
  std::vector<float> data(original.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    double mixed = 0.0;
    for (std::size_t j = 0; j < chain_outputs.size(); ++j) {
      mixed += chain_weights[j] * chain_outputs[j].data()[i];
    }
    const double v = skip_weight * original.data()[i] + (1.0 - skip_weight) * mixed;
    data[i] = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
  }
  return Image(original.height(), original.width(), original.channels(), std::move(data),
               RangeTag::unit);
}

/// AugMix on one sample: `width` random chains of 1..max_depth primitives,
/// Dirichlet-mixed, plus a Beta skip connection. The single source image
/// means the label is untouched.
inline Sample augmix(const Sample& sample, const AugMixStage& params,
                     std::span<const AugmixOp> op_set, RngStream& rng) {
  if (sample.image.range_tag() != RangeTag::unit) {
    throw RangeTagError("augmix requires unit-range input");
  }
  if (op_set.empty()) throw EmptyInputError("augmix: empty op set");

  // Draw order: chain weights, skip weight, then each chain's ops.
  const auto weights = rng.dirichlet(params.alpha, params.width);
  const double skip = rng.beta(params.alpha, params.alpha);

  std::vector<Image> chains;
  chains.reserve(static_cast<std::size_t>(params.width));
  for (int i = 0; i < params.width; ++i) {
    const int depth = 1 + static_cast<int>(rng.uniform_int(params.max_depth));
    Image img = sample.image;
    for (int d = 0; d < depth; ++d) {
      const AugmixOp op = op_set[static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(op_set.size())))];
      const double level = rng.next_double();
      img = apply_transform(img, make_augmix_op(op, level), rng);
    }
    chains.push_back(std::move(img));
  }
  return Sample{augmix_blend(sample.image, chains, skip, weights), sample.label,
                sample.source_indices};
}

// ---------------------------------------------------------------------------
// Composition

/// Applies one mixer stage to a group of exactly stage_arity(stage) samples.
inline Sample apply_stage(const MixerStage& stage, std::span<const Sample> group,
                          RngStream& rng) {
  if (group.size() != static_cast<std::size_t>(stage_arity(stage))) {
    throw ShapeError("mixer stage expected " + std::to_string(stage_arity(stage)) +
                     " samples, got " + std::to_string(group.size()));
  }
  return std::visit(
      [&](const auto& s) -> Sample {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, StackMixStage>) {
          return stackmix(group, s.axis);
        } else if constexpr (std::is_same_v<T, MixUpStage>) {
          if (s.k == 2) return mixup(group[0], group[1], s.alpha, rng);
          return mixup_k(group, s.alpha, rng);
        } else if constexpr (std::is_same_v<T, CutMixStage>) {
          if (s.k == 2) return cutmix(group[0], group[1], s.alpha, resolved_box_scale(s), rng);
          return cutmix_k(group, s.alpha, resolved_box_scale(s), rng);
        } else {
          return augmix(group[0], s, kAugmixDefaultOps, rng);
        }
      },
      stage);
}

/// Runs the full composed pipeline for one output sample. Draw order is
/// fixed: base chain per raw image in index order, then stage draws in
/// stage order, so a composed run replays exactly as the equivalent manual
/// sequence of calls on the same stream.
inline Sample compose(const PipelineSpec& spec, const Dataset& dataset,
                      std::span<const std::int64_t> indices, RngStream& rng) {
  validate(spec);
  const std::size_t needed = raw_images_needed(spec);
  if (indices.size() != needed) {
    throw ShapeError("compose: pipeline consumes " + std::to_string(needed) +
                     " raw images, got " + std::to_string(indices.size()) + " indices");
  }

  std::vector<Sample> current;
  current.reserve(indices.size());
  for (std::int64_t idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= dataset.size()) {
      throw ShapeError("compose: index " + std::to_string(idx) + " out of range");
    }
    const auto i = static_cast<std::size_t>(idx);
    current.push_back(Sample{apply_chain(dataset.images[i], spec.base, rng),
                             LabelVector::one_hot(dataset.labels[i], dataset.n_classes),
                             {idx}});
  }

  for (const auto& stage : spec.stages) {
    const auto arity = static_cast<std::size_t>(stage_arity(stage));
    std::vector<Sample> next;
    next.reserve(current.size() / arity);
    for (std::size_t g = 0; g < current.size(); g += arity) {
      next.push_back(
          apply_stage(stage, std::span<const Sample>(current).subspan(g, arity), rng));
    }
    current = std::move(next);
  }
  return std::move(current.front());
}

/// Draws the raw dataset indices for one composed sample: uniform with
/// replacement, except the stackmix(same) control which draws one index and
/// repeats it.
inline std::vector<std::int64_t> draw_indices(std::size_t dataset_size,
                                              const PipelineSpec& spec, RngStream& rng) {
  const std::size_t needed = raw_images_needed(spec);
  std::vector<std::int64_t> indices(needed);
  const auto stack = terminal_stackmix(spec);
  if (stack && stack->same_image) {
    const std::int64_t idx = rng.uniform_int(static_cast<std::int64_t>(dataset_size));
    std::fill(indices.begin(), indices.end(), idx);
    return indices;
  }
  for (auto& idx : indices) {
    idx = rng.uniform_int(static_cast<std::int64_t>(dataset_size));
  }
  return indices;
}

/// Builds one deterministic batch. Every slot derives its own stream from
/// (seed, epoch, batch_index, slot), draws its raw indices, and composes,
/// so the result is identical for any worker count.
inline Batch build_batch(const Dataset& dataset, const PipelineSpec& spec, int batch_size,
                         std::uint64_t seed, std::int64_t epoch, std::int64_t batch_index) {
  if (dataset.size() == 0) throw EmptyDatasetError("build_batch: empty dataset");
  if (batch_size < 1) throw ConfigError("build_batch: batch_size must be >= 1");
  validate(spec);

  std::vector<std::optional<Sample>> slots(static_cast<std::size_t>(batch_size));
  parallel_for(slots.size(), [&](std::size_t slot) {
    RngStream rng = derive_stream(
        seed, stream_key(kStreamBatch, static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(batch_index), slot));
    const auto indices = draw_indices(dataset.size(), spec, rng);
    slots[slot] = compose(spec, dataset, indices, rng);
  });

  std::vector<Sample> samples;
  samples.reserve(slots.size());
  for (auto& s : slots) samples.push_back(std::move(*s));
  return Batch(std::move(samples));
}

}  // namespace mixforge
