#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixforge/errors.hpp"

namespace mixforge {

/// Value-range bookkeeping for image tensors. Unit images live in [0, 1];
/// normalized images have had per-channel mean/std applied and are unbounded.
enum class RangeTag { unit, normalized };

enum class Axis { height, width, channel };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::height: return "height";
    case Axis::width: return "width";
    default: return "channel";
  }
}

/// Dense H x W x C float image, row-major, channels interleaved.
/// Immutable after construction; all pipeline operations return new images.
class Image {
 public:
  Image() = default;

  Image(int height, int width, int channels, std::vector<float> data,
        RangeTag tag = RangeTag::unit)
      : height_(height), width_(width), channels_(channels),
        tag_(tag), data_(std::move(data)) {
    if (height_ < 1 || width_ < 1 || (channels_ != 1 && channels_ != 3)) {
      throw ShapeError("image dims must be HxWxC with C in {1,3}, got " + shape_string());
    }
    if (data_.size() != static_cast<std::size_t>(height_) * width_ * channels_) {
      throw ShapeError("image data length " + std::to_string(data_.size()) +
                       " does not match " + shape_string());
    }
    for (float v : data_) {
      if (!std::isfinite(v)) throw NumericsError("non-finite pixel value");
      if (tag_ == RangeTag::unit && (v < 0.0f || v > 1.0f)) {
        throw RangeTagError("unit-range image has pixel " + std::to_string(v));
      }
    }
  }

  static Image constant(int height, int width, int channels, float value,
                        RangeTag tag = RangeTag::unit) {
    return Image(height, width, channels,
                 std::vector<float>(static_cast<std::size_t>(height) * width * channels, value),
                 tag);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  RangeTag range_tag() const noexcept { return tag_; }
  std::size_t size() const noexcept { return data_.size(); }

  float at(int y, int x, int c) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_);
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  RangeTag tag_ = RangeTag::unit;
  std::vector<float> data_;
};

/// Probability vector over classes. Entries are nonnegative and sum to one
/// within 1e-6; both one-hot and mixed labels use this single representation.
/// Stored in 64-bit floats so loss gradients check out tightly.
class LabelVector {
 public:
  LabelVector() = default;

  explicit LabelVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw EmptyInputError("label vector must be nonempty");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0)) throw WeightError("label entry " + std::to_string(p) + " is negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw WeightError("label entries sum to " + std::to_string(sum));
    }
  }

  static LabelVector one_hot(int cls, int n_classes) {
    if (cls < 0 || cls >= n_classes) {
      throw ShapeError("class " + std::to_string(cls) + " out of range for n=" +
                       std::to_string(n_classes));
    }
    std::vector<double> p(static_cast<std::size_t>(n_classes), 0.0);
    p[static_cast<std::size_t>(cls)] = 1.0;
    return LabelVector(std::move(p));
  }

  int n_classes() const noexcept { return static_cast<int>(probs_.size()); }
  double operator[](int c) const noexcept { return probs_[static_cast<std::size_t>(c)]; }
  std::span<const double> data() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

/// One pipeline output: an image, its (possibly mixed) label, and the dataset
/// indices that contributed pixels to it, duplicates preserved.
struct Sample {
  Image image;
  LabelVector label;
  std::vector<std::int64_t> source_indices;
};

inline void validate(const Sample& s) {
  if (s.source_indices.empty()) throw EmptyInputError("sample has no source indices");
}

/// Fixed-shape collection of samples.
class Batch {
 public:
  Batch() = default;

  explicit Batch(std::vector<Sample> samples) : samples_(std::move(samples)) {
    for (const auto& s : samples_) {
      validate(s);
      if (!s.image.same_shape(samples_.front().image) ||
          s.label.n_classes() != samples_.front().label.n_classes()) {
        throw ShapeError("batch samples must share image shape and n_classes");
      }
    }
  }

  std::size_t size() const noexcept { return samples_.size(); }
  const Sample& operator[](std::size_t i) const noexcept { return samples_[i]; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }

 private:
  std::vector<Sample> samples_;
};

/// Concatenates images along `axis`. Input j occupies block j of the output
/// in order. Dimensions off the concat axis must match (so the operation is
/// associative: concat(concat(a,b),c) equals concat([a,b,c]) bitwise); the
/// output dimension along the axis is the sum of the inputs'.
inline Image concat_images(std::span<const Image> images, Axis axis) {
  if (images.empty()) throw EmptyInputError("concat_images: empty image list");
  const Image& first = images.front();
  for (const auto& img : images) {
    const bool ok = (axis == Axis::height || img.height() == first.height()) &&
                    (axis == Axis::width || img.width() == first.width()) &&
                    (axis == Axis::channel || img.channels() == first.channels());
    if (!ok) {
      throw ShapeError("concat_images: shape mismatch " + img.shape_string() +
                       " vs " + first.shape_string() + " along axis " + to_string(axis));
    }
    if (img.range_tag() != first.range_tag()) {
      throw RangeTagError("concat_images: mixed range tags");
    }
  }

  std::size_t total = 0;
  for (const auto& img : images) total += img.size();

  if (axis == Axis::height) {
    // Row-major layout makes vertical stacking a plain buffer concatenation.
    std::vector<float> out;
    out.reserve(total);
    int h = 0;
    for (const auto& img : images) {
      out.insert(out.end(), img.data().begin(), img.data().end());
      h += img.height();
    }
    return Image(h, first.width(), first.channels(), std::move(out), first.range_tag());
  }

  if (axis == Axis::width) {
    int w = 0;
    for (const auto& img : images) w += img.width();
    const int h = first.height(), c = first.channels();
    std::vector<float> out(total);
    const std::size_t out_row = static_cast<std::size_t>(w) * c;
    for (int y = 0; y < h; ++y) {
      std::size_t xoff = 0;
      for (const auto& img : images) {
        const std::size_t row = static_cast<std::size_t>(img.width()) * c;
        const float* src = img.data().data() + static_cast<std::size_t>(y) * row;
        std::copy(src, src + row, out.data() + static_cast<std::size_t>(y) * out_row + xoff);
        xoff += row;
      }
    }
    return Image(h, w, c, std::move(out), first.range_tag());
  }

  int c = 0;
  for (const auto& img : images) c += img.channels();
  if (c != 1 && c != 3) {
    throw ShapeError("concat_images: channel concat would give " + std::to_string(c) +
                     " channels");
  }
  const int h = first.height(), w = first.width();
  std::vector<float> out(total);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t o = (static_cast<std::size_t>(y) * w + x) * c;
      for (const auto& img : images) {
        for (int ch = 0; ch < img.channels(); ++ch) out[o++] = img.at(y, x, ch);
      }
    }
  }
  return Image(h, w, c, std::move(out), first.range_tag());
}

/// Elementwise weighted sum of label vectors: out[c] = sum_j w[j] * labels[j][c].
/// Weights must be nonnegative and sum to one within 1e-9.
inline LabelVector mix_labels(std::span<const LabelVector> labels,
                              std::span<const double> weights) {
  if (labels.empty()) throw EmptyInputError("mix_labels: empty label list");
  if (labels.size() != weights.size()) {
    throw ShapeError("mix_labels: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(weights.size()) + " weights");
  }
  const int n = labels.front().n_classes();
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw WeightError("mix_labels: negative weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw WeightError("mix_labels: weights sum to " + std::to_string(wsum));
  }

  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j].n_classes() != n) throw ShapeError("mix_labels: label length mismatch");
    for (int c = 0; c < n; ++c) {
      out[static_cast<std::size_t>(c)] += weights[j] * labels[j][c];
    }
  }
  return LabelVector(std::move(out));
}

}  // namespace mixforge
