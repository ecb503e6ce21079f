#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/rng.hpp"

namespace mixforge {

// Per-image stochastic transformations. Each op documents how many raw
// 64-bit draws it consumes; apply_chain consumes draws strictly left to
// right, which is what makes replay and the draw-count ledger possible.

struct PadRandomCrop { int pad = 4; };                      // 2 draws
struct HorizontalFlip { double p = 0.5; };                  // 1 draw
struct Normalize {                                          // 0 draws
  std::vector<float> mean;
  std::vector<float> std;
};
struct CenterCrop { int size = 0; };                        // 0 draws
struct Rotate { double max_degrees = 30.0; };               // 1 draw
struct TranslateX { double max_fraction = 1.0 / 3.0; };     // 1 draw
struct TranslateY { double max_fraction = 1.0 / 3.0; };     // 1 draw
struct ShearX { double max_factor = 0.3; };                 // 1 draw
struct ShearY { double max_factor = 0.3; };                 // 1 draw
struct Posterize { int min_bits = 4; };                     // 1 draw
struct Solarize { double threshold = 0.5; };                // 0 draws
struct Autocontrast {};                                     // 0 draws
struct Equalize {};                                         // 0 draws

using TransformSpec =
    std::variant<PadRandomCrop, HorizontalFlip, Normalize, CenterCrop, Rotate,
                 TranslateX, TranslateY, ShearX, ShearY, Posterize, Solarize,
                 Autocontrast, Equalize>;

inline void validate(const TransformSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PadRandomCrop>) {
          if (s.pad < 0) throw ConfigError("pad_random_crop: pad must be >= 0");
        } else if constexpr (std::is_same_v<T, HorizontalFlip>) {
          if (s.p < 0.0 || s.p > 1.0) throw ConfigError("horizontal_flip: p must be in [0,1]");
        } else if constexpr (std::is_same_v<T, Normalize>) {
          if (s.mean.empty() || s.mean.size() != s.std.size()) {
            throw ConfigError("normalize: mean/std must be nonempty and equal length");
          }
          for (float v : s.std) {
            if (!(v > 0.0f)) throw ConfigError("normalize: std entries must be > 0");
          }
        } else if constexpr (std::is_same_v<T, CenterCrop>) {
          if (s.size < 1) throw ConfigError("center_crop: size must be >= 1");
        } else if constexpr (std::is_same_v<T, Rotate>) {
          if (s.max_degrees < 0.0) throw ConfigError("rotate: max_degrees must be >= 0");
        } else if constexpr (std::is_same_v<T, TranslateX>) {
          if (s.max_fraction < 0.0 || s.max_fraction > 1.0) {
            throw ConfigError("translate_x: max_fraction must be in [0,1]");
          }
        } else if constexpr (std::is_same_v<T, TranslateY>) {
          if (s.max_fraction < 0.0 || s.max_fraction > 1.0) {
            throw ConfigError("translate_y: max_fraction must be in [0,1]");
          }
        } else if constexpr (std::is_same_v<T, ShearX>) {
          if (s.max_factor < 0.0) throw ConfigError("shear_x: max_factor must be >= 0");
        } else if constexpr (std::is_same_v<T, ShearY>) {
          if (s.max_factor < 0.0) throw ConfigError("shear_y: max_factor must be >= 0");
        } else if constexpr (std::is_same_v<T, Posterize>) {
          if (s.min_bits < 1 || s.min_bits > 8) throw ConfigError("posterize: min_bits must be in [1,8]");
        } else if constexpr (std::is_same_v<T, Solarize>) {
          if (s.threshold < 0.0 || s.threshold > 1.0) throw ConfigError("solarize: threshold must be in [0,1]");
        }
      },
      spec);
}

/// Documented number of raw 64-bit draws each op consumes.
inline int draw_count(const TransformSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PadRandomCrop>) return 2;
        else if constexpr (std::is_same_v<T, HorizontalFlip>) return 1;
        else if constexpr (std::is_same_v<T, Rotate>) return 1;
        else if constexpr (std::is_same_v<T, TranslateX>) return 1;
        else if constexpr (std::is_same_v<T, TranslateY>) return 1;
        else if constexpr (std::is_same_v<T, ShearX>) return 1;
        else if constexpr (std::is_same_v<T, ShearY>) return 1;
        else if constexpr (std::is_same_v<T, Posterize>) return 1;
        else return 0;
      },
      spec);
}

/// Ordered transform list. Normalize, if present, must come last: it flips
/// the range tag, and every photometric op needs unit-range input.
class TransformChain {
 public:
  TransformChain() = default;

  TransformChain(std::initializer_list<TransformSpec> specs)
      : TransformChain(std::vector<TransformSpec>(specs)) {}

  explicit TransformChain(std::vector<TransformSpec> specs) : specs_(std::move(specs)) {
    int normalize_count = 0;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      validate(specs_[i]);
      if (std::holds_alternative<Normalize>(specs_[i])) {
        ++normalize_count;
        if (i + 1 != specs_.size()) {
          throw ConfigError("normalize must be the last transform in a chain");
        }
      }
    }
    if (normalize_count > 1) throw ConfigError("normalize may appear at most once");
  }

  const std::vector<TransformSpec>& specs() const noexcept { return specs_; }
  bool empty() const noexcept { return specs_.empty(); }
  bool has_normalize() const noexcept {
    return !specs_.empty() && std::holds_alternative<Normalize>(specs_.back());
  }

  /// Total documented draws a single application consumes.
  int total_draw_count() const {
    int n = 0;
    for (const auto& s : specs_) n += draw_count(s);
    return n;
  }

 private:
  std::vector<TransformSpec> specs_;
};

namespace detail {

inline float clamp_unit(float v) { return std::clamp(v, 0.0f, 1.0f); }

inline int to_byte(float v) {
  return std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255);
}

/// Bilinear lookup with zero fill outside the image.
inline float bilinear_zero(const Image& img, double y, double x, int c) {
  const double yf = std::floor(y), xf = std::floor(x);
  const int y0 = static_cast<int>(yf), x0 = static_cast<int>(xf);
  const double wy = y - yf, wx = x - xf;
  auto px = [&](int yy, int xx) -> double {
    if (yy < 0 || yy >= img.height() || xx < 0 || xx >= img.width()) return 0.0;
    return img.at(yy, xx, c);
  };
  const double v = (1.0 - wy) * ((1.0 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
                   wy * ((1.0 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1));
  return static_cast<float>(v);
}

/// Applies the inverse affine map (y,x) -> (src_y, src_x) with bilinear
/// sampling and zero fill. Used by rotate/translate/shear.
template <typename MapFn>
Image warp(const Image& img, MapFn&& map) {
  std::vector<float> out(img.size());
  const bool unit = img.range_tag() == RangeTag::unit;
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto [sy, sx] = map(y, x);
      for (int c = 0; c < img.channels(); ++c) {
        float v = bilinear_zero(img, sy, sx, c);
        out[i++] = unit ? clamp_unit(v) : v;
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), img.range_tag());
}

inline void require_unit(const Image& img, const char* op) {
  if (img.range_tag() != RangeTag::unit) {
    throw RangeTagError(std::string(op) + " requires a unit-range image");
  }
}

inline Image pad_random_crop(const Image& img, const PadRandomCrop& s, RngStream& rng) {
  const int pad = s.pad;
  const int dy = static_cast<int>(rng.uniform_int(2 * pad + 1));
  const int dx = static_cast<int>(rng.uniform_int(2 * pad + 1));
  if (pad == 0) return img;
  std::vector<float> out(img.size());
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int sy = y + dy - pad;  // coordinates in the original image
      const int sx = x + dx - pad;
      const bool inside = sy >= 0 && sy < img.height() && sx >= 0 && sx < img.width();
      for (int c = 0; c < img.channels(); ++c) {
        out[i++] = inside ? img.at(sy, sx, c) : 0.0f;
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), img.range_tag());
}

inline Image hflip(const Image& img) {
  std::vector<float> out(img.size());
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out[i++] = img.at(y, img.width() - 1 - x, c);
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), img.range_tag());
}

inline Image normalize(const Image& img, const Normalize& s) {
  if (img.range_tag() != RangeTag::unit) {
    throw RangeTagError("normalize requires a unit-range image (already normalized?)");
  }
  const auto nc = static_cast<std::size_t>(img.channels());
  if (s.mean.size() != nc && s.mean.size() != 1) {
    throw ShapeError("normalize: mean/std length must be 1 or match channels");
  }
  std::vector<float> out(img.size());
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const std::size_t j = s.mean.size() == 1 ? 0 : static_cast<std::size_t>(c);
        out[i++] = (img.at(y, x, c) - s.mean[j]) / s.std[j];
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::normalized);
}

inline Image center_crop(const Image& img, const CenterCrop& s) {
  if (s.size > img.height() || s.size > img.width()) {
    throw ShapeError("center_crop: size " + std::to_string(s.size) +
                     " exceeds image " + img.shape_string());
  }
  const int oy = (img.height() - s.size) / 2;
  const int ox = (img.width() - s.size) / 2;
  std::vector<float> out(static_cast<std::size_t>(s.size) * s.size * img.channels());
  std::size_t i = 0;
  for (int y = 0; y < s.size; ++y) {
    for (int x = 0; x < s.size; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out[i++] = img.at(oy + y, ox + x, c);
      }
    }
  }
  return Image(s.size, s.size, img.channels(), std::move(out), img.range_tag());
}

inline Image posterize(const Image& img, const Posterize& s, RngStream& rng) {
  require_unit(img, "posterize");
  const int bits = s.min_bits + static_cast<int>(rng.uniform_int(8 - s.min_bits + 1));
  const int mask = (0xFF << (8 - bits)) & 0xFF;
  std::vector<float> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<float>(to_byte(img.data()[i]) & mask) / 255.0f;
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

inline Image solarize(const Image& img, const Solarize& s) {
  require_unit(img, "solarize");
  std::vector<float> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = img.data()[i];
    out[i] = v >= s.threshold ? 1.0f - v : v;
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

inline Image autocontrast(const Image& img) {
  require_unit(img, "autocontrast");
  std::vector<float> out(img.size());
  for (int c = 0; c < img.channels(); ++c) {
    float lo = 1.0f, hi = 0.0f;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        lo = std::min(lo, img.at(y, x, c));
        hi = std::max(hi, img.at(y, x, c));
      }
    }
    const float span = hi - lo;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const std::size_t i = (static_cast<std::size_t>(y) * img.width() + x) * img.channels() + c;
        out[i] = span > 0.0f ? clamp_unit((img.at(y, x, c) - lo) / span) : img.at(y, x, c);
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

/// Histogram equalization with 255-level semantics, per channel.
inline Image equalize(const Image& img) {
  require_unit(img, "equalize");
  std::vector<float> out(img.size());
  for (int c = 0; c < img.channels(); ++c) {
    std::array<int, 256> hist{};
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        ++hist[static_cast<std::size_t>(to_byte(img.at(y, x, c)))];
      }
    }
    // PIL-style LUT: spread the cumulative histogram over [0, 255].
    std::array<int, 256> lut{};
    int last_nonzero = 255;
    while (last_nonzero > 0 && hist[static_cast<std::size_t>(last_nonzero)] == 0) --last_nonzero;
    long total = 0;
    for (int v = 0; v <= last_nonzero; ++v) total += hist[static_cast<std::size_t>(v)];
    const long step = (total - hist[static_cast<std::size_t>(last_nonzero)]) / 255;
    if (step == 0) {
      for (int v = 0; v < 256; ++v) lut[static_cast<std::size_t>(v)] = v;
    } else {
      long n = step / 2;
      for (int v = 0; v < 256; ++v) {
        lut[static_cast<std::size_t>(v)] = static_cast<int>(std::clamp(n / step, 0L, 255L));
        n += hist[static_cast<std::size_t>(v)];
      }
    }
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const std::size_t i = (static_cast<std::size_t>(y) * img.width() + x) * img.channels() + c;
        out[i] = static_cast<float>(lut[static_cast<std::size_t>(to_byte(img.at(y, x, c)))]) / 255.0f;
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

}  // namespace detail

/// Applies one transform. Deterministic given the stream; each op consumes
/// exactly draw_count(spec) raw draws in documented order.
inline Image apply_transform(const Image& img, const TransformSpec& spec, RngStream& rng) {
  validate(spec);
  return std::visit(
      [&](const auto& s) -> Image {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PadRandomCrop>) {
          return detail::pad_random_crop(img, s, rng);
        } else if constexpr (std::is_same_v<T, HorizontalFlip>) {
          const double u = rng.next_double();
          return u < s.p ? detail::hflip(img) : img;
        } else if constexpr (std::is_same_v<T, Normalize>) {
          return detail::normalize(img, s);
        } else if constexpr (std::is_same_v<T, CenterCrop>) {
          return detail::center_crop(img, s);
        } else if constexpr (std::is_same_v<T, Rotate>) {
          const double theta = rng.uniform(-s.max_degrees, s.max_degrees) *
                               std::numbers::pi / 180.0;
          const double cy = (img.height() - 1) / 2.0, cx = (img.width() - 1) / 2.0;
          const double cs = std::cos(theta), sn = std::sin(theta);
          return detail::warp(img, [=](int y, int x) {
            const double dy = y - cy, dx = x - cx;
            return std::pair{cy + cs * dy - sn * dx, cx + sn * dy + cs * dx};
          });
        } else if constexpr (std::is_same_v<T, TranslateX>) {
          const double dx = rng.uniform(-s.max_fraction * img.width(),
                                        s.max_fraction * img.width());
          return detail::warp(img, [=](int y, int x) {
            return std::pair{static_cast<double>(y), x - dx};
          });
        } else if constexpr (std::is_same_v<T, TranslateY>) {
          const double dy = rng.uniform(-s.max_fraction * img.height(),
                                        s.max_fraction * img.height());
          return detail::warp(img, [=](int y, int x) {
            return std::pair{y - dy, static_cast<double>(x)};
          });
        } else if constexpr (std::is_same_v<T, ShearX>) {
          const double sh = rng.uniform(-s.max_factor, s.max_factor);
          const double cy = (img.height() - 1) / 2.0;
          return detail::warp(img, [=](int y, int x) {
            return std::pair{static_cast<double>(y), x + sh * (y - cy)};
          });
        } else if constexpr (std::is_same_v<T, ShearY>) {
          const double sh = rng.uniform(-s.max_factor, s.max_factor);
          const double cx = (img.width() - 1) / 2.0;
          return detail::warp(img, [=](int y, int x) {
            return std::pair{y + sh * (x - cx), static_cast<double>(x)};
          });
        } else if constexpr (std::is_same_v<T, Posterize>) {
          return detail::posterize(img, s, rng);
        } else if constexpr (std::is_same_v<T, Solarize>) {
          return detail::solarize(img, s);
        } else if constexpr (std::is_same_v<T, Autocontrast>) {
          return detail::autocontrast(img);
        } else {
          return detail::equalize(img);
        }
      },
      spec);
}

/// Left-to-right application of a whole chain on one image.
inline Image apply_chain(const Image& img, const TransformChain& chain, RngStream& rng) {
  Image out = img;
  for (const auto& spec : chain.specs()) {
    out = apply_transform(out, spec, rng);
  }
  return out;
}

/// Deterministic horizontal flip, used by test-time augmentation.
inline Image horizontal_flip_image(const Image& img) { return detail::hflip(img); }

/// The deterministic tail of a training chain (center_crop and normalize, in
/// order): what test images must pass through so they match the inputs the
/// model was trained on. Stochastic ops are dropped.
inline TransformChain eval_chain_of(const TransformChain& base) {
  std::vector<TransformSpec> specs;
  for (const auto& spec : base.specs()) {
    if (std::holds_alternative<CenterCrop>(spec) || std::holds_alternative<Normalize>(spec)) {
      specs.push_back(spec);
    }
  }
  return TransformChain(std::move(specs));
}

// The AugMix primitive family: ops that do not overlap the corruption
// benchmark's test-time distortions.
enum class AugmixOp : std::uint8_t {
  rotate,
  translate_x,
  translate_y,
  shear_x,
  shear_y,
  posterize,
  solarize,
  autocontrast,
  equalize,
};

inline constexpr std::array<AugmixOp, 9> kAugmixDefaultOps = {
    AugmixOp::rotate,      AugmixOp::translate_x, AugmixOp::translate_y,
    AugmixOp::shear_x,     AugmixOp::shear_y,     AugmixOp::posterize,
    AugmixOp::solarize,    AugmixOp::autocontrast, AugmixOp::equalize,
};

/// Maps an intensity level in [0,1] onto each op's conventional maximum
/// (30 degrees rotation, 1/3 translation, 0.3 shear, 4 posterize bits).
inline TransformSpec make_augmix_op(AugmixOp op, double level) {
  level = std::clamp(level, 0.0, 1.0);
  switch (op) {
    case AugmixOp::rotate: return Rotate{level * 30.0};
    case AugmixOp::translate_x: return TranslateX{level / 3.0};
    case AugmixOp::translate_y: return TranslateY{level / 3.0};
    case AugmixOp::shear_x: return ShearX{level * 0.3};
    case AugmixOp::shear_y: return ShearY{level * 0.3};
    case AugmixOp::posterize:
      return Posterize{8 - static_cast<int>(std::lround(level * 4.0))};
    case AugmixOp::solarize: return Solarize{1.0 - level};
    case AugmixOp::autocontrast: return Autocontrast{};
    default: return Equalize{};
  }
}

}  // namespace mixforge
