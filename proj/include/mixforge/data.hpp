#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/npy.hpp"
#include "mixforge/rng.hpp"

namespace mixforge {

enum class SplitTag { train, test };

/// In-memory dataset of unit-range images with integer class labels.
/// Immutable after load.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int n_classes = 0;
  SplitTag split = SplitTag::train;

  std::size_t size() const noexcept { return images.size(); }
};

inline void validate(const Dataset& ds) {
  if (ds.images.size() != ds.labels.size()) {
    throw ShapeError("dataset images/labels length mismatch");
  }
  for (int l : ds.labels) {
    if (l < 0 || l >= ds.n_classes) {
      throw FormatError("dataset label " + std::to_string(l) + " out of range");
    }
  }
}

/// View of [begin, begin+count) as its own dataset.
inline Dataset slice(const Dataset& ds, std::size_t begin, std::size_t count) {
  if (begin + count > ds.size()) throw ShapeError("dataset slice out of range");
  Dataset out;
  out.images.assign(ds.images.begin() + static_cast<std::ptrdiff_t>(begin),
                    ds.images.begin() + static_cast<std::ptrdiff_t>(begin + count));
  out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    ds.labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
  out.n_classes = ds.n_classes;
  out.split = ds.split;
  return out;
}

// ---------------------------------------------------------------------------
// CIFAR binary format

enum class CifarVariant { cifar10, cifar100 };

/// Loads one CIFAR binary file. CIFAR-10 records are 3073 bytes
/// (label + 3072 pixels); CIFAR-100 records are 3074 bytes (coarse label,
/// fine label, 3072 pixels) and the fine label is kept. Pixels are stored
/// channel-planar R,G,B row-major and mapped to unit floats by /255.
inline Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant,
                                 SplitTag split = SplitTag::train) {
  constexpr int kSide = 32;
  constexpr std::size_t kPixels = 3 * kSide * kSide;
  const bool c100 = variant == CifarVariant::cifar100;
  const std::size_t record = c100 ? kPixels + 2 : kPixels + 1;
  const int n_classes = c100 ? 100 : 10;

  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open: " + path.string());
  const auto file_size = static_cast<std::size_t>(in.tellg());
  if (file_size == 0 || file_size % record != 0) {
    throw FormatError("file size " + std::to_string(file_size) +
                      " is not a positive multiple of record size " +
                      std::to_string(record) + ": " + path.string());
  }
  in.seekg(0);

  Dataset ds;
  ds.n_classes = n_classes;
  ds.split = split;
  const std::size_t n_records = file_size / record;
  ds.images.reserve(n_records);
  ds.labels.reserve(n_records);

  std::vector<unsigned char> buf(record);
  for (std::size_t r = 0; r < n_records; ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record));
    if (!in) throw FormatError("truncated record in " + path.string());
    const int label = c100 ? buf[1] : buf[0];  // fine label for CIFAR-100
    if (label >= n_classes) {
      throw FormatError("label " + std::to_string(label) + " out of range in " + path.string());
    }
    const unsigned char* planes = buf.data() + (c100 ? 2 : 1);
    std::vector<float> data(kPixels);
    for (int y = 0; y < kSide; ++y) {
      for (int x = 0; x < kSide; ++x) {
        for (int c = 0; c < 3; ++c) {
          data[(static_cast<std::size_t>(y) * kSide + x) * 3 + static_cast<std::size_t>(c)] =
              static_cast<float>(planes[static_cast<std::size_t>(c) * kSide * kSide +
                                        static_cast<std::size_t>(y) * kSide + x]) / 255.0f;
        }
      }
    }
    ds.images.emplace_back(kSide, kSide, 3, std::move(data));
    ds.labels.push_back(label);
  }
  return ds;
}

/// Loads and concatenates several CIFAR files (e.g. data_batch_1..5.bin).
inline Dataset load_cifar_binary(std::span<const std::filesystem::path> paths,
                                 CifarVariant variant, SplitTag split = SplitTag::train) {
  if (paths.empty()) throw EmptyInputError("load_cifar_binary: no files");
  Dataset ds = load_cifar_binary(paths.front(), variant, split);
  for (std::size_t i = 1; i < paths.size(); ++i) {
    Dataset next = load_cifar_binary(paths[i], variant, split);
    ds.images.insert(ds.images.end(), next.images.begin(), next.images.end());
    ds.labels.insert(ds.labels.end(), next.labels.begin(), next.labels.end());
  }
  return ds;
}

/// Writes a dataset back out in CIFAR byte layout (coarse labels, for the
/// CIFAR-100 variant, are written as zero). Loading the result reproduces
/// the dataset exactly.
inline void write_cifar_binary(const Dataset& ds, const std::filesystem::path& path,
                               CifarVariant variant) {
  constexpr int kSide = 32;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Image& img = ds.images[i];
    if (img.height() != kSide || img.width() != kSide || img.channels() != 3) {
      throw ShapeError("CIFAR export requires 32x32x3 images, got " + img.shape_string());
    }
    if (variant == CifarVariant::cifar100) out.put(0);
    out.put(static_cast<char>(ds.labels[i]));
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < kSide; ++y) {
        for (int x = 0; x < kSide; ++x) {
          const int byte = std::clamp(
              static_cast<int>(std::lround(img.at(y, x, c) * 255.0f)), 0, 255);
          out.put(static_cast<char>(byte));
        }
      }
    }
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Desk-scale stand-in for CIFAR: class c gets a horizontal-stripe template
/// (rows [c*H/n, (c+1)*H/n) at signal_high, elsewhere signal_low) plus
/// Gaussian pixel noise, clamped to [0,1]. With the default 1.0/0.0 levels
/// the templates have disjoint support and are mutually orthogonal.
struct SyntheticSpec {
  int n_classes = 4;
  int samples_per_class = 100;
  int image_size = 16;
  int channels = 1;
  double signal_high = 1.0;
  double signal_low = 0.0;
  double noise_std = 0.05;
};

inline void validate(const SyntheticSpec& spec) {
  if (spec.n_classes < 1 || spec.samples_per_class < 1 || spec.image_size < 1) {
    throw ConfigError("synthetic spec requires positive counts");
  }
  if (spec.n_classes > spec.image_size) {
    throw ConfigError("synthetic spec needs image_size >= n_classes for stripe templates");
  }
  if (spec.channels != 1 && spec.channels != 3) {
    throw ConfigError("synthetic spec channels must be 1 or 3");
  }
  if (spec.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (spec.signal_high < 0.0 || spec.signal_high > 1.0 ||
      spec.signal_low < 0.0 || spec.signal_low > 1.0) {
    throw ConfigError("signal levels must be in [0,1]");
  }
}

inline Image synthetic_class_template(const SyntheticSpec& spec, int cls) {
  const int side = spec.image_size;
  const int row0 = cls * side / spec.n_classes;
  const int row1 = (cls + 1) * side / spec.n_classes;
  std::vector<float> data(static_cast<std::size_t>(side) * side * spec.channels);
  std::size_t i = 0;
  for (int y = 0; y < side; ++y) {
    const float v = (y >= row0 && y < row1) ? static_cast<float>(spec.signal_high)
                                            : static_cast<float>(spec.signal_low);
    for (int x = 0; x < side * spec.channels; ++x) data[i++] = v;
  }
  return Image(side, side, spec.channels, std::move(data));
}

inline Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                  SplitTag split = SplitTag::train) {
  validate(spec);
  Dataset ds;
  ds.n_classes = spec.n_classes;
  ds.split = split;
  const std::uint64_t split_tag = split == SplitTag::train ? 0 : 1;
  for (int c = 0; c < spec.n_classes; ++c) {
    const Image tmpl = synthetic_class_template(spec, c);
    for (int s = 0; s < spec.samples_per_class; ++s) {
      const auto index = static_cast<std::uint64_t>(c) * spec.samples_per_class + s;
      if (spec.noise_std == 0.0) {
        ds.images.push_back(tmpl);
      } else {
        RngStream rng = derive_stream(seed, stream_key(kStreamSynthetic, split_tag, index));
        std::vector<float> data(tmpl.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
          data[i] = std::clamp(
              tmpl.data()[i] + static_cast<float>(spec.noise_std * rng.normal()),
              0.0f, 1.0f);
        }
        ds.images.emplace_back(spec.image_size, spec.image_size, spec.channels,
                               std::move(data));
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Common corruptions

enum class CorruptionKind {
  gaussian_noise,
  shot_noise,
  impulse_noise,
  brightness,
  contrast,
  pixelate,
};

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;
};

inline void validate(const CorruptionSpec& spec) {
  if (spec.severity < 1 || spec.severity > 5) {
    throw ConfigError("corruption severity must be in [1,5]");
  }
}

// Severity parameter tables, indexed by severity-1. Fixed constants aligned
// with the common-corruptions benchmark's CIFAR conventions.
inline constexpr std::array<double, 5> kGaussianNoiseStd = {0.04, 0.06, 0.08, 0.09, 0.10};
inline constexpr std::array<double, 5> kShotNoisePhotons = {500.0, 250.0, 100.0, 75.0, 50.0};
inline constexpr std::array<double, 5> kImpulseNoiseAmount = {0.01, 0.02, 0.03, 0.05, 0.07};
inline constexpr std::array<double, 5> kBrightnessDelta = {0.05, 0.10, 0.15, 0.20, 0.30};
inline constexpr std::array<double, 5> kContrastScale = {0.75, 0.50, 0.40, 0.30, 0.15};
inline constexpr std::array<double, 5> kPixelateFraction = {0.95, 0.90, 0.85, 0.75, 0.65};

inline double corruption_param(CorruptionKind kind, int severity) {
  const auto i = static_cast<std::size_t>(severity - 1);
  switch (kind) {
    case CorruptionKind::gaussian_noise: return kGaussianNoiseStd[i];
    case CorruptionKind::shot_noise: return kShotNoisePhotons[i];
    case CorruptionKind::impulse_noise: return kImpulseNoiseAmount[i];
    case CorruptionKind::brightness: return kBrightnessDelta[i];
    case CorruptionKind::contrast: return kContrastScale[i];
    default: return kPixelateFraction[i];
  }
}

namespace detail {

inline Image map_pixels(const Image& img, auto&& fn) {
  std::vector<float> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = std::clamp(fn(img.data()[i]), 0.0f, 1.0f);
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

inline std::int64_t poisson(double lambda, RngStream& rng) {
  if (lambda <= 0.0) return 0;
  if (lambda < 30.0) {
    // Knuth: multiply uniforms until below e^-lambda.
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= rng.next_double_open();
    } while (p > limit);
    return k - 1;
  }
  // Normal approximation for large rates.
  const double x = lambda + std::sqrt(lambda) * rng.normal();
  return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::llround(x)));
}

inline Image brightness_with_delta(const Image& img, double delta) {
  return map_pixels(img, [&](float v) { return v + static_cast<float>(delta); });
}

inline Image contrast_with_scale(const Image& img, double scale) {
  std::vector<double> mean(static_cast<std::size_t>(img.channels()), 0.0);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) mean[static_cast<std::size_t>(c)] += img.at(y, x, c);
    }
  }
  const double npix = static_cast<double>(img.height()) * img.width();
  for (auto& m : mean) m /= npix;

  std::vector<float> out(img.size());
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const double m = mean[static_cast<std::size_t>(c)];
        out[i++] = std::clamp(
            static_cast<float>((img.at(y, x, c) - m) * scale + m), 0.0f, 1.0f);
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

inline Image pixelate_with_fraction(const Image& img, double fraction) {
  const int h2 = std::max(1, static_cast<int>(std::lround(img.height() * fraction)));
  const int w2 = std::max(1, static_cast<int>(std::lround(img.width() * fraction)));
  // Area-average downscale, then nearest-neighbor upscale.
  std::vector<float> small(static_cast<std::size_t>(h2) * w2 * img.channels(), 0.0f);
  std::vector<int> counts(static_cast<std::size_t>(h2) * w2, 0);
  for (int y = 0; y < img.height(); ++y) {
    const int ty = std::min(h2 - 1, y * h2 / img.height());
    for (int x = 0; x < img.width(); ++x) {
      const int tx = std::min(w2 - 1, x * w2 / img.width());
      ++counts[static_cast<std::size_t>(ty) * w2 + tx];
      for (int c = 0; c < img.channels(); ++c) {
        small[(static_cast<std::size_t>(ty) * w2 + tx) * img.channels() + static_cast<std::size_t>(c)] +=
            img.at(y, x, c);
      }
    }
  }
  for (int t = 0; t < h2 * w2; ++t) {
    for (int c = 0; c < img.channels(); ++c) {
      small[static_cast<std::size_t>(t) * img.channels() + static_cast<std::size_t>(c)] /=
          static_cast<float>(counts[static_cast<std::size_t>(t)]);
    }
  }
  std::vector<float> out(img.size());
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    const int ty = std::min(h2 - 1, y * h2 / img.height());
    for (int x = 0; x < img.width(); ++x) {
      const int tx = std::min(w2 - 1, x * w2 / img.width());
      for (int c = 0; c < img.channels(); ++c) {
        out[i++] = std::clamp(
            small[(static_cast<std::size_t>(ty) * w2 + tx) * img.channels() + static_cast<std::size_t>(c)],
            0.0f, 1.0f);
      }
    }
  }
  return Image(img.height(), img.width(), img.channels(), std::move(out), RangeTag::unit);
}

}  // namespace detail

/// Applies one corruption at the given severity. Unit-range in, unit-range
/// (clipped) out; deterministic under the stream.
inline Image corrupt(const Image& img, const CorruptionSpec& spec, RngStream& rng) {
  validate(spec);
  if (img.range_tag() != RangeTag::unit) {
    throw RangeTagError("corrupt requires a unit-range image");
  }
  const double p = corruption_param(spec.kind, spec.severity);
  switch (spec.kind) {
    case CorruptionKind::gaussian_noise:
      return detail::map_pixels(
          img, [&](float v) { return v + static_cast<float>(p * rng.normal()); });
    case CorruptionKind::shot_noise:
      return detail::map_pixels(img, [&](float v) {
        return static_cast<float>(
            static_cast<double>(detail::poisson(static_cast<double>(v) * p, rng)) / p);
      });
    case CorruptionKind::impulse_noise:
      return detail::map_pixels(img, [&](float v) {
        const double u = rng.next_double();
        if (u < p / 2.0) return 0.0f;        // pepper
        if (u < p) return 1.0f;              // salt
        return v;
      });
    case CorruptionKind::brightness:
      return detail::brightness_with_delta(img, p);
    case CorruptionKind::contrast:
      return detail::contrast_with_scale(img, p);
    default:
      return detail::pixelate_with_fraction(img, p);
  }
}

// ---------------------------------------------------------------------------
// Batch export

struct ExportManifest {
  std::filesystem::path manifest_path;
  std::filesystem::path images_path;
  std::filesystem::path labels_path;
  std::uint64_t spec_hash = 0;
};

/// Writes a batch as two NPY tensors (images BxHxWxC float32, labels
/// Bxn_classes float64) plus a key:value manifest recording shapes, the
/// run seed, and the pipeline spec hash.
inline ExportManifest export_batch(const Batch& batch, const std::filesystem::path& dir,
                                   std::uint64_t spec_hash, std::uint64_t seed) {
  if (batch.size() == 0) throw FormatError("refusing to export an empty batch");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory: " + dir.string());

  const Image& first = batch[0].image;
  const auto b = batch.size();
  const auto h = static_cast<std::size_t>(first.height());
  const auto w = static_cast<std::size_t>(first.width());
  const auto c = static_cast<std::size_t>(first.channels());
  const auto n = static_cast<std::size_t>(batch[0].label.n_classes());

  std::vector<float> images;
  images.reserve(b * h * w * c);
  std::vector<double> labels;
  labels.reserve(b * n);
  for (std::size_t i = 0; i < b; ++i) {
    images.insert(images.end(), batch[i].image.data().begin(), batch[i].image.data().end());
    labels.insert(labels.end(), batch[i].label.data().begin(), batch[i].label.data().end());
  }

  ExportManifest m;
  m.spec_hash = spec_hash;
  m.images_path = dir / "images.npy";
  m.labels_path = dir / "labels.npy";
  m.manifest_path = dir / "manifest.txt";

  const std::array<std::size_t, 4> ishape = {b, h, w, c};
  const std::array<std::size_t, 2> lshape = {b, n};
  write_npy<float>(m.images_path, images, ishape);
  write_npy<double>(m.labels_path, labels, lshape);

  std::ofstream out(m.manifest_path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + m.manifest_path.string());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(spec_hash));
  out << "images: images.npy\n"
      << "images_shape: " << b << "x" << h << "x" << w << "x" << c << "\n"
      << "labels: labels.npy\n"
      << "labels_shape: " << b << "x" << n << "\n"
      << "seed: " << seed << "\n"
      << "spec_hash: " << hex << "\n";
  if (!out) throw FormatError("write failed: " + m.manifest_path.string());
  return m;
}

}  // namespace mixforge
