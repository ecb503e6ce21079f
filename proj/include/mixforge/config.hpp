#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixforge/data.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/mixers.hpp"
#include "mixforge/serialize.hpp"
#include "mixforge/trainer.hpp"

namespace mixforge {

// One self-describing JSON document per run; see README for the schema.

constexpr int kConfigVersion = 1;

struct DatasetConfig {
  enum class Kind { synthetic, cifar10, cifar100 };
  Kind kind = Kind::synthetic;
  // synthetic
  SyntheticSpec synthetic;
  int test_samples_per_class = 0;
  // cifar
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> test_files;
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  int k = 1;
  InferenceMode mode = InferenceMode::self_concat;
  DatasetConfig dataset;
  PipelineSpec pipeline;
  std::vector<int> hidden = {32};
  OptimizerConfig optimizer;
  std::optional<SSLConfig> ssl;
  std::vector<CorruptionSpec> corruptions;
};

inline InferenceMode inference_mode_from_string(const std::string& s) {
  if (s == "self_concat") return InferenceMode::self_concat;
  if (s == "flip_concat") return InferenceMode::flip_concat;
  if (s == "single") return InferenceMode::single;
  if (s == "mean_of_flips") return InferenceMode::mean_of_flips;
  throw ConfigError("unknown inference mode '" + s + "'");
}

inline CorruptionKind corruption_kind_from_string(const std::string& s) {
  if (s == "gaussian_noise") return CorruptionKind::gaussian_noise;
  if (s == "shot_noise") return CorruptionKind::shot_noise;
  if (s == "impulse_noise") return CorruptionKind::impulse_noise;
  if (s == "brightness") return CorruptionKind::brightness;
  if (s == "contrast") return CorruptionKind::contrast;
  if (s == "pixelate") return CorruptionKind::pixelate;
  throw ConfigError("unknown corruption kind '" + s + "'");
}

inline std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::impulse_noise: return "impulse_noise";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::contrast: return "contrast";
    default: return "pixelate";
  }
}

/// Cross-field validation; throws ConfigError with the offending field.
inline void validate(const RunConfig& cfg) {
  if (cfg.version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(cfg.version));
  }
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  validate(cfg.pipeline);
  validate(cfg.optimizer);
  if (cfg.ssl) validate(*cfg.ssl);
  for (const auto& c : cfg.corruptions) validate(c);
  for (int h : cfg.hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  }

  // k must agree between the pipeline and the inference mode.
  const auto stack = terminal_stackmix(cfg.pipeline);
  if (stack && stack->k != cfg.k) {
    throw ConfigError("config k=" + std::to_string(cfg.k) +
                      " disagrees with stackmix stage k=" + std::to_string(stack->k));
  }
  if (!stack && cfg.k != 1) {
    throw ConfigError("config k=" + std::to_string(cfg.k) + " without a stackmix stage");
  }
  if (cfg.mode == InferenceMode::flip_concat && cfg.k != 2) {
    throw ConfigError("flip_concat inference requires k=2");
  }
  if ((cfg.mode == InferenceMode::single || cfg.mode == InferenceMode::mean_of_flips) &&
      cfg.k != 1) {
    throw ConfigError("single/mean_of_flips inference requires k=1");
  }

  if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
    validate(cfg.dataset.synthetic);
    if (cfg.dataset.test_samples_per_class < 0) {
      throw ConfigError("test_samples_per_class must be >= 0");
    }
  } else {
    if (cfg.dataset.train_files.empty()) throw ConfigError("cifar dataset needs train_files");
    for (const auto& p : cfg.dataset.train_files) {
      if (!std::filesystem::exists(p)) throw ConfigError("missing dataset file: " + p.string());
    }
    for (const auto& p : cfg.dataset.test_files) {
      if (!std::filesystem::exists(p)) throw ConfigError("missing dataset file: " + p.string());
    }
  }
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  try {
    cfg.version = j.value("version", kConfigVersion);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out_dir = j.value("out_dir", std::string("out"));
    cfg.k = j.value("k", 1);
    cfg.mode = inference_mode_from_string(j.value("inference_mode", std::string("self_concat")));

    if (j.contains("pipeline")) cfg.pipeline = pipeline_from_json(j.at("pipeline"));

    if (j.contains("model")) cfg.hidden = j.at("model").value("hidden", std::vector<int>{32});

    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      cfg.optimizer.lr = o.value("lr", 0.1);
      cfg.optimizer.momentum = o.value("momentum", 0.9);
      cfg.optimizer.decay_epochs = o.value("decay_epochs", std::vector<int>{30, 60});
      cfg.optimizer.decay_factor = o.value("decay_factor", 0.1);
      cfg.optimizer.epochs = o.value("epochs", 10);
      cfg.optimizer.batch_size = o.value("batch_size", 32);
    }

    if (j.contains("ssl") && !j.at("ssl").is_null()) {
      const json& s = j.at("ssl");
      SSLConfig ssl;
      ssl.consistency_weight = s.value("consistency_weight", 20.0);
      ssl.labeled_per_batch = s.value("labeled_per_batch", 100);
      ssl.unlabeled_per_batch = s.value("unlabeled_per_batch", 100);
      ssl.labeled_count = s.value("labeled_count", std::int64_t{4000});
      cfg.ssl = ssl;
    }

    if (j.contains("corruptions")) {
      for (const auto& item : j.at("corruptions")) {
        CorruptionSpec spec;
        spec.kind = corruption_kind_from_string(item.at("kind").get<std::string>());
        spec.severity = item.value("severity", 1);
        cfg.corruptions.push_back(spec);
      }
    }

    const json& d = j.at("dataset");
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "synthetic") {
      cfg.dataset.kind = DatasetConfig::Kind::synthetic;
      SyntheticSpec& s = cfg.dataset.synthetic;
      s.n_classes = d.value("n_classes", 4);
      s.samples_per_class = d.value("samples_per_class", 100);
      s.image_size = d.value("image_size", 16);
      s.channels = d.value("channels", 1);
      s.signal_high = d.value("signal_high", 1.0);
      s.signal_low = d.value("signal_low", 0.0);
      s.noise_std = d.value("noise_std", 0.05);
      cfg.dataset.test_samples_per_class = d.value("test_samples_per_class", 0);
    } else if (kind == "cifar10" || kind == "cifar100") {
      cfg.dataset.kind = kind == "cifar10" ? DatasetConfig::Kind::cifar10
                                           : DatasetConfig::Kind::cifar100;
      for (const auto& p : d.value("train_files", std::vector<std::string>{})) {
        cfg.dataset.train_files.emplace_back(p);
      }
      for (const auto& p : d.value("test_files", std::vector<std::string>{})) {
        cfg.dataset.test_files.emplace_back(p);
      }
    } else {
      throw ConfigError("unknown dataset kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON (" + path.string() + "): " + e.what());
  }
  return run_config_from_json(j);
}

/// Materializes the train/test datasets the config describes.
inline std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg) {
  if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
    Dataset train = generate_synthetic(cfg.dataset.synthetic, cfg.seed, SplitTag::train);
    Dataset test;
    if (cfg.dataset.test_samples_per_class > 0) {
      SyntheticSpec test_spec = cfg.dataset.synthetic;
      test_spec.samples_per_class = cfg.dataset.test_samples_per_class;
      test = generate_synthetic(test_spec, cfg.seed, SplitTag::test);
    }
    return {std::move(train), std::move(test)};
  }
  const CifarVariant variant = cfg.dataset.kind == DatasetConfig::Kind::cifar10
                                   ? CifarVariant::cifar10
                                   : CifarVariant::cifar100;
  Dataset train = load_cifar_binary(cfg.dataset.train_files, variant, SplitTag::train);
  Dataset test;
  if (!cfg.dataset.test_files.empty()) {
    test = load_cifar_binary(cfg.dataset.test_files, variant, SplitTag::test);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace mixforge
