#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mixforge/config.hpp"
#include "mixforge/data.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/mixers.hpp"
#include "mixforge/serialize.hpp"
#include "mixforge/trainer.hpp"

namespace mixforge {

// Command implementations behind the mixforge binary. Everything is a pure
// function of (config, input files): reruns produce byte-identical outputs.

namespace detail {

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

/// Fixed length the composed pipeline produces for this dataset; shapes do
/// not depend on the draws, so a throwaway stream suffices.
inline std::size_t composed_input_length(const PipelineSpec& spec, const Dataset& ds) {
  RngStream rng(0, 0);
  const std::vector<std::int64_t> indices(raw_images_needed(spec), 0);
  return compose(spec, ds, indices, rng).image.size();
}

inline int composed_input_height(const PipelineSpec& spec, const Dataset& ds) {
  RngStream rng(0, 0);
  const std::vector<std::int64_t> indices(raw_images_needed(spec), 0);
  return compose(spec, ds, indices, rng).image.height();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// augment

struct AugmentResult {
  std::vector<std::filesystem::path> manifests;
};

/// Writes `count` deterministic batches under out_dir/batch_#####/.
inline AugmentResult cmd_augment(const RunConfig& cfg, int count,
                                 std::ostream& out = std::cout) {
  validate(cfg);
  if (count < 0) throw ConfigError("augment count must be >= 0");
  AugmentResult result;
  if (count == 0) return result;

  auto [train, test] = load_datasets(cfg);
  const std::uint64_t hash = spec_hash(cfg.pipeline);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "batch_%05d", i);
    const Batch batch = build_batch(train, cfg.pipeline, cfg.optimizer.batch_size,
                                    cfg.seed, /*epoch=*/0, /*batch_index=*/i);
    const ExportManifest m = export_batch(batch, cfg.out_dir / name, hash, cfg.seed);
    out << m.manifest_path.string() << "\n";
    result.manifests.push_back(m.manifest_path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// train

struct TrainArtifacts {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path metrics_path;
  TrainResult result;
};

inline TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& out = std::cout) {
  validate(cfg);
  auto [train_set, test_set] = load_datasets(cfg);

  const auto input_len = detail::composed_input_length(cfg.pipeline, train_set);
  std::vector<int> dims;
  dims.push_back(static_cast<int>(input_len));
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(train_set.n_classes);

  const Model init = init_model(dims, cfg.seed);
  TrainArtifacts art;
  art.result = train(train_set, cfg.pipeline, init, cfg.optimizer, cfg.ssl, cfg.seed,
                     test_set.size() > 0 ? &test_set : nullptr, cfg.mode);

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw FormatError("cannot create directory: " + cfg.out_dir.string());

  art.checkpoint_dir = cfg.out_dir / "checkpoint";
  save_checkpoint(art.result.model, art.checkpoint_dir);

  art.metrics_path = cfg.out_dir / "metrics.jsonl";
  std::ofstream metrics(art.metrics_path, std::ios::binary);
  if (!metrics) throw FormatError("cannot write " + art.metrics_path.string());
  for (const auto& m : art.result.log) {
    json rec = {{"epoch", m.epoch},
                {"lr", m.lr},
                {"train_loss", m.train_loss},
                {"mode", to_string(cfg.mode)}};
    rec["test_error"] = m.test_error ? json(*m.test_error) : json(nullptr);
    metrics << rec.dump() << "\n";
  }
  if (!metrics) throw FormatError("write failed: " + art.metrics_path.string());

  if (!art.result.log.empty()) {
    const auto& last = art.result.log.back();
    out << "trained " << art.result.log.size() << " epochs, final train_loss "
        << detail::fixed6(last.train_loss);
    if (last.test_error) out << ", test_error " << detail::fixed6(*last.test_error);
    out << "\n";
  }
  out << "checkpoint: " << art.checkpoint_dir.string() << "\n";
  out << "metrics: " << art.metrics_path.string() << "\n";
  return art;
}

// ---------------------------------------------------------------------------
// eval

struct EvalRow {
  std::string name;  // "clean" or corruption kind
  int severity = 0;  // 0 for clean
  double error = 0.0;
};

struct EvalReport {
  double clean_error = 0.0;
  std::vector<EvalRow> corruption_rows;
  std::optional<double> mce;
  std::filesystem::path csv_path;
  std::filesystem::path table_path;
};

/// Clean top-1 error, plus a per-corruption error table and its mCE when the
/// config lists corruptions. Corruption draws are per-image streams derived
/// from (seed, kind, severity, index), so reports replay exactly.
inline EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint_dir,
                           std::ostream& out = std::cout) {
  validate(cfg);
  const Model model = load_checkpoint(checkpoint_dir);
  auto [train_set, test_set] = load_datasets(cfg);
  const Dataset& eval_set = test_set.size() > 0 ? test_set : train_set;

  const auto stack = terminal_stackmix(cfg.pipeline);
  const Axis axis = stack ? stack->axis : Axis::height;
  // deterministic test-time preprocessing matching the training inputs;
  // corruptions are applied to the raw unit-range image first
  const TransformChain eval_chain = eval_chain_of(cfg.pipeline.base);

  EvalReport report;
  report.clean_error = evaluate(model, eval_set, cfg.mode, cfg.k, axis, &eval_chain);

  std::vector<double> errors;
  for (const auto& spec : cfg.corruptions) {
    Dataset corrupted = eval_set;
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
      RngStream rng = derive_stream(
          cfg.seed, stream_key(kStreamCorrupt, static_cast<std::uint64_t>(spec.kind),
                               static_cast<std::uint64_t>(spec.severity), i));
      corrupted.images[i] = corrupt(corrupted.images[i], spec, rng);
    }
    const double err = evaluate(model, corrupted, cfg.mode, cfg.k, axis, &eval_chain);
    report.corruption_rows.push_back({to_string(spec.kind), spec.severity, err});
    errors.push_back(err);
  }
  if (!errors.empty()) report.mce = compute_mce(errors);

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw FormatError("cannot create directory: " + cfg.out_dir.string());

  report.csv_path = cfg.out_dir / "report.csv";
  {
    std::ofstream csv(report.csv_path, std::ios::binary);
    if (!csv) throw FormatError("cannot write " + report.csv_path.string());
    csv << "corruption,severity,error\n";
    csv << "clean,," << detail::fixed6(report.clean_error) << "\n";
    for (const auto& row : report.corruption_rows) {
      csv << row.name << "," << row.severity << "," << detail::fixed6(row.error) << "\n";
    }
    if (report.mce) csv << "mce,," << detail::fixed6(*report.mce) << "\n";
    if (!csv) throw FormatError("write failed: " + report.csv_path.string());
  }

  report.table_path = cfg.out_dir / "report.txt";
  {
    std::ofstream tbl(report.table_path, std::ios::binary);
    if (!tbl) throw FormatError("cannot write " + report.table_path.string());
    tbl << detail::pad_right("corruption", 16) << detail::pad_right("severity", 10)
        << "error\n";
    tbl << detail::pad_right("clean", 16) << detail::pad_right("-", 10)
        << detail::fixed6(report.clean_error) << "\n";
    for (const auto& row : report.corruption_rows) {
      tbl << detail::pad_right(row.name, 16)
          << detail::pad_right(std::to_string(row.severity), 10)
          << detail::fixed6(row.error) << "\n";
    }
    if (report.mce) {
      tbl << "mCE over " << report.corruption_rows.size()
          << " corruptions: " << detail::fixed6(*report.mce) << "\n";
    }
    if (!tbl) throw FormatError("write failed: " + report.table_path.string());
  }

  std::ifstream echo(report.table_path);
  out << echo.rdbuf();
  return report;
}

// ---------------------------------------------------------------------------
// ablate-k

struct AblateRow {
  int k = 0;
  int input_height = 0;
  double final_train_loss = 0.0;
  std::optional<double> test_error;
};

struct AblateReport {
  std::vector<AblateRow> rows;
  std::filesystem::path csv_path;
  std::filesystem::path table_path;
};

/// Rewrites the terminal mixer's k: stackmix k directly, MixUp/CutMix arity
/// when that is the final stage (Table-7 style ablation).
inline RunConfig config_with_k(const RunConfig& cfg, int k) {
  if (k < 1) throw ConfigError("ablate: k must be >= 1");
  RunConfig c = cfg;
  auto& stages = c.pipeline.stages;
  if (!stages.empty() && std::holds_alternative<StackMixStage>(stages.back())) {
    std::get<StackMixStage>(stages.back()).k = k;
    c.k = k;
  } else if (!stages.empty()) {
    if (k < 2) throw ConfigError("ablate: a pairwise mixer needs k >= 2");
    std::visit(
        [&](auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, MixUpStage> || std::is_same_v<T, CutMixStage>) {
            s.k = k;
          } else {
            throw ConfigError("ablate: cannot vary k of an augmix stage");
          }
        },
        stages.back());
    c.k = 1;
  } else if (k != 1) {
    throw ConfigError("ablate: k > 1 needs a mixer stage to vary");
  }
  validate(c);
  return c;
}

/// Runs train+eval once per k with the shared base seed; one report row per k.
inline AblateReport cmd_ablate_k(const RunConfig& cfg, const std::vector<int>& k_list,
                                 std::ostream& out = std::cout) {
  validate(cfg);
  if (k_list.empty()) throw ConfigError("ablate: empty k list");

  AblateReport report;
  for (int k : k_list) {
    RunConfig cfg_k = config_with_k(cfg, k);
    cfg_k.out_dir = cfg.out_dir / ("k_" + std::to_string(k));

    auto [train_set, test_set] = load_datasets(cfg_k);
    AblateRow row;
    row.k = k;
    row.input_height = detail::composed_input_height(cfg_k.pipeline, train_set);

    std::ostream null_stream(nullptr);
    const TrainArtifacts art = cmd_train(cfg_k, null_stream);
    if (!art.result.log.empty()) {
      row.final_train_loss = art.result.log.back().train_loss;
      row.test_error = art.result.log.back().test_error;
    }
    report.rows.push_back(row);
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw FormatError("cannot create directory: " + cfg.out_dir.string());

  report.csv_path = cfg.out_dir / "ablate_k.csv";
  {
    std::ofstream csv(report.csv_path, std::ios::binary);
    if (!csv) throw FormatError("cannot write " + report.csv_path.string());
    csv << "k,input_height,final_train_loss,test_error\n";
    for (const auto& row : report.rows) {
      csv << row.k << "," << row.input_height << "," << detail::fixed6(row.final_train_loss)
          << "," << (row.test_error ? detail::fixed6(*row.test_error) : "") << "\n";
    }
    if (!csv) throw FormatError("write failed: " + report.csv_path.string());
  }

  report.table_path = cfg.out_dir / "ablate_k.txt";
  {
    std::ofstream tbl(report.table_path, std::ios::binary);
    if (!tbl) throw FormatError("cannot write " + report.table_path.string());
    tbl << detail::pad_right("k", 6) << detail::pad_right("input_height", 14)
        << detail::pad_right("train_loss", 14) << "test_error\n";
    for (const auto& row : report.rows) {
      tbl << detail::pad_right(std::to_string(row.k), 6)
          << detail::pad_right(std::to_string(row.input_height), 14)
          << detail::pad_right(detail::fixed6(row.final_train_loss), 14)
          << (row.test_error ? detail::fixed6(*row.test_error) : "-") << "\n";
    }
    if (!tbl) throw FormatError("write failed: " + report.table_path.string());
  }

  std::ifstream echo(report.table_path);
  out << echo.rdbuf();
  return report;
}

}  // namespace mixforge
