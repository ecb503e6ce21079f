#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/data.hpp"
#include "mixforge/errors.hpp"
#include "mixforge/mixers.hpp"
#include "mixforge/npy.hpp"
#include "mixforge/parallel.hpp"
#include "mixforge/rng.hpp"

namespace mixforge {

// Desk-scale differentiable classifier: a ReLU MLP with analytic gradients,
// in 64-bit floats throughout so finite-difference checks are tight.

struct Model {
  std::vector<int> dims;  // [input, hidden..., n_classes]
  std::vector<std::vector<double>> weights;  // per layer, row-major (out x in)
  std::vector<std::vector<double>> biases;

  int input_dim() const noexcept { return dims.front(); }
  int n_classes() const noexcept { return dims.back(); }
  std::size_t n_layers() const noexcept { return weights.size(); }
};

inline void validate(const Model& m) {
  if (m.dims.size() < 2) throw ShapeError("model needs at least input and output dims");
  if (m.weights.size() != m.dims.size() - 1 || m.biases.size() != m.weights.size()) {
    throw ShapeError("model layer count mismatch");
  }
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const auto in = static_cast<std::size_t>(m.dims[l]);
    const auto out = static_cast<std::size_t>(m.dims[l + 1]);
    if (m.weights[l].size() != in * out || m.biases[l].size() != out) {
      throw ShapeError("model layer " + std::to_string(l) + " has wrong parameter shape");
    }
    for (double v : m.weights[l]) {
      if (!std::isfinite(v)) throw NumericsError("non-finite weight");
    }
    for (double v : m.biases[l]) {
      if (!std::isfinite(v)) throw NumericsError("non-finite bias");
    }
  }
}

/// He-scaled normal init, deterministic per (seed, layer).
inline Model init_model(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("init_model needs at least [input, classes]");
  for (int d : dims) {
    if (d < 1) throw ShapeError("init_model: dims must be positive");
  }
  Model m;
  m.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto out = static_cast<std::size_t>(dims[l + 1]);
    RngStream rng = derive_stream(seed, stream_key(kStreamInit, l));
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (auto& v : w) v = scale * rng.normal();
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(out, 0.0);
  }
  return m;
}

/// Forward-pass cache for backprop.
struct Activations {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // post-ReLU per hidden layer
};

inline std::vector<double> flatten_image(const Image& img) {
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data()[i];
  return out;
}

/// Logits for one input; fills `cache` when given.
inline std::vector<double> forward(const Model& m, std::span<const double> input,
                                   Activations* cache = nullptr) {
  if (input.size() != static_cast<std::size_t>(m.input_dim())) {
    throw ShapeError("forward: input length " + std::to_string(input.size()) +
                     " != input_dim " + std::to_string(m.input_dim()));
  }
  if (cache) {
    cache->input.assign(input.begin(), input.end());
    cache->pre.clear();
    cache->post.clear();
  }
  std::vector<double> h(input.begin(), input.end());
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const auto in = static_cast<std::size_t>(m.dims[l]);
    const auto out = static_cast<std::size_t>(m.dims[l + 1]);
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = m.biases[l][o];
      const double* row = m.weights[l].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * h[i];
      z[o] = acc;
    }
    if (cache) cache->pre.push_back(z);
    if (l + 1 < m.n_layers()) {
      for (auto& v : z) v = std::max(0.0, v);
      if (cache) cache->post.push_back(z);
    }
    h = std::move(z);
  }
  return h;
}

/// Numerically stabilized softmax (log-sum-exp shift).
inline std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Soft-label cross entropy: -sum_c label[c] * log softmax(logits)[c].
/// Gradient w.r.t. logits is softmax(logits) - label.
inline LossGrad cross_entropy_soft(std::span<const double> logits, const LabelVector& label) {
  if (static_cast<int>(logits.size()) != label.n_classes()) {
    throw ShapeError("cross_entropy_soft: logits/label length mismatch");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericsError("cross_entropy_soft: non-finite logit");
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - mx);
  lse = mx + std::log(lse);

  // Gradient through the same softmax path the predictions use, so a label
  // equal to softmax(logits) yields an exactly zero gradient.
  const std::vector<double> p = softmax(logits);
  LossGrad out;
  out.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out.loss += label[static_cast<int>(c)] * (lse - logits[c]);
    out.grad[c] = p[c] - label[static_cast<int>(c)];
  }
  return out;
}

struct PairLossGrad {
  double loss = 0.0;
  std::vector<double> grad1, grad2;
};

/// Pi-model consistency distance: mean squared difference over the class
/// dimension. Symmetric; gradients are 2(o1-o2)/n and its negation.
inline PairLossGrad pi_consistency_loss(std::span<const double> out1,
                                        std::span<const double> out2) {
  if (out1.size() != out2.size()) throw ShapeError("pi_consistency_loss: length mismatch");
  const double n = static_cast<double>(out1.size());
  PairLossGrad r;
  r.grad1.resize(out1.size());
  r.grad2.resize(out1.size());
  for (std::size_t i = 0; i < out1.size(); ++i) {
    const double d = out1[i] - out2[i];
    r.loss += d * d / n;
    r.grad1[i] = 2.0 * d / n;
    r.grad2[i] = -2.0 * d / n;
  }
  return r;
}

/// Vector-Jacobian product of softmax: given p = softmax(z) and upstream
/// dL/dp, returns dL/dz = p .* (u - <u, p>).
inline std::vector<double> softmax_vjp(std::span<const double> p,
                                       std::span<const double> upstream) {
  if (p.size() != upstream.size()) throw ShapeError("softmax_vjp: length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += upstream[i] * p[i];
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (upstream[i] - dot);
  return out;
}

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

inline Gradients zero_gradients(const Model& m) {
  Gradients g;
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    g.weights.emplace_back(m.weights[l].size(), 0.0);
    g.biases.emplace_back(m.biases[l].size(), 0.0);
  }
  return g;
}

inline void accumulate(Gradients& acc, const Gradients& g, double scale = 1.0) {
  for (std::size_t l = 0; l < acc.weights.size(); ++l) {
    for (std::size_t i = 0; i < acc.weights[l].size(); ++i) {
      acc.weights[l][i] += scale * g.weights[l][i];
    }
    for (std::size_t i = 0; i < acc.biases[l].size(); ++i) {
      acc.biases[l][i] += scale * g.biases[l][i];
    }
  }
}

/// Exact reverse-mode gradients for the MLP given dLoss/dlogits.
inline Gradients backward(const Model& m, const Activations& cache,
                          std::span<const double> dlogits) {
  if (cache.pre.size() != m.n_layers()) throw ShapeError("backward: stale cache");
  if (dlogits.size() != static_cast<std::size_t>(m.n_classes())) {
    throw ShapeError("backward: dlogits length mismatch");
  }
  Gradients g = zero_gradients(m);
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  for (std::size_t l = m.n_layers(); l-- > 0;) {
    const auto in = static_cast<std::size_t>(m.dims[l]);
    const auto out = static_cast<std::size_t>(m.dims[l + 1]);
    const std::vector<double>& prev =
        l == 0 ? cache.input : cache.post[l - 1];
    for (std::size_t o = 0; o < out; ++o) {
      g.biases[l][o] = delta[o];
      double* grow = g.weights[l].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] = delta[o] * prev[i];
    }
    if (l == 0) break;
    std::vector<double> next(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = m.weights[l].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) next[i] += row[i] * delta[o];
    }
    // ReLU mask from the previous layer's pre-activations.
    for (std::size_t i = 0; i < in; ++i) {
      if (cache.pre[l - 1][i] <= 0.0) next[i] = 0.0;
    }
    delta = std::move(next);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerConfig {
  double lr = 0.1;
  double momentum = 0.9;
  std::vector<int> decay_epochs = {30, 60};
  double decay_factor = 0.1;
  int epochs = 90;
  int batch_size = 32;
};

inline void validate(const OptimizerConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("optimizer: lr must be > 0");
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw ConfigError("optimizer: momentum must be in [0,1)");
  if (!(c.decay_factor > 0.0) || c.decay_factor > 1.0) {
    throw ConfigError("optimizer: decay_factor must be in (0,1]");
  }
  if (c.epochs < 0 || c.batch_size < 1) throw ConfigError("optimizer: bad epochs/batch_size");
}

/// Step-decay schedule: lr * factor^(number of decay epochs <= epoch).
inline double lr_at_epoch(const OptimizerConfig& c, int epoch) {
  int decays = 0;
  for (int e : c.decay_epochs) {
    if (e <= epoch) ++decays;
  }
  return c.lr * std::pow(c.decay_factor, decays);
}

/// v <- momentum * v + g;  theta <- theta - lr_epoch * v.
inline void sgd_momentum_step(Model& m, const Gradients& grads, Gradients& velocity,
                              const OptimizerConfig& c, int epoch) {
  const double lr = lr_at_epoch(c, epoch);
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
      velocity.weights[l][i] = c.momentum * velocity.weights[l][i] + grads.weights[l][i];
      m.weights[l][i] -= lr * velocity.weights[l][i];
    }
    for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
      velocity.biases[l][i] = c.momentum * velocity.biases[l][i] + grads.biases[l][i];
      m.biases[l][i] -= lr * velocity.biases[l][i];
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation

enum class InferenceMode { self_concat, flip_concat, single, mean_of_flips };

inline const char* to_string(InferenceMode m) {
  switch (m) {
    case InferenceMode::self_concat: return "self_concat";
    case InferenceMode::flip_concat: return "flip_concat";
    case InferenceMode::single: return "single";
    default: return "mean_of_flips";
  }
}

inline int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

/// Top-1 error under the chosen test-time input construction.
/// self_concat stacks the image with itself k times; flip_concat stacks it
/// with its horizontal flip (k = 2); mean_of_flips averages the softmax
/// outputs of the image and its flip through a single-input model.
/// `preprocess`, when given, is the deterministic eval chain (center crop,
/// normalize) each test image passes through first, so inputs match what the
/// model saw in training.
inline double evaluate(const Model& m, const Dataset& ds, InferenceMode mode, int k = 2,
                       Axis axis = Axis::height,
                       const TransformChain* preprocess = nullptr) {
  if (ds.size() == 0) throw EmptyDatasetError("evaluate: empty dataset");
  if (preprocess) {
    for (const auto& spec : preprocess->specs()) {
      if (draw_count(spec) != 0) {
        throw ConfigError("evaluate: preprocess chain must be deterministic");
      }
    }
  }
  std::size_t image_len = ds.images.front().size();
  if (preprocess && !preprocess->empty()) {
    RngStream probe(0, 0);
    image_len = apply_chain(ds.images.front(), *preprocess, probe).size();
  }
  const auto need = static_cast<std::size_t>(m.input_dim());
  if (mode == InferenceMode::self_concat) {
    if (need != image_len * static_cast<std::size_t>(k)) {
      throw ShapeError("evaluate: self_concat with k=" + std::to_string(k) +
                       " needs input_dim " + std::to_string(image_len * static_cast<std::size_t>(k)));
    }
  } else if (mode == InferenceMode::flip_concat) {
    if (need != image_len * 2) throw ShapeError("evaluate: flip_concat needs input_dim = 2 * image");
  } else {
    if (need != image_len) throw ShapeError("evaluate: single-image input_dim mismatch");
  }
  if (m.n_classes() != ds.n_classes) throw ShapeError("evaluate: class count mismatch");

  std::vector<unsigned char> wrong(ds.size(), 0);
  parallel_for(ds.size(), [&](std::size_t i) {
    Image img = ds.images[i];
    if (preprocess && !preprocess->empty()) {
      RngStream rng(0, 0);  // chain is deterministic, consumes no draws
      img = apply_chain(img, *preprocess, rng);
    }
    int pred = 0;
    switch (mode) {
      case InferenceMode::self_concat: {
        const std::vector<Image> copies(static_cast<std::size_t>(k), img);
        pred = argmax(forward(m, flatten_image(concat_images(copies, axis))));
        break;
      }
      case InferenceMode::flip_concat: {
        const std::array<Image, 2> pair = {img, horizontal_flip_image(img)};
        pred = argmax(forward(m, flatten_image(concat_images(pair, axis))));
        break;
      }
      case InferenceMode::single:
        pred = argmax(forward(m, flatten_image(img)));
        break;
      case InferenceMode::mean_of_flips: {
        const auto p1 = softmax(forward(m, flatten_image(img)));
        const auto p2 = softmax(forward(m, flatten_image(horizontal_flip_image(img))));
        std::vector<double> p(p1.size());
        for (std::size_t c = 0; c < p.size(); ++c) p[c] = 0.5 * (p1[c] + p2[c]);
        pred = argmax(p);
        break;
      }
    }
    wrong[i] = pred != ds.labels[i] ? 1 : 0;
  });
  std::size_t errors = 0;
  for (unsigned char w : wrong) errors += w;
  return static_cast<double>(errors) / static_cast<double>(ds.size());
}

/// Mean corruption error: the unweighted arithmetic mean of per-corruption
/// test errors.
inline double compute_mce(std::span<const double> per_corruption_errors) {
  if (per_corruption_errors.empty()) throw EmptyInputError("compute_mce: empty list");
  double sum = 0.0;
  for (double e : per_corruption_errors) sum += e;
  return sum / static_cast<double>(per_corruption_errors.size());
}

// ---------------------------------------------------------------------------
// Training

struct SSLConfig {
  double consistency_weight = 20.0;
  int labeled_per_batch = 0;
  int unlabeled_per_batch = 0;
  // The first labeled_count dataset samples form the labeled pool; the rest
  // are the unlabeled pool (the whole set if labeled_count covers it).
  std::int64_t labeled_count = 0;
};

inline void validate(const SSLConfig& c) {
  if (c.consistency_weight < 0.0) throw ConfigError("ssl: consistency_weight must be >= 0");
  if (c.labeled_per_batch < 1 || c.unlabeled_per_batch < 0) {
    throw ConfigError("ssl: bad per-batch counts");
  }
  if (c.labeled_count < 1) throw ConfigError("ssl: labeled_count must be >= 1");
}

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> test_error;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> log;
};

namespace detail {

struct SampleGrad {
  double loss = 0.0;
  Gradients grads;
};

/// Stacks one image with itself to match a model trained on k-fold
/// concatenated inputs (identity when k is 1).
inline Image self_stack(const Image& img, int k, Axis axis) {
  if (k <= 1) return img;
  const std::vector<Image> copies(static_cast<std::size_t>(k), img);
  return concat_images(copies, axis);
}

}  // namespace detail

/// Trains the MLP on the composed pipeline with soft-label cross entropy and
/// momentum SGD. With an SSLConfig, each step also penalizes the mean squared
/// difference between softmax outputs of two independently transformed views
/// of unlabeled images, weighted by consistency_weight.
///
/// Deterministic given the seed: batches come from build_batch, per-sample
/// gradients are reduced in slot order, and all parallelism is over
/// independent slots.
inline TrainResult train(const Dataset& train_set, const PipelineSpec& spec,
                         const Model& model_init, const OptimizerConfig& opt,
                         const std::optional<SSLConfig>& ssl, std::uint64_t seed,
                         const Dataset* test_set = nullptr,
                         InferenceMode eval_mode = InferenceMode::self_concat) {
  validate(spec);
  validate(opt);
  validate(model_init);
  if (train_set.size() == 0) throw EmptyDatasetError("train: empty dataset");

  const auto stack = terminal_stackmix(spec);
  const int k = stack ? stack->k : 1;
  const Axis axis = stack ? stack->axis : Axis::height;

  // Check the full dimension chain before taking any step.
  {
    RngStream probe = derive_stream(seed, stream_key(kStreamBatch, 0, 0, 0));
    const auto indices = draw_indices(train_set.size(), spec, probe);
    RngStream probe2 = derive_stream(seed, stream_key(kStreamBatch, 0, 0, 0));
    const Sample s = compose(spec, train_set, indices, probe2);
    if (s.image.size() != static_cast<std::size_t>(model_init.input_dim())) {
      throw ShapeError("train: pipeline produces inputs of length " +
                       std::to_string(s.image.size()) + " but model expects " +
                       std::to_string(model_init.input_dim()));
    }
    if (train_set.n_classes != model_init.n_classes()) {
      throw ShapeError("train: dataset has " + std::to_string(train_set.n_classes) +
                       " classes but model outputs " + std::to_string(model_init.n_classes()));
    }
  }

  Dataset labeled_pool;
  Dataset unlabeled_pool;
  if (ssl) {
    validate(*ssl);
    const auto labeled = static_cast<std::size_t>(
        std::min<std::int64_t>(ssl->labeled_count, static_cast<std::int64_t>(train_set.size())));
    labeled_pool = slice(train_set, 0, labeled);
    unlabeled_pool = labeled < train_set.size()
                         ? slice(train_set, labeled, train_set.size() - labeled)
                         : train_set;
  }
  const Dataset& pool = ssl ? labeled_pool : train_set;
  const int batch_size = ssl ? ssl->labeled_per_batch : opt.batch_size;
  const auto batches_per_epoch = std::max<std::size_t>(
      1, pool.size() / static_cast<std::size_t>(batch_size));

  TrainResult result;
  result.model = model_init;
  Gradients velocity = zero_gradients(result.model);
  const TransformChain eval_chain = eval_chain_of(spec.base);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const Batch batch = build_batch(pool, spec, batch_size, seed, epoch,
                                      static_cast<std::int64_t>(b));

      // Per-sample gradients in parallel, reduced serially in slot order.
      std::vector<detail::SampleGrad> per_sample(batch.size());
      parallel_for(batch.size(), [&](std::size_t i) {
        Activations cache;
        const auto logits = forward(result.model, flatten_image(batch[i].image), &cache);
        const LossGrad lg = cross_entropy_soft(logits, batch[i].label);
        per_sample[i].loss = lg.loss;
        per_sample[i].grads = backward(result.model, cache, lg.grad);
      });

      Gradients grads = zero_gradients(result.model);
      double batch_loss = 0.0;
      const double inv_bs = 1.0 / static_cast<double>(batch.size());
      for (const auto& sg : per_sample) {
        batch_loss += sg.loss * inv_bs;
        accumulate(grads, sg.grads, inv_bs);
      }

      if (ssl && ssl->unlabeled_per_batch > 0 && ssl->consistency_weight > 0.0) {
        const auto n_unlabeled = static_cast<std::size_t>(ssl->unlabeled_per_batch);
        std::vector<detail::SampleGrad> per_view(n_unlabeled);
        parallel_for(n_unlabeled, [&](std::size_t u) {
          RngStream rng = derive_stream(
              seed, stream_key(kStreamSsl, static_cast<std::uint64_t>(epoch), b, u));
          const auto idx = static_cast<std::size_t>(
              rng.uniform_int(static_cast<std::int64_t>(unlabeled_pool.size())));
          const Image& raw = unlabeled_pool.images[idx];
          // Two independently transformed views of the same image, stacked
          // the same way training inputs are.
          const Image v1 = detail::self_stack(apply_chain(raw, spec.base, rng), k, axis);
          const Image v2 = detail::self_stack(apply_chain(raw, spec.base, rng), k, axis);

          Activations c1, c2;
          const auto z1 = forward(result.model, flatten_image(v1), &c1);
          const auto z2 = forward(result.model, flatten_image(v2), &c2);
          const auto p1 = softmax(z1);
          const auto p2 = softmax(z2);
          const PairLossGrad pl = pi_consistency_loss(p1, p2);
          per_view[u].loss = pl.loss;
          per_view[u].grads = backward(result.model, c1, softmax_vjp(p1, pl.grad1));
          accumulate(per_view[u].grads,
                     backward(result.model, c2, softmax_vjp(p2, pl.grad2)));
        });
        const double scale = ssl->consistency_weight / static_cast<double>(n_unlabeled);
        for (const auto& sg : per_view) {
          batch_loss += sg.loss * scale;
          accumulate(grads, sg.grads, scale);
        }
      }

      sgd_momentum_step(result.model, grads, velocity, opt, epoch);
      epoch_loss += batch_loss;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr_at_epoch(opt, epoch);
    em.train_loss = epoch_loss / static_cast<double>(batches_per_epoch);
    if (test_set) {
      em.test_error = evaluate(result.model, *test_set, eval_mode, k, axis, &eval_chain);
    }
    result.log.push_back(std::move(em));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

/// One NPY tensor per parameter plus a manifest listing the layer dims.
inline void save_checkpoint(const Model& m, const std::filesystem::path& dir) {
  validate(m);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory: " + dir.string());

  std::ofstream manifest(dir / "checkpoint.txt", std::ios::binary);
  if (!manifest) throw FormatError("cannot write checkpoint manifest in " + dir.string());
  manifest << "dims:";
  for (std::size_t i = 0; i < m.dims.size(); ++i) {
    manifest << (i ? "," : " ") << m.dims[i];
  }
  manifest << "\n";
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::string wname = "weights_" + std::to_string(l) + ".npy";
    const std::string bname = "bias_" + std::to_string(l) + ".npy";
    const std::array<std::size_t, 2> wshape = {static_cast<std::size_t>(m.dims[l + 1]),
                                               static_cast<std::size_t>(m.dims[l])};
    const std::array<std::size_t, 1> bshape = {m.biases[l].size()};
    write_npy<double>(dir / wname, m.weights[l], wshape);
    write_npy<double>(dir / bname, m.biases[l], bshape);
    manifest << "weights_" << l << ": " << wname << "\n";
    manifest << "bias_" << l << ": " << bname << "\n";
  }
  if (!manifest) throw FormatError("checkpoint manifest write failed in " + dir.string());
}

inline Model load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "checkpoint.txt");
  if (!manifest) throw FormatError("cannot open checkpoint manifest in " + dir.string());
  std::string line;
  if (!std::getline(manifest, line) || !line.starts_with("dims: ")) {
    throw FormatError("malformed checkpoint manifest in " + dir.string());
  }
  Model m;
  std::size_t pos = 6;
  while (pos < line.size()) {
    std::size_t used = 0;
    m.dims.push_back(std::stoi(line.substr(pos), &used));
    pos += used;
    if (pos < line.size() && line[pos] == ',') ++pos;
  }
  if (m.dims.size() < 2) throw FormatError("checkpoint has no layer dims: " + dir.string());
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const NpyTensor w = read_npy(dir / ("weights_" + std::to_string(l) + ".npy"));
    const NpyTensor b = read_npy(dir / ("bias_" + std::to_string(l) + ".npy"));
    if (w.descr != "<f8" || b.descr != "<f8") {
      throw FormatError("checkpoint tensors must be float64: " + dir.string());
    }
    m.weights.push_back(w.f64);
    m.biases.push_back(b.f64);
  }
  validate(m);
  return m;
}

}  // namespace mixforge
