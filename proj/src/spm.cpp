#include "autotune/spm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "autotune/errors.hpp"
#include "autotune/nn/checkpoint.hpp"
#include "autotune/nn/encoding.hpp"

namespace autotune::spm {

namespace {

constexpr double kProbEps = 1e-7;  // keeps reported probabilities strictly inside (0,1)

double clamp_prob(double p) { return std::min(std::max(p, kProbEps), 1.0 - kProbEps); }

// Converts a frame window into stacked channels (frame-major, then RGB),
// scaled to [0,1].
void fill_frame_window(std::span<const envs::Frame> frames, int window, float* dst) {
  const int s = frames[0].width;
  const size_t plane = static_cast<size_t>(s) * s;
  for (int f = 0; f < window; ++f) {
    const auto& rgb = frames[f].rgb;
    for (int c = 0; c < 3; ++c) {
      float* out = dst + (static_cast<size_t>(f) * 3 + c) * plane;
      for (size_t i = 0; i < plane; ++i) out[i] = rgb[3 * i + c] * (1.0f / 255.0f);
    }
  }
}

void fill_action_window(std::span<const std::vector<double>> actions, int window, int action_dim,
                        float* dst) {
  for (int f = 0; f < window; ++f)
    for (int d = 0; d < action_dim; ++d)
      dst[static_cast<size_t>(f) * action_dim + d] = static_cast<float>(actions[f][d]);
}

nn::Tensor concat_cols(const std::vector<const nn::Tensor*>& parts) {
  const int B = parts.front()->dim(0);
  int total = 0;
  for (const auto* p : parts) total += p->dim(1);
  nn::Tensor out({B, total});
  for (int b = 0; b < B; ++b) {
    float* row = out.data() + static_cast<size_t>(b) * total;
    for (const auto* p : parts) {
      const int d = p->dim(1);
      const float* src = p->data() + static_cast<size_t>(b) * d;
      std::copy(src, src + d, row);
      row += d;
    }
  }
  return out;
}

void check_finite_or_throw(const std::vector<nn::Tensor*>& params, double loss,
                           const char* what) {
  if (!std::isfinite(loss))
    throw NumericError(std::string(what) + ": non-finite training loss");
  for (const auto* p : params) {
    if (!p->all_finite())
      throw NumericError(std::string(what) + ": non-finite model parameters after update");
  }
}

nn::LayerStack make_encoder(const envs::EnvSpec& spec, int window) {
  nn::LayerStack enc;
  enc.add<nn::Conv2dT<float>>(3 * window, 16, 3, 2, 1);
  enc.add<nn::ReluT<float>>();
  enc.add<nn::Conv2dT<float>>(16, 32, 3, 2, 1);
  enc.add<nn::ReluT<float>>();
  enc.add<nn::FlattenT<float>>();
  const auto flat =
      enc.out_shape({1, 3 * window, spec.frame_size, spec.frame_size});
  enc.add<nn::DenseT<float>>(flat.at(1), 128);
  return enc;
}

constexpr int kEncoderOut = 128;
constexpr int kHeadHidden = 400;
constexpr int kEvalPairsPerTraj = 32;

}  // namespace

// One assembled training row: a buffer trajectory plus its sampled pair.
struct SpmRow {
  size_t traj_index;
  SpmPair pair;
};

std::pair<uint8_t, uint8_t> label_and_mask(double sim, double candidate, double mean,
                                           double eta) {
  const uint8_t label = sim > candidate ? 1 : 0;
  const uint8_t mask = std::abs(sim - candidate) <= eta * mean ? 0 : 1;
  return {label, mask};
}

std::vector<SpmPair> make_training_pairs(const envs::Trajectory& traj,
                                         const ParamVector& dist_mean, Rng& rng,
                                         int pairs_per_traj, const SpmConfig& cfg) {
  if (!traj.gen_params.has_value())
    throw std::invalid_argument("make_training_pairs: trajectory has no gen_params");
  if (static_cast<int>(traj.length()) < cfg.window)
    throw std::invalid_argument("make_training_pairs: trajectory shorter than window");
  const ParamVector& sim = *traj.gen_params;
  if (sim.size() != dist_mean.size())
    throw std::invalid_argument("make_training_pairs: mean size mismatch");

  const size_t n = dist_mean.size();
  std::vector<SpmPair> out;
  out.reserve(pairs_per_traj);
  for (int k = 0; k < pairs_per_traj; ++k) {
    SpmPair pair;
    pair.window_start = rng.uniform_int(static_cast<int>(traj.length()) - cfg.window + 1);
    pair.candidate.values.resize(n);
    pair.label.resize(n);
    pair.mask.resize(n);
    for (size_t i = 0; i < n; ++i) {
      pair.candidate[i] = rng.uniform(0.0, 2.0 * dist_mean[i]);
      std::tie(pair.label[i], pair.mask[i]) =
          label_and_mask(sim[i], pair.candidate[i], dist_mean[i], cfg.eta);
    }
    out.push_back(std::move(pair));
  }
  return out;
}

// Holds the assembled tensors for one batch of windows.
struct SpmBatch {
  nn::Tensor frames;                      // [B, 3*window, S, S]
  nn::Tensor actions;                     // [B, window*action_dim]
  nn::Tensor extras;                      // [B, extra_dim] when extra_dim > 0
  std::vector<nn::Tensor> candidate_enc;  // per head, [B, 2L]
  nn::Tensor labels, mask;                // [B, N]
  nn::Tensor enc_out;                     // [B, 128]
  std::vector<nn::Tensor> head_inputs;    // per head
  nn::Tensor logits;                      // [B, N]
  int rows = 0;
};

SpmModel::SpmModel(const envs::EnvSpec& spec, const ParamVector& initial_mean,
                   const SpmConfig& cfg, uint64_t init_seed)
    : spec_(spec), cfg_(cfg), n_params_(spec.schema.size()) {
  if (initial_mean.size() != n_params_)
    throw std::invalid_argument("SpmModel: initial mean size mismatch");
  if (spec.episode_len < cfg.window)
    throw std::invalid_argument("SpmModel: episode shorter than the frame window");
  p_max_.resize(n_params_);
  for (size_t i = 0; i < n_params_; ++i) p_max_[i] = 2.0 * initial_mean[i];

  Rng rng(derive_seed(init_seed, stream::kModelInit));
  encoder_ = make_encoder(spec_, cfg_.window);
  encoder_.init_he_uniform(rng);

  heads_.reserve(n_params_);
  for (size_t i = 0; i < n_params_; ++i) {
    nn::LayerStack head;
    head.add<nn::DenseT<float>>(head_input_dim(), kHeadHidden);
    head.add<nn::ReluT<float>>();
    head.add<nn::DenseT<float>>(kHeadHidden, kHeadHidden);
    head.add<nn::ReluT<float>>();
    auto& last = head.add<nn::DenseT<float>>(kHeadHidden, 1);
    head.init_he_uniform(rng);
    last.zero_init();  // fresh model answers exactly 0.5 everywhere
    heads_.push_back(std::move(head));
  }

  all_params_ = encoder_.params();
  all_grads_ = encoder_.grads();
  for (auto& h : heads_) {
    for (auto* p : h.params()) all_params_.push_back(p);
    for (auto* g : h.grads()) all_grads_.push_back(g);
  }
  adam_.lr = cfg_.learning_rate;
  adam_.init(all_params_);
}

int SpmModel::head_input_dim() const {
  return kEncoderOut + cfg_.window * spec_.action_dim + 2 * cfg_.encoding_levels +
         cfg_.extra_feature_dim;
}

size_t SpmModel::param_count() {
  size_t n = 0;
  for (auto* p : all_params_) n += p->numel();
  return n;
}

void SpmModel::forward_batch(SpmBatch& batch) {
  const int B = batch.rows;
  const nn::Tensor& enc = encoder_.forward(std::move(batch.frames));
  batch.enc_out = enc;
  batch.logits = nn::Tensor({B, static_cast<int>(n_params_)});
  batch.head_inputs.resize(n_params_);
  for (size_t i = 0; i < n_params_; ++i) {
    std::vector<const nn::Tensor*> parts{&batch.enc_out, &batch.actions,
                                         &batch.candidate_enc[i]};
    if (cfg_.extra_feature_dim > 0) parts.push_back(&batch.extras);
    batch.head_inputs[i] = concat_cols(parts);
    const nn::Tensor& logit = heads_[i].forward(batch.head_inputs[i]);
    for (int b = 0; b < B; ++b)
      batch.logits.v[static_cast<size_t>(b) * n_params_ + i] = logit.v[b];
  }
}

namespace {

// Encoding bound for candidate scalars; tracks 2x the reference mean when
// configured, otherwise stays at the frozen construction-time bound.
double encode_bound(const SpmConfig& cfg, const std::vector<double>& frozen, size_t i,
                    const ParamVector* tracked_mean) {
  if (cfg.track_pmax && tracked_mean != nullptr) return 2.0 * (*tracked_mean)[i];
  return frozen[i];
}

void fill_candidate_encodings(const SpmConfig& cfg, const std::vector<double>& frozen,
                              const ParamVector* tracked_mean,
                              std::span<const ParamVector* const> candidates,
                              std::vector<nn::Tensor>& out) {
  const size_t n = frozen.size();
  const int B = static_cast<int>(candidates.size());
  const int d = 2 * cfg.encoding_levels;
  out.assign(n, nn::Tensor());
  for (size_t i = 0; i < n; ++i) {
    out[i] = nn::Tensor({B, d});
    const double bound = encode_bound(cfg, frozen, i, tracked_mean);
    for (int b = 0; b < B; ++b) {
      const auto enc =
          nn::sinusoidal_encode((*candidates[b])[i], bound, cfg.encoding_levels);
      for (int j = 0; j < d; ++j)
        out[i].v[static_cast<size_t>(b) * d + j] = static_cast<float>(enc[j]);
    }
  }
}

}  // namespace

std::vector<double> SpmModel::forward_window(std::span<const envs::Frame> frames,
                                             std::span<const std::vector<double>> actions,
                                             const ParamVector& candidate,
                                             std::span<const double> extra) {
  if (static_cast<int>(frames.size()) != cfg_.window ||
      static_cast<int>(actions.size()) != cfg_.window)
    throw std::invalid_argument("forward_window: expected exactly one window of frames/actions");
  if (candidate.size() != n_params_)
    throw std::invalid_argument("forward_window: candidate size mismatch");
  if (static_cast<int>(extra.size()) != cfg_.extra_feature_dim)
    throw std::invalid_argument("forward_window: extra feature size mismatch");

  SpmBatch batch;
  batch.rows = 1;
  batch.frames = nn::Tensor({1, 3 * cfg_.window, spec_.frame_size, spec_.frame_size});
  fill_frame_window(frames, cfg_.window, batch.frames.data());
  batch.actions = nn::Tensor({1, cfg_.window * spec_.action_dim});
  fill_action_window(actions, cfg_.window, spec_.action_dim, batch.actions.data());
  if (cfg_.extra_feature_dim > 0) {
    batch.extras = nn::Tensor({1, cfg_.extra_feature_dim});
    for (int j = 0; j < cfg_.extra_feature_dim; ++j)
      batch.extras.v[j] = static_cast<float>(extra[j]);
  }
  const ParamVector* cand_ptr = &candidate;
  fill_candidate_encodings(cfg_, p_max_, &candidate, std::span(&cand_ptr, 1),
                           batch.candidate_enc);
  forward_batch(batch);

  std::vector<double> probs(n_params_);
  for (size_t i = 0; i < n_params_; ++i)
    probs[i] = clamp_prob(nn::sigmoid(batch.logits.v[i]));
  return probs;
}

std::vector<double> SpmModel::predict(const envs::Trajectory& traj, const ParamVector& candidate) {
  const int T = static_cast<int>(traj.length());
  if (T < cfg_.window) throw std::invalid_argument("predict: trajectory shorter than window");
  const int n_windows = T / cfg_.window;

  SpmBatch batch;
  batch.rows = n_windows;
  batch.frames = nn::Tensor({n_windows, 3 * cfg_.window, spec_.frame_size, spec_.frame_size});
  batch.actions = nn::Tensor({n_windows, cfg_.window * spec_.action_dim});
  const size_t frame_stride = batch.frames.numel() / n_windows;
  const size_t act_stride = batch.actions.numel() / n_windows;
  for (int wi = 0; wi < n_windows; ++wi) {
    const int start = wi * cfg_.window;
    fill_frame_window(std::span(traj.frames).subspan(start, cfg_.window), cfg_.window,
                      batch.frames.data() + wi * frame_stride);
    fill_action_window(std::span(traj.actions).subspan(start, cfg_.window), cfg_.window,
                       spec_.action_dim, batch.actions.data() + wi * act_stride);
  }
  if (cfg_.extra_feature_dim > 0)
    batch.extras = nn::Tensor({n_windows, cfg_.extra_feature_dim});
  std::vector<const ParamVector*> cands(n_windows, &candidate);
  fill_candidate_encodings(cfg_, p_max_, &candidate, cands, batch.candidate_enc);
  forward_batch(batch);

  std::vector<double> probs(n_params_, 0.0);
  for (size_t i = 0; i < n_params_; ++i) {
    double acc = 0.0;
    for (int b = 0; b < n_windows; ++b)
      acc += clamp_prob(nn::sigmoid(batch.logits.v[static_cast<size_t>(b) * n_params_ + i]));
    probs[i] = acc / n_windows;
  }
  return probs;
}

namespace {

std::vector<SpmRow> assemble_rows(const std::deque<envs::Trajectory>& buffer,
                                  std::span<const size_t> indices, const ParamVector& dist_mean,
                                  const SpmConfig& cfg, int pairs_per_traj, int rows_wanted,
                                  Rng& rng) {
  std::vector<SpmRow> rows;
  rows.reserve(rows_wanted);
  while (static_cast<int>(rows.size()) < rows_wanted) {
    const size_t idx = indices[rng.uniform_int(static_cast<int>(indices.size()))];
    auto pairs = make_training_pairs(buffer[idx], dist_mean, rng, pairs_per_traj, cfg);
    for (auto& p : pairs) {
      if (static_cast<int>(rows.size()) >= rows_wanted) break;
      rows.push_back({idx, std::move(p)});
    }
  }
  return rows;
}

void build_batch(const std::deque<envs::Trajectory>& buffer, std::span<const SpmRow> rows,
                 const envs::EnvSpec& spec, const SpmConfig& cfg,
                 const std::vector<double>& p_max, const ParamVector* tracked_mean,
                 SpmBatch& batch) {
  const int B = static_cast<int>(rows.size());
  const size_t n = p_max.size();
  batch.rows = B;
  batch.frames = nn::Tensor({B, 3 * cfg.window, spec.frame_size, spec.frame_size});
  batch.actions = nn::Tensor({B, cfg.window * spec.action_dim});
  if (cfg.extra_feature_dim > 0) batch.extras = nn::Tensor({B, cfg.extra_feature_dim});
  batch.labels = nn::Tensor({B, static_cast<int>(n)});
  batch.mask = nn::Tensor({B, static_cast<int>(n)});
  const size_t frame_stride = batch.frames.numel() / B;
  const size_t act_stride = batch.actions.numel() / B;

#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const auto& row = rows[b];
    const auto& traj = buffer[row.traj_index];
    fill_frame_window(std::span(traj.frames).subspan(row.pair.window_start, cfg.window),
                      cfg.window, batch.frames.data() + b * frame_stride);
    fill_action_window(std::span(traj.actions).subspan(row.pair.window_start, cfg.window),
                       cfg.window, spec.action_dim, batch.actions.data() + b * act_stride);
    for (size_t i = 0; i < n; ++i) {
      batch.labels.v[static_cast<size_t>(b) * n + i] = row.pair.label[i];
      batch.mask.v[static_cast<size_t>(b) * n + i] = row.pair.mask[i];
    }
  }

  std::vector<const ParamVector*> cands(B);
  for (int b = 0; b < B; ++b) cands[b] = &rows[b].pair.candidate;
  fill_candidate_encodings(cfg, p_max, tracked_mean, cands, batch.candidate_enc);
}

}  // namespace

double SpmModel::train_step(const std::deque<envs::Trajectory>& buffer,
                            std::span<const size_t> train_indices, const ParamVector& dist_mean,
                            const TrainOptions& options, Rng& rng,
                            std::vector<SpmRow>* row_cache) {
  std::vector<SpmRow> fresh;
  if (row_cache == nullptr || row_cache->empty()) {
    fresh = assemble_rows(buffer, train_indices, dist_mean, cfg_, cfg_.pairs_per_traj,
                          options.batch_size, rng);
    if (options.scramble_labels) {
      for (auto& row : fresh)
        for (auto& l : row.pair.label) l = rng.coin() ? 1 : 0;
    }
    if (row_cache != nullptr) *row_cache = fresh;
  }
  const std::vector<SpmRow>& rows = (row_cache && !row_cache->empty() && fresh.empty())
                                        ? *row_cache
                                        : fresh;

  SpmBatch batch;
  build_batch(buffer, rows, spec_, cfg_, p_max_, &dist_mean, batch);
  forward_batch(batch);

  nn::Tensor dlogits;
  const double loss = nn::logistic_loss(batch.logits, batch.labels, batch.mask, dlogits);

  for (auto* g : all_grads_) g->fill(0.0f);
  const int B = batch.rows;
  nn::Tensor denc({B, kEncoderOut});
  for (size_t i = 0; i < n_params_; ++i) {
    nn::Tensor dcol({B, 1});
    for (int b = 0; b < B; ++b)
      dcol.v[b] = dlogits.v[static_cast<size_t>(b) * n_params_ + i];
    nn::Tensor dhead = heads_[i].backward(dcol);
    for (int b = 0; b < B; ++b) {
      const float* src = dhead.data() + static_cast<size_t>(b) * dhead.dim(1);
      float* dst = denc.data() + static_cast<size_t>(b) * kEncoderOut;
      for (int j = 0; j < kEncoderOut; ++j) dst[j] += src[j];
    }
  }
  encoder_.backward(denc, false);
  adam_.step(all_params_, all_grads_);
  check_finite_or_throw(all_params_, loss, "SpmModel");
  return loss;
}

TrainMetrics SpmModel::train(const std::deque<envs::Trajectory>& buffer,
                             const ParamVector& dist_mean, const TrainOptions& options,
                             Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("train_spm: empty buffer");

  std::vector<size_t> train_idx, held_idx;
  for (size_t i = 0; i < buffer.size(); ++i) {
    if (buffer.size() >= 10 && i % 10 == 9)
      held_idx.push_back(i);
    else
      train_idx.push_back(i);
  }

  const uint64_t eval_seed = rng.next_u64();

  TrainMetrics metrics;
  metrics.loss_curve.reserve(options.steps);
  std::vector<SpmRow> row_cache;
  for (int s = 0; s < options.steps; ++s)
    metrics.loss_curve.push_back(train_step(buffer, train_idx, dist_mean, options, rng,
                                            options.fixed_batch ? &row_cache : nullptr));

  if (!held_idx.empty()) {
    Rng eval_rng(derive_seed(eval_seed, stream::kEval));
    std::vector<SpmRow> rows;
    for (size_t idx : held_idx) {
      auto pairs =
          make_training_pairs(buffer[idx], dist_mean, eval_rng, kEvalPairsPerTraj, cfg_);
      for (auto& p : pairs) rows.push_back({idx, std::move(p)});
    }
    metrics.heldout_pairs = static_cast<int>(rows.size());
    std::vector<double> correct(n_params_, 0.0), total(n_params_, 0.0);
    for (size_t off = 0; off < rows.size(); off += 128) {
      const size_t chunk = std::min<size_t>(128, rows.size() - off);
      SpmBatch batch;
      build_batch(buffer, std::span(rows).subspan(off, chunk), spec_, cfg_, p_max_, &dist_mean,
                  batch);
      forward_batch(batch);
      for (size_t b = 0; b < chunk; ++b) {
        const auto& row = rows[off + b];
        for (size_t i = 0; i < n_params_; ++i) {
          if (!row.pair.mask[i]) continue;
          const bool pred =
              nn::sigmoid(batch.logits.v[b * n_params_ + i]) > 0.5;
          correct[i] += (pred == (row.pair.label[i] != 0)) ? 1.0 : 0.0;
          total[i] += 1.0;
        }
      }
    }
    metrics.heldout_accuracy.resize(n_params_);
    for (size_t i = 0; i < n_params_; ++i)
      metrics.heldout_accuracy[i] = total[i] > 0.0 ? correct[i] / total[i] : 0.5;
  }
  return metrics;
}

void SpmModel::save(const std::filesystem::path& path) {
  nn::NamedTensorsConst named;
  nn::Tensor step_tensor({1});
  step_tensor.v[0] = static_cast<float>(adam_.step_count());
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("p" + std::to_string(k), all_params_[k]);
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("m" + std::to_string(k), &adam_.moments1()[k]);
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("v" + std::to_string(k), &adam_.moments2()[k]);
  named.emplace_back("adam_t", &step_tensor);
  nn::save_checkpoint(path, named);
}

void SpmModel::load(const std::filesystem::path& path) {
  nn::NamedTensors named;
  nn::Tensor step_tensor({1});
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("p" + std::to_string(k), all_params_[k]);
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("m" + std::to_string(k), &adam_.moments1()[k]);
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("v" + std::to_string(k), &adam_.moments2()[k]);
  named.emplace_back("adam_t", &step_tensor);
  nn::load_checkpoint(path, named);
  adam_.set_step_count(static_cast<long>(step_tensor.v[0]));
}

// ---- regression baseline ----------------------------------------------------

RegressionModel::RegressionModel(const envs::EnvSpec& spec, const ParamVector& initial_mean,
                                 const SpmConfig& cfg, uint64_t init_seed)
    : spec_(spec), cfg_(cfg), n_params_(spec.schema.size()) {
  if (initial_mean.size() != n_params_)
    throw std::invalid_argument("RegressionModel: initial mean size mismatch");
  p_max_.resize(n_params_);
  for (size_t i = 0; i < n_params_; ++i) p_max_[i] = 2.0 * initial_mean[i];

  Rng rng(derive_seed(init_seed, stream::kModelInit, 0x4e6));
  encoder_ = make_encoder(spec_, cfg_.window);
  encoder_.init_he_uniform(rng);
  const int head_in = kEncoderOut + cfg_.window * spec_.action_dim + cfg_.extra_feature_dim;
  head_.add<nn::DenseT<float>>(head_in, kHeadHidden);
  head_.add<nn::ReluT<float>>();
  head_.add<nn::DenseT<float>>(kHeadHidden, kHeadHidden);
  head_.add<nn::ReluT<float>>();
  head_.add<nn::DenseT<float>>(kHeadHidden, static_cast<int>(n_params_));
  head_.init_he_uniform(rng);

  all_params_ = encoder_.params();
  all_grads_ = encoder_.grads();
  for (auto* p : head_.params()) all_params_.push_back(p);
  for (auto* g : head_.grads()) all_grads_.push_back(g);
  adam_.lr = cfg_.learning_rate;
  adam_.init(all_params_);
}

std::vector<double> RegressionModel::forward_windows(const envs::Trajectory& traj) {
  const int T = static_cast<int>(traj.length());
  if (T < cfg_.window)
    throw std::invalid_argument("regress_predict: trajectory shorter than window");
  const int n_windows = T / cfg_.window;

  nn::Tensor frames({n_windows, 3 * cfg_.window, spec_.frame_size, spec_.frame_size});
  nn::Tensor actions({n_windows, cfg_.window * spec_.action_dim});
  const size_t frame_stride = frames.numel() / n_windows;
  const size_t act_stride = actions.numel() / n_windows;
  for (int wi = 0; wi < n_windows; ++wi) {
    const int start = wi * cfg_.window;
    fill_frame_window(std::span(traj.frames).subspan(start, cfg_.window), cfg_.window,
                      frames.data() + wi * frame_stride);
    fill_action_window(std::span(traj.actions).subspan(start, cfg_.window), cfg_.window,
                       spec_.action_dim, actions.data() + wi * act_stride);
  }
  const nn::Tensor& enc = encoder_.forward(std::move(frames));
  nn::Tensor enc_copy = enc;
  const nn::Tensor head_in = concat_cols({&enc_copy, &actions});
  const nn::Tensor& out = head_.forward(head_in);

  std::vector<double> mean(n_params_, 0.0);
  for (int b = 0; b < n_windows; ++b)
    for (size_t i = 0; i < n_params_; ++i)
      mean[i] += out.v[static_cast<size_t>(b) * n_params_ + i];
  for (auto& m : mean) m /= n_windows;
  return mean;
}

ParamVector RegressionModel::predict(const envs::Trajectory& traj) {
  const auto fractions = forward_windows(traj);
  ParamVector out;
  out.values.resize(n_params_);
  for (size_t i = 0; i < n_params_; ++i)
    out[i] = std::min(std::max(fractions[i], 0.0), 1.0) * p_max_[i];
  return out;
}

double RegressionModel::train_step(const std::deque<envs::Trajectory>& buffer,
                                   std::span<const size_t> train_indices,
                                   const TrainOptions& options, Rng& rng) {
  const int B = options.batch_size;
  nn::Tensor frames({B, 3 * cfg_.window, spec_.frame_size, spec_.frame_size});
  nn::Tensor actions({B, cfg_.window * spec_.action_dim});
  nn::Tensor targets({B, static_cast<int>(n_params_)});
  const size_t frame_stride = frames.numel() / B;
  const size_t act_stride = actions.numel() / B;

  struct Pick {
    size_t idx;
    int start;
  };
  std::vector<Pick> picks(B);
  for (int b = 0; b < B; ++b) {
    const size_t idx = train_indices[rng.uniform_int(static_cast<int>(train_indices.size()))];
    const auto& traj = buffer[idx];
    picks[b] = {idx,
                rng.uniform_int(static_cast<int>(traj.length()) - cfg_.window + 1)};
  }
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const auto& traj = buffer[picks[b].idx];
    fill_frame_window(std::span(traj.frames).subspan(picks[b].start, cfg_.window), cfg_.window,
                      frames.data() + b * frame_stride);
    fill_action_window(std::span(traj.actions).subspan(picks[b].start, cfg_.window),
                       cfg_.window, spec_.action_dim, actions.data() + b * act_stride);
    const auto& sim = *traj.gen_params;
    for (size_t i = 0; i < n_params_; ++i)
      targets.v[static_cast<size_t>(b) * n_params_ + i] =
          static_cast<float>(sim[i] / p_max_[i]);
  }

  const nn::Tensor& enc = encoder_.forward(std::move(frames));
  nn::Tensor enc_copy = enc;
  nn::Tensor head_in = concat_cols({&enc_copy, &actions});
  const nn::Tensor& out = head_.forward(head_in);

  nn::Tensor dout;
  const double loss = nn::mse_loss(out, targets, dout);

  for (auto* g : all_grads_) g->fill(0.0f);
  nn::Tensor dhead_in = head_.backward(dout);
  nn::Tensor denc({B, kEncoderOut});
  for (int b = 0; b < B; ++b) {
    const float* src = dhead_in.data() + static_cast<size_t>(b) * dhead_in.dim(1);
    std::copy(src, src + kEncoderOut, denc.data() + static_cast<size_t>(b) * kEncoderOut);
  }
  encoder_.backward(denc, false);
  adam_.step(all_params_, all_grads_);
  check_finite_or_throw(all_params_, loss, "RegressionModel");
  return loss;
}

TrainMetrics RegressionModel::train(const std::deque<envs::Trajectory>& buffer,
                                    const TrainOptions& options, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("train_regression: empty buffer");
  for (const auto& t : buffer)
    if (!t.gen_params.has_value())
      throw std::invalid_argument("train_regression: buffer trajectory lacks gen_params");

  std::vector<size_t> train_idx, held_idx;
  for (size_t i = 0; i < buffer.size(); ++i) {
    if (buffer.size() >= 10 && i % 10 == 9)
      held_idx.push_back(i);
    else
      train_idx.push_back(i);
  }

  TrainMetrics metrics;
  metrics.loss_curve.reserve(options.steps);
  for (int s = 0; s < options.steps; ++s)
    metrics.loss_curve.push_back(train_step(buffer, train_idx, options, rng));

  if (!held_idx.empty()) {
    // Held-out check: mean absolute error of the normalized prediction.
    metrics.heldout_error.assign(n_params_, 0.0);
    for (size_t idx : held_idx) {
      const ParamVector pred = predict(buffer[idx]);
      const ParamVector& sim = *buffer[idx].gen_params;
      for (size_t i = 0; i < n_params_; ++i)
        metrics.heldout_error[i] += std::abs(pred[i] - sim[i]) / p_max_[i];
    }
    for (auto& e : metrics.heldout_error) e /= static_cast<double>(held_idx.size());
    metrics.heldout_pairs = static_cast<int>(held_idx.size());
  }
  return metrics;
}

void RegressionModel::save(const std::filesystem::path& path) {
  nn::NamedTensorsConst named;
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("p" + std::to_string(k), all_params_[k]);
  nn::save_checkpoint(path, named);
}

void RegressionModel::load(const std::filesystem::path& path) {
  nn::NamedTensors named;
  for (size_t k = 0; k < all_params_.size(); ++k)
    named.emplace_back("p" + std::to_string(k), all_params_[k]);
  nn::load_checkpoint(path, named);
}

}  // namespace autotune::spm
