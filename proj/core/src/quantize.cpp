#include "semcodec/quantize.hpp"

#include <torch/torch.h>

#include "semcodec/errors.hpp"

namespace semcodec {

namespace {

torch::Tensor flatten_frames(const torch::Tensor& frames, std::int64_t dim) {
  if (frames.dim() < 1 || frames.size(-1) != dim) {
    throw ShapeError("frame dimension " + std::to_string(frames.dim() ? frames.size(-1) : 0) +
                     " does not match codebook dimension " + std::to_string(dim));
  }
  return frames.reshape({-1, dim});
}

std::vector<std::int64_t> batch_shape(const torch::Tensor& frames) {
  auto sizes = frames.sizes().vec();
  sizes.pop_back();
  return sizes;
}

// Index of the nearest entry for each row of `flat` ([N, d]).
torch::Tensor nearest(const torch::Tensor& flat, const torch::Tensor& entries) {
  torch::NoGradGuard guard;
  auto x = flat.detach().to(torch::kFloat64);
  auto e = entries.detach().to(torch::kFloat64);
  // ||x||^2 is constant per row and does not change the argmin.
  auto dist = e.pow(2).sum(1).unsqueeze(0) - 2.0 * torch::matmul(x, e.t());
  return dist.argmin(1);
}

void kmeans_init(Codebook& cb, const torch::Tensor& frames, const CodebookUpdateOptions& opts,
                 std::mt19937_64& rng) {
  torch::NoGradGuard guard;
  const auto n = frames.size(0);
  const auto k = cb.size();
  auto data = frames.detach().to(torch::kFloat32).contiguous();

  std::vector<std::int64_t> pick(static_cast<std::size_t>(k));
  if (n >= k) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::copy_n(order.begin(), k, pick.begin());
  } else {
    std::uniform_int_distribution<std::int64_t> dist(0, n - 1);
    for (auto& p : pick) p = dist(rng);
  }
  auto centers = data.index_select(0, torch::tensor(pick, torch::kInt64)).clone();

  for (int it = 0; it < opts.kmeans_iters; ++it) {
    auto ids = nearest(data, centers);
    auto counts = torch::bincount(ids, {}, k).to(torch::kFloat32);
    auto sums = torch::zeros_like(centers).index_add_(0, ids, data);
    auto used = counts > 0;
    auto means = sums / counts.clamp_min(1.0).unsqueeze(1);
    centers = torch::where(used.unsqueeze(1), means, centers);
  }

  cb.entries.copy_(centers);
  cb.ema_cluster_size.fill_(1.0);
  cb.ema_embed_sum.copy_(centers);
  cb.usage.zero_();
  cb.idle_windows.zero_();
  cb.window_step.zero_();
  cb.initialized.fill_(true);
}

void ensure_initialized(Codebook& cb, const torch::Tensor& flat, const QuantizerUpdate* update) {
  if (update == nullptr || flat.size(0) == 0) return;
  if (cb.initialized.item<bool>()) return;
  kmeans_init(cb, flat, update->options, *update->rng);
}

}  // namespace

Codebook::Codebook(std::int64_t size, std::int64_t dim) {
  if (size < 2) throw ConfigError("codebook size must be at least 2");
  if (dim < 1) throw ConfigError("codebook dimension must be positive");
  entries = torch::randn({size, dim}) / std::sqrt(static_cast<double>(dim));
  ema_cluster_size = torch::ones({size});
  ema_embed_sum = entries.clone();
  usage = torch::zeros({size}, torch::kInt64);
  idle_windows = torch::zeros({size}, torch::kInt64);
  window_step = torch::zeros({}, torch::kInt64);
  initialized = torch::zeros({}, torch::kBool);
}

Codebook Codebook::from_entries(const torch::Tensor& e) {
  if (e.dim() != 2) throw ShapeError("codebook entries must be [K, d]");
  Codebook cb(e.size(0), e.size(1));
  cb.entries.copy_(e.detach());
  cb.ema_embed_sum.copy_(e.detach());
  cb.initialized.fill_(true);
  return cb;
}

VqResult vq_encode(const torch::Tensor& frames, const Codebook& cb) {
  auto flat = flatten_frames(frames, cb.dim());
  auto shape = batch_shape(frames);
  torch::NoGradGuard guard;
  auto ids = nearest(flat, cb.entries);
  auto quantized = cb.entries.detach().index_select(0, ids).to(frames.scalar_type());
  auto qshape = shape;
  qshape.push_back(cb.dim());
  return {ids.reshape(shape), quantized.reshape(qshape)};
}

namespace {

RvqResult rvq_encode_impl(const torch::Tensor& frames, std::vector<Codebook>& stages,
                          const QuantizerUpdate* update) {
  if (stages.empty()) throw ConfigError("residual quantizer needs at least one stage");
  const auto d = stages.front().dim();
  flatten_frames(frames, d);

  RvqResult out;
  auto residual = frames;
  auto sum = torch::zeros_like(frames.detach());
  std::vector<torch::Tensor> ids;
  for (auto& cb : stages) {
    ensure_initialized(cb, residual.detach().reshape({-1, d}), update);
    auto vq = vq_encode(residual, cb);
    out.residuals.push_back(residual);
    out.stage_quantized.push_back(vq.quantized);
    ids.push_back(vq.ids);
    if (update != nullptr) {
      codebook_update(cb, residual.detach().reshape({-1, d}), vq.ids.reshape({-1}),
                      update->options, *update->rng);
    }
    sum = sum + vq.quantized;
    residual = residual - vq.quantized;
  }
  out.ids = torch::stack(ids, -1);
  out.quantized_sum = sum;
  return out;
}

}  // namespace

RvqResult rvq_encode(const torch::Tensor& frames, const std::vector<Codebook>& stages) {
  // Without an update the codebooks are only read.
  auto& mutable_stages = const_cast<std::vector<Codebook>&>(stages);
  return rvq_encode_impl(frames, mutable_stages, nullptr);
}

torch::Tensor straight_through(const torch::Tensor& pre_q, const torch::Tensor& post_q) {
  if (pre_q.sizes() != post_q.sizes()) throw ShapeError("straight_through shape mismatch");
  return post_q.detach() + (pre_q - pre_q.detach());
}

torch::Tensor commitment_loss(const std::vector<torch::Tensor>& pre_q,
                              const std::vector<torch::Tensor>& post_q) {
  if (pre_q.size() != post_q.size() || pre_q.empty()) {
    throw ShapeError("commitment_loss needs matching, non-empty stage lists");
  }
  torch::Tensor total;
  for (std::size_t i = 0; i < pre_q.size(); ++i) {
    if (pre_q[i].sizes() != post_q[i].sizes()) {
      throw ShapeError("commitment_loss stage " + std::to_string(i) + " shape mismatch");
    }
    auto term = (pre_q[i] - post_q[i].detach()).pow(2).mean();
    total = total.defined() ? total + term : term;
  }
  return total;
}

void codebook_update(Codebook& cb, const torch::Tensor& frames, const torch::Tensor& ids,
                     const CodebookUpdateOptions& opts, std::mt19937_64& rng) {
  torch::NoGradGuard guard;
  auto flat = flatten_frames(frames, cb.dim()).detach().to(torch::kFloat32);
  if (flat.size(0) == 0) return;
  if (!cb.initialized.item<bool>()) {
    kmeans_init(cb, flat, opts, rng);
    return;
  }
  const auto k = cb.size();
  auto assign = ids.reshape({-1}).to(torch::kInt64);
  if (assign.size(0) != flat.size(0)) throw ShapeError("ids and frames disagree in count");

  auto counts = torch::bincount(assign, {}, k);
  cb.usage.add_(counts);
  if (opts.decay >= 1.0) return;

  const double decay = opts.decay;
  auto batch_sum = torch::zeros({k, cb.dim()}).index_add_(0, assign, flat);
  cb.ema_cluster_size.mul_(decay).add_(counts.to(torch::kFloat32), 1.0 - decay);
  cb.ema_embed_sum.mul_(decay).add_(batch_sum, 1.0 - decay);
  auto n = cb.ema_cluster_size.sum();
  auto smoothed = (cb.ema_cluster_size + opts.epsilon) / (n + k * opts.epsilon) * n;
  cb.entries.copy_(cb.ema_embed_sum / smoothed.unsqueeze(1));

  cb.window_step.add_(1);
  if (cb.window_step.item<std::int64_t>() < opts.window_steps) return;

  auto total = cb.usage.sum().item<std::int64_t>();
  auto share = cb.usage.to(torch::kFloat64) / static_cast<double>(std::max<std::int64_t>(total, 1));
  auto idle = share < opts.dead_share;
  cb.idle_windows.copy_(torch::where(idle, cb.idle_windows + 1, torch::zeros_like(cb.idle_windows)));
  auto dead = (cb.idle_windows >= opts.dead_windows).nonzero().reshape({-1});
  std::uniform_int_distribution<std::int64_t> pick(0, flat.size(0) - 1);
  auto dead_acc = dead.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < dead.size(0); ++i) {
    const auto code = dead_acc[i];
    auto sample = flat[pick(rng)];
    cb.entries[code].copy_(sample);
    cb.ema_embed_sum[code].copy_(sample);
    cb.ema_cluster_size[code].fill_(1.0);
    cb.idle_windows[code].fill_(0);
  }
  cb.usage.zero_();
  cb.window_step.zero_();
}

void TokenSequence::validate() const {
  if (acoustic_codebook_sizes.size() != kNumAcousticQuantizers) {
    throw ShapeError("token sequence needs " + std::to_string(kNumAcousticQuantizers) +
                     " acoustic codebook sizes");
  }
  if (acoustic_ids.size() != semantic_ids.size() * kNumAcousticQuantizers) {
    throw ShapeError("semantic and acoustic id streams disagree in length");
  }
  for (std::size_t t = 0; t < semantic_ids.size(); ++t) {
    if (semantic_ids[t] < 0 || semantic_ids[t] >= semantic_codebook_size) {
      throw RangeError("semantic id " + std::to_string(semantic_ids[t]) + " at frame " +
                       std::to_string(t) + " out of range");
    }
  }
  for (std::size_t i = 0; i < acoustic_ids.size(); ++i) {
    const auto k = i % kNumAcousticQuantizers;
    if (acoustic_ids[i] < 0 || acoustic_ids[i] >= acoustic_codebook_sizes[k]) {
      throw RangeError("acoustic id " + std::to_string(acoustic_ids[i]) + " at frame " +
                       std::to_string(i / kNumAcousticQuantizers) + ", stage " +
                       std::to_string(k) + " out of range");
    }
  }
}

QuantizerStackImpl::QuantizerStackImpl(std::int64_t semantic_size,
                                       std::vector<std::int64_t> acoustic_sizes,
                                       std::int64_t dim)
    : dim_(dim) {
  if (acoustic_sizes.size() != kNumAcousticQuantizers) {
    throw ConfigError("split RVQ needs exactly " + std::to_string(kNumAcousticQuantizers) +
                      " acoustic quantizers");
  }
  semantic_ = Codebook(semantic_size, dim);
  register_codebook("semantic", semantic_);
  acoustic_.reserve(acoustic_sizes.size());
  for (std::size_t j = 0; j < acoustic_sizes.size(); ++j) {
    acoustic_.emplace_back(acoustic_sizes[j], dim);
    register_codebook("acoustic" + std::to_string(j), acoustic_.back());
  }
}

void QuantizerStackImpl::register_codebook(const std::string& prefix, Codebook& cb) {
  cb.entries = register_buffer(prefix + "_entries", cb.entries);
  cb.ema_cluster_size = register_buffer(prefix + "_ema_cluster_size", cb.ema_cluster_size);
  cb.ema_embed_sum = register_buffer(prefix + "_ema_embed_sum", cb.ema_embed_sum);
  cb.usage = register_buffer(prefix + "_usage", cb.usage);
  cb.idle_windows = register_buffer(prefix + "_idle_windows", cb.idle_windows);
  cb.window_step = register_buffer(prefix + "_window_step", cb.window_step);
  cb.initialized = register_buffer(prefix + "_initialized", cb.initialized);
}

SplitQuantized split_rvq(const torch::Tensor& h_sem, const torch::Tensor& h_ac,
                         QuantizerStackImpl& q, const QuantizerUpdate* update) {
  if (h_sem.sizes() != h_ac.sizes()) {
    throw ShapeError("semantic and acoustic features must share shape");
  }
  if (h_sem.size(-1) != q.dim()) throw ShapeError("feature dim does not match quantizer dim");
  if (update != nullptr && update->rng == nullptr) {
    throw ConfigError("quantizer update requires an RNG");
  }
  const auto d = q.dim();

  SplitQuantized out;
  ensure_initialized(q.semantic(), h_sem.detach().reshape({-1, d}), update);
  auto sem = vq_encode(h_sem, q.semantic());
  if (update != nullptr) {
    codebook_update(q.semantic(), h_sem.detach().reshape({-1, d}), sem.ids.reshape({-1}),
                    update->options, *update->rng);
  }
  auto ac = rvq_encode_impl(h_ac, q.acoustic(), update);

  out.semantic_ids = sem.ids;
  out.acoustic_ids = ac.ids;
  out.z_sem = straight_through(h_sem, sem.quantized);
  out.z_ac = straight_through(h_ac, ac.quantized_sum);
  out.pre_q.push_back(h_sem);
  out.post_q.push_back(sem.quantized);
  for (std::size_t j = 0; j < ac.residuals.size(); ++j) {
    out.pre_q.push_back(ac.residuals[j]);
    out.post_q.push_back(ac.stage_quantized[j]);
  }
  return out;
}

DecodedTokens decode_tokens(const TokenSequence& t, const QuantizerStackImpl& q) {
  t.validate();
  if (t.semantic_codebook_size != q.semantic().size()) {
    throw RangeError("token semantic codebook size does not match the quantizer");
  }
  for (int k = 0; k < kNumAcousticQuantizers; ++k) {
    if (t.acoustic_codebook_sizes[static_cast<std::size_t>(k)] != q.acoustic()[k].size()) {
      throw RangeError("token acoustic codebook size does not match stage " + std::to_string(k));
    }
  }
  torch::NoGradGuard guard;
  const auto frames = t.frames();
  auto sem_ids = torch::tensor(std::vector<std::int64_t>(t.semantic_ids.begin(),
                                                          t.semantic_ids.end()),
                               torch::kInt64);
  auto ac_ids = torch::tensor(std::vector<std::int64_t>(t.acoustic_ids.begin(),
                                                         t.acoustic_ids.end()),
                              torch::kInt64)
                    .reshape({frames, kNumAcousticQuantizers});
  DecodedTokens out;
  out.z_sem = q.semantic().entries.index_select(0, sem_ids);
  auto sum = torch::zeros({frames, q.dim()});
  for (int k = 0; k < kNumAcousticQuantizers; ++k) {
    sum = sum + q.acoustic()[k].entries.index_select(0, ac_ids.select(1, k).contiguous());
  }
  out.z_ac = sum;
  return out;
}

TokenSequence to_token_sequence(const SplitQuantized& s, std::int64_t b, double frame_rate,
                                const QuantizerStackImpl& q) {
  auto sem = s.semantic_ids.dim() == 1 ? s.semantic_ids : s.semantic_ids[b];
  auto ac = s.acoustic_ids.dim() == 2 ? s.acoustic_ids : s.acoustic_ids[b];
  sem = sem.to(torch::kInt32).contiguous();
  ac = ac.to(torch::kInt32).contiguous();

  TokenSequence t;
  t.frame_rate = frame_rate;
  t.semantic_codebook_size = q.semantic().size();
  for (const auto& cb : q.acoustic()) t.acoustic_codebook_sizes.push_back(cb.size());
  t.semantic_ids.assign(sem.data_ptr<std::int32_t>(), sem.data_ptr<std::int32_t>() + sem.numel());
  t.acoustic_ids.assign(ac.data_ptr<std::int32_t>(), ac.data_ptr<std::int32_t>() + ac.numel());
  return t;
}

}  // namespace semcodec
