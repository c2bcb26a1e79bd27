#include "semcodec/losses.hpp"

#include <cmath>

#include <torch/torch.h>

#include "semcodec/errors.hpp"

namespace F = torch::nn::functional;

namespace semcodec {

NonFiniteLoss::NonFiniteLoss(const std::string& component, double value, const std::string& note)
    : Error("non-finite loss component '" + component + "' (" + std::to_string(value) + ")" +
            (note.empty() ? "" : "; " + note)),
      component_(component),
      value_(value) {}

torch::Tensor distill_recon(Teacher& teacher, const torch::Tensor& x,
                            const torch::Tensor& x_hat_sem) {
  torch::Tensor target;
  {
    torch::NoGradGuard guard;
    target = teacher.encode(x);
  }
  auto pred = teacher.encode(x_hat_sem);
  auto [a, b] = align_truncate(target, pred);
  return (a - b).pow(2).mean();
}

torch::Tensor average_pool_time(const torch::Tensor& feats, std::int64_t factor) {
  if (factor < 1) throw ConfigError("pooling factor must be >= 1");
  auto x = feats.dim() == 2 ? feats.unsqueeze(0) : feats;
  const auto frames = x.size(1) / factor;
  if (frames == 0) throw ShapeError("too few teacher frames to pool");
  auto pooled = x.narrow(1, 0, frames * factor)
                    .reshape({x.size(0), frames, factor, x.size(2)})
                    .mean(2);
  return feats.dim() == 2 ? pooled.squeeze(0) : pooled;
}

torch::Tensor distill_feature(const torch::Tensor& student, const torch::Tensor& teacher_feats,
                              double teacher_rate, double pool_to) {
  if (pool_to <= 0.0 || teacher_rate <= 0.0) throw ConfigError("frame rates must be positive");
  const double ratio = teacher_rate / pool_to;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    throw ConfigError("teacher rate " + std::to_string(teacher_rate) +
                      " Hz is not an integer multiple of " + std::to_string(pool_to) + " Hz");
  }
  auto pooled = average_pool_time(teacher_feats.detach(), static_cast<std::int64_t>(rounded));
  auto [s, t] = align_truncate(student, pooled);
  return -F::cosine_similarity(s, t, F::CosineSimilarityFuncOptions().dim(-1).eps(1e-8)).mean();
}

torch::Tensor gen_hinge_loss(const DiscriminatorOutputs& fake) {
  if (fake.empty()) throw ShapeError("no discriminator outputs");
  torch::Tensor total;
  for (const auto& d : fake) {
    auto term = torch::relu(1.0 - d.logits).mean();
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(fake.size());
}

torch::Tensor disc_hinge_loss(const DiscriminatorOutputs& real, const DiscriminatorOutputs& fake) {
  if (real.size() != fake.size() || real.empty()) {
    throw ShapeError("real and fake discriminator outputs differ in count");
  }
  torch::Tensor total;
  for (std::size_t k = 0; k < real.size(); ++k) {
    auto term = torch::relu(1.0 - real[k].logits).mean() + torch::relu(1.0 + fake[k].logits).mean();
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(real.size());
}

torch::Tensor feature_matching_loss(const DiscriminatorOutputs& real,
                                    const DiscriminatorOutputs& fake) {
  if (real.size() != fake.size() || real.empty()) {
    throw ShapeError("real and fake discriminator outputs differ in count");
  }
  torch::Tensor total;
  for (std::size_t k = 0; k < real.size(); ++k) {
    const auto& rf = real[k].features;
    const auto& ff = fake[k].features;
    if (rf.size() != ff.size() || rf.empty()) throw ShapeError("discriminator layer count mismatch");
    torch::Tensor per_disc;
    for (std::size_t l = 0; l < rf.size(); ++l) {
      auto r = rf[l].detach();
      auto term = (r - ff[l]).abs().mean() / r.abs().mean().clamp_min(kFeatureMatchingEps);
      per_disc = per_disc.defined() ? per_disc + term : term;
    }
    per_disc = per_disc / static_cast<double>(rf.size());
    total = total.defined() ? total + per_disc : per_disc;
  }
  return total / static_cast<double>(real.size());
}

std::map<std::string, double> LossParts::values() const {
  auto v = [](const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; };
  return {{"loss_t", v(time)},        {"loss_f_l1", v(mel_l1)}, {"loss_f_l2", v(mel_l2)},
          {"loss_g", v(gen)},         {"loss_feat", v(feat)},   {"loss_com", v(commit)},
          {"loss_distill", v(distill)}};
}

torch::Tensor total_generator_loss(const LossParts& p, const LossWeights& w) {
  const std::pair<const char*, std::pair<const torch::Tensor*, double>> terms[] = {
      {"loss_t", {&p.time, w.time}},          {"loss_f_l1", {&p.mel_l1, w.mel_l1}},
      {"loss_f_l2", {&p.mel_l2, w.mel_l2}},   {"loss_g", {&p.gen, w.gen}},
      {"loss_feat", {&p.feat, w.feat}},       {"loss_com", {&p.commit, w.commit}},
      {"loss_distill", {&p.distill, w.distill}}};
  torch::Tensor total;
  for (const auto& [name, tw] : terms) {
    const auto& [tensor, weight] = tw;
    if (!tensor->defined()) continue;
    const double value = tensor->item<double>();
    if (!std::isfinite(value)) throw NonFiniteLoss(name, value);
    auto term = *tensor * weight;
    total = total.defined() ? total + term : term;
  }
  if (!total.defined()) return torch::zeros({});
  return total;
}

}  // namespace semcodec
