#include "semcodec/teacher.hpp"

#include <filesystem>

#include <torch/script.h>
#include <torch/torch.h>

#include "semcodec/digest.hpp"
#include "semcodec/errors.hpp"

namespace F = torch::nn::functional;

namespace semcodec {

StandinTeacherImpl::StandinTeacherImpl(const TeacherConfig& cfg)
    : strides_(cfg.strides), normalize_(cfg.normalize) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  norms_ = register_module("norms", torch::nn::ModuleList());
  int in = 1;
  for (std::size_t i = 0; i < cfg.strides.size(); ++i) {
    const int s = cfg.strides[i];
    torch::nn::Conv1d conv(torch::nn::Conv1dOptions(in, cfg.channels[i], 2 * s).stride(s));
    torch::nn::init::zeros_(conv->bias);
    convs_->push_back(conv);
    norms_->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.channels[i]})));
    in = cfg.channels[i];
  }
  project_ = register_module("project", torch::nn::Linear(in, cfg.dim));
  transformer_ = register_module(
      "transformer",
      TransformerStack(cfg.dim, cfg.transformer_heads, cfg.transformer_ffn, cfg.transformer_layers));
}

torch::Tensor StandinTeacherImpl::forward(const torch::Tensor& wav) {
  auto x = (wav.dim() == 1 ? wav.unsqueeze(0) : wav).unsqueeze(1);
  for (std::size_t i = 0; i < strides_.size(); ++i) {
    const int s = strides_[i];
    x = F::pad(x, F::PadFuncOptions({(s + 1) / 2, s / 2}));
    x = convs_[i]->as<torch::nn::Conv1d>()->forward(x);
    x = norms_[i]->as<torch::nn::LayerNorm>()->forward(x.transpose(1, 2)).transpose(1, 2);
    x = F::gelu(x);
  }
  auto h = transformer_->forward(project_->forward(x.transpose(1, 2)));
  if (normalize_) h = F::layer_norm(h, F::LayerNormFuncOptions({h.size(-1)}));
  return h;
}

namespace {

class StandinBackend final : public Teacher {
 public:
  explicit StandinBackend(const TeacherConfig& cfg) : cfg_(cfg), net_(nullptr) {
    // Construction must not depend on, or disturb, the global RNG stream.
    auto gen = at::detail::getDefaultCPUGenerator();
    torch::Tensor saved;
    {
      std::lock_guard<std::mutex> lock(gen.mutex());
      saved = gen.get_state();
    }
    torch::manual_seed(cfg.seed);
    net_ = StandinTeacher(cfg);
    {
      std::lock_guard<std::mutex> lock(gen.mutex());
      gen.set_state(saved);
    }
    if (!cfg.weights.empty()) {
      if (!std::filesystem::exists(cfg.weights)) {
        throw IoError("teacher weights not found: " + cfg.weights);
      }
      torch::load(net_, cfg.weights);
    }
    for (auto& p : net_->parameters()) p.set_requires_grad(false);
    net_->eval();
  }

  torch::Tensor encode(const torch::Tensor& wav) override { return net_->forward(wav); }
  double frame_rate() const override { return cfg_.frame_rate; }
  int dim() const override { return cfg_.dim; }
  std::string backend() const override { return "standin"; }
  std::string digest() const override { return parameter_digest(*net_); }

 private:
  TeacherConfig cfg_;
  StandinTeacher net_;
};

class TorchScriptBackend final : public Teacher {
 public:
  explicit TorchScriptBackend(const TeacherConfig& cfg) : cfg_(cfg) {
    if (cfg.weights.empty() || !std::filesystem::exists(cfg.weights)) {
      throw IoError("teacher weights not found: " + cfg.weights);
    }
    try {
      module_ = torch::jit::load(cfg.weights);
    } catch (const c10::Error& e) {
      throw IoError("cannot load teacher module " + cfg.weights + ": " + e.what_without_backtrace());
    }
    module_.eval();
    for (auto p : module_.parameters()) p.set_requires_grad(false);

    torch::NoGradGuard guard;
    auto probe = encode(torch::zeros({1, 16000}));
    if (probe.dim() != 3) throw FormatError("teacher module must return [B, T, d] features");
    dim_ = static_cast<int>(probe.size(-1));
  }

  torch::Tensor encode(const torch::Tensor& wav) override {
    auto x = wav.dim() == 1 ? wav.unsqueeze(0) : wav;
    return module_.forward({x}).toTensor();
  }
  double frame_rate() const override { return cfg_.frame_rate; }
  int dim() const override { return dim_; }
  std::string backend() const override { return "torchscript"; }
  std::string digest() const override {
    std::string bytes;
    for (const auto& p : module_.named_parameters()) {
      auto c = p.value.detach().contiguous();
      bytes += p.name;
      bytes.append(static_cast<const char*>(c.data_ptr()),
                   static_cast<std::size_t>(c.numel()) * c.element_size());
    }
    return sha256_hex(bytes);
  }

 private:
  TeacherConfig cfg_;
  torch::jit::Module module_;
  int dim_ = 0;
};

}  // namespace

std::unique_ptr<Teacher> make_teacher(const TeacherConfig& cfg) {
  if (cfg.backend == "standin") return std::make_unique<StandinBackend>(cfg);
  if (cfg.backend == "torchscript") return std::make_unique<TorchScriptBackend>(cfg);
  throw ConfigError("unknown teacher backend '" + cfg.backend + "'");
}

TeacherFeatures teacher_encode(Teacher& teacher, const Waveform& x) {
  torch::NoGradGuard guard;
  TeacherFeatures f;
  f.features = teacher.encode(to_tensor(x)).squeeze(0);
  f.frame_rate = teacher.frame_rate();
  return f;
}

std::pair<torch::Tensor, torch::Tensor> align_truncate(const torch::Tensor& a,
                                                       const torch::Tensor& b) {
  if (a.size(-1) != b.size(-1)) throw ShapeError("teacher feature dimensions differ");
  const auto t = std::min(a.size(-2), b.size(-2));
  if (t <= 0) throw ShapeError("teacher feature sequences do not overlap");
  return {a.narrow(-2, 0, t), b.narrow(-2, 0, t)};
}

std::pair<torch::Tensor, torch::Tensor> align_truncate(const TeacherFeatures& a,
                                                       const TeacherFeatures& b) {
  return align_truncate(a.features, b.features);
}

}  // namespace semcodec
