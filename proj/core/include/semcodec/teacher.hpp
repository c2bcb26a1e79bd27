#pragma once

#include <memory>
#include <string>
#include <utility>

#include <torch/nn.h>

#include "semcodec/audio.hpp"
#include "semcodec/config.hpp"
#include "semcodec/nets.hpp"

namespace semcodec {

struct TeacherFeatures {
  torch::Tensor features;  // [T, d] (or [B, T, d] from batched calls)
  double frame_rate = 50.0;

  std::int64_t frames() const { return features.size(-2); }
  std::int64_t dim() const { return features.size(-1); }
};

// A frozen speech encoder f_T. encode() is differentiable with respect to its
// input but never with respect to the teacher's own parameters.
class Teacher {
 public:
  virtual ~Teacher() = default;

  // [B, N] (or [N]) at 16 kHz -> [B, T, d].
  virtual torch::Tensor encode(const torch::Tensor& wav) = 0;
  virtual double frame_rate() const = 0;
  virtual int dim() const = 0;
  virtual std::string backend() const = 0;
  // SHA-256 of every teacher parameter; constant for the teacher's lifetime.
  virtual std::string digest() const = 0;
};

// Fixed-seed, randomly initialized conv + transformer encoder (total stride
// 320 -> 50 Hz at 16 kHz). Each conv block is conv, per-frame layer norm over
// channels, GELU.
class StandinTeacherImpl : public torch::nn::Module {
 public:
  StandinTeacherImpl(const TeacherConfig& cfg);
  torch::Tensor forward(const torch::Tensor& wav);

 private:
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::ModuleList norms_{nullptr};
  std::vector<int> strides_;
  torch::nn::Linear project_{nullptr};
  TransformerStack transformer_{nullptr};
  bool normalize_;
};
TORCH_MODULE(StandinTeacher);

// Builds the configured backend. Throws IoError when backend weights are missing.
std::unique_ptr<Teacher> make_teacher(const TeacherConfig& cfg);

TeacherFeatures teacher_encode(Teacher& teacher, const Waveform& x);

// Truncates both feature sequences to the shorter length along time.
std::pair<torch::Tensor, torch::Tensor> align_truncate(const TeacherFeatures& a,
                                                       const TeacherFeatures& b);
std::pair<torch::Tensor, torch::Tensor> align_truncate(const torch::Tensor& a,
                                                       const torch::Tensor& b);

}  // namespace semcodec
