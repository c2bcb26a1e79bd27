#include "semcodec/klgauss.hpp"

#include <cmath>

#include <torch/torch.h>

#include "semcodec/errors.hpp"

namespace semcodec {

namespace {

void require_positive(double sigma, const char* name) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw RangeError(std::string(name) + " must be positive and finite, got " + std::to_string(sigma));
  }
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("mean vectors differ in dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<double> offset(const std::vector<double>& mu, const std::vector<double>& gap) {
  if (mu.size() != gap.size()) throw ShapeError("mean gap differs in dimension");
  std::vector<double> out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = mu[i] + gap[i];
  return out;
}

}  // namespace

double kl_feature(const GaussianStats& t, const GaussianStats& s) {
  require_positive(t.sigma, "teacher sigma");
  require_positive(s.sigma, "student sigma");
  if (t.dim() == 0) throw ShapeError("dimension must be >= 1");
  const double d = static_cast<double>(t.dim());
  const double gap = squared_distance(s.mu, t.mu);
  const double r = t.sigma / s.sigma;
  return 0.5 * (gap / s.sigma + d * (r - 1.0 - std::log(r)));
}

double kl_recon(const GaussianStats& t, const std::vector<double>& mu_hat) {
  require_positive(t.sigma, "teacher sigma");
  if (t.dim() == 0) throw ShapeError("dimension must be >= 1");
  return 0.5 * squared_distance(mu_hat, t.mu) / t.sigma;
}

KlComparison check_inequality(const GaussianStats& teacher, double student_sigma,
                              const std::vector<double>& mu_gap_feat,
                              const std::vector<double>& mu_gap_recon) {
  KlComparison c;
  c.kl_feature = kl_feature(teacher, {offset(teacher.mu, mu_gap_feat), student_sigma});
  c.kl_recon = kl_recon(teacher, offset(teacher.mu, mu_gap_recon));
  c.feature_exceeds_recon = c.kl_feature > c.kl_recon;
  c.sigma_teacher = teacher.sigma;
  c.sigma_student = student_sigma;
  c.dim = teacher.dim();
  return c;
}

GaussianStats fit_gaussian_stats(const torch::Tensor& features) {
  if (features.dim() != 2) throw ShapeError("features must be [N, d]");
  if (features.size(0) < 2) throw RangeError("need at least 2 rows to fit statistics");
  auto f = features.to(torch::kFloat64);
  auto mu = f.mean(0);
  const double sigma = f.var(0, /*unbiased=*/false).mean().item<double>();
  if (!(sigma > 0.0)) throw RangeError("degenerate features: zero variance");
  GaussianStats g;
  g.mu.assign(mu.data_ptr<double>(), mu.data_ptr<double>() + mu.numel());
  g.sigma = sigma;
  return g;
}

nlohmann::json to_json(const KlComparison& c) {
  return {{"kl_feature", c.kl_feature},       {"kl_recon", c.kl_recon},
          {"feature_exceeds_recon", c.feature_exceeds_recon},
          {"sigma_teacher", c.sigma_teacher}, {"sigma_student", c.sigma_student},
          {"d", c.dim}};
}

}  // namespace semcodec
