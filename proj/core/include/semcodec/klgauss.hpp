#pragma once

#include <vector>

#include <json.hpp>
#include <torch/types.h>

namespace semcodec {

// Isotropic Gaussian N(mu, sigma * I); sigma is the per-dimension variance.
struct GaussianStats {
  std::vector<double> mu;
  double sigma = 1.0;

  std::size_t dim() const { return mu.size(); }
};

// KL(N_T || N_S) = 1/2 [ |mu_S - mu_T|^2 / sigma_S - d + d log(sigma_S / sigma_T) + d sigma_T / sigma_S ].
// Throws RangeError on a non-positive sigma, ShapeError on a dimension mismatch.
double kl_feature(const GaussianStats& teacher, const GaussianStats& student);

// KL between N(mu_T, sigma_T I) and N(mu_hat, sigma_T I): |mu_hat - mu_T|^2 / (2 sigma_T).
double kl_recon(const GaussianStats& teacher, const std::vector<double>& mu_hat);

struct KlComparison {
  double kl_feature = 0.0;
  double kl_recon = 0.0;
  bool feature_exceeds_recon = false;
  double sigma_teacher = 0.0;
  double sigma_student = 0.0;
  std::size_t dim = 0;
};

// Student features: mean mu_T + mu_gap_feat, variance student_sigma.
// Reconstruction path: mean mu_T + mu_gap_recon, variance sigma_T.
KlComparison check_inequality(const GaussianStats& teacher, double student_sigma,
                              const std::vector<double>& mu_gap_feat,
                              const std::vector<double>& mu_gap_recon);

// Column means and the mean population (1/N) variance over dimensions.
// features: [N, d] with N >= 2. Throws RangeError when the variance is 0.
GaussianStats fit_gaussian_stats(const torch::Tensor& features);

nlohmann::json to_json(const KlComparison& c);

}  // namespace semcodec
