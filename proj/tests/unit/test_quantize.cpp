#include <limits>
#include <random>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "semcodec/errors.hpp"
#include "semcodec/quantize.hpp"

using namespace semcodec;

namespace {

// Brute-force nearest entry, lowest index on ties.
std::int64_t brute_nearest(const torch::Tensor& x, const torch::Tensor& entries) {
  std::int64_t best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k < entries.size(0); ++k) {
    double d = 0.0;
    for (std::int64_t j = 0; j < entries.size(1); ++j) {
      const double diff = x[j].item<double>() - entries[k][j].item<double>();
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::vector<Codebook> random_stages(int n, std::int64_t size, std::int64_t dim, double scale0) {
  std::vector<Codebook> out;
  double s = scale0;
  for (int i = 0; i < n; ++i, s *= 0.5) out.push_back(Codebook::from_entries(torch::randn({size, dim}) * s));
  return out;
}

QuantizerStackImpl make_stack(std::int64_t dim = 4) {
  torch::manual_seed(3);
  return QuantizerStackImpl(8, std::vector<std::int64_t>(kNumAcousticQuantizers, 6), dim);
}

}  // namespace

TEST(Vq, MatchesBruteForce) {
  torch::manual_seed(1);
  auto cb = Codebook::from_entries(torch::randn({12, 5}));
  auto x = torch::randn({3, 7, 5});
  auto r = vq_encode(x, cb);
  ASSERT_EQ(r.ids.sizes(), (std::vector<std::int64_t>{3, 7}));
  ASSERT_EQ(r.quantized.sizes(), x.sizes());
  for (int b = 0; b < 3; ++b) {
    for (int t = 0; t < 7; ++t) {
      const auto k = brute_nearest(x[b][t], cb.entries);
      EXPECT_EQ(r.ids[b][t].item<std::int64_t>(), k);
      EXPECT_TRUE(torch::equal(r.quantized[b][t], cb.entries[k]));
    }
  }
}

TEST(Vq, TiesGoToLowestIndex) {
  auto cb = Codebook::from_entries(torch::tensor({{1.0f, 0.0f}, {-1.0f, 0.0f}, {1.0f, 0.0f}}));
  auto r = vq_encode(torch::tensor({{0.0f, 0.0f}, {2.0f, 0.0f}}), cb);
  EXPECT_EQ(r.ids[0].item<std::int64_t>(), 0);
  EXPECT_EQ(r.ids[1].item<std::int64_t>(), 0);
}

TEST(Vq, DimensionMismatchThrows) {
  auto cb = Codebook::from_entries(torch::randn({4, 3}));
  EXPECT_THROW(vq_encode(torch::randn({2, 5}), cb), ShapeError);
}

TEST(Rvq, StagesQuantizeResidualsAndSumReconstructs) {
  torch::manual_seed(2);
  auto stages = random_stages(4, 16, 3, 1.0);
  auto x = torch::randn({20, 3});
  auto r = rvq_encode(x, stages);
  ASSERT_EQ(r.ids.sizes(), (std::vector<std::int64_t>{20, 4}));
  // Oracle: run the stages one row at a time.
  for (int n = 0; n < 20; ++n) {
    auto residual = x[n].clone();
    auto sum = torch::zeros({3});
    for (int s = 0; s < 4; ++s) {
      const auto k = brute_nearest(residual, stages[s].entries);
      EXPECT_EQ(r.ids[n][s].item<std::int64_t>(), k);
      sum += stages[s].entries[k];
      residual -= stages[s].entries[k];
    }
    EXPECT_TRUE(torch::allclose(r.quantized_sum[n], sum, 1e-6, 1e-6));
  }
}

TEST(Rvq, ErrorShrinksWithMoreStages) {
  torch::manual_seed(4);
  auto x = torch::randn({256, 2});
  double prev = x.pow(2).mean().item<double>();
  auto stages = random_stages(4, 64, 2, 1.0);
  for (int n = 1; n <= 4; ++n) {
    std::vector<Codebook> head(stages.begin(), stages.begin() + n);
    auto err = (x - rvq_encode(x, head).quantized_sum).pow(2).mean().item<double>();
    EXPECT_LE(err, prev + 1e-9);
    prev = err;
  }
}

TEST(StraightThrough, ForwardIsPostAndJacobianIsIdentity) {
  auto pre = torch::randn({2, 3}, torch::kFloat64).requires_grad_(true);
  auto post = torch::randn({2, 3}, torch::kFloat64);
  auto y = straight_through(pre, post);
  EXPECT_TRUE(torch::equal(y.detach(), post));
  auto w = torch::randn({2, 3}, torch::kFloat64);
  (y * w).sum().backward();
  EXPECT_TRUE(torch::allclose(pre.grad(), w));
}

TEST(Commitment, ValueAndGradientSide) {
  auto a = torch::tensor({1.0, 2.0}, torch::kFloat64).requires_grad_(true);
  auto b = torch::tensor({0.0, 0.0}, torch::kFloat64).requires_grad_(true);
  auto c = torch::tensor({3.0}, torch::kFloat64).requires_grad_(true);
  auto d = torch::tensor({1.0}, torch::kFloat64);
  auto l = commitment_loss({a, c}, {b, d});
  EXPECT_NEAR(l.item<double>(), (1.0 + 4.0) / 2.0 + 4.0, 1e-12);
  l.backward();
  EXPECT_FALSE(b.grad().defined() && b.grad().abs().sum().item<double>() != 0.0);
  EXPECT_TRUE(torch::allclose(a.grad(), torch::tensor({1.0, 2.0}, torch::kFloat64)));
}

TEST(CodebookUpdate, KMeansInitLandsOnClusters) {
  torch::manual_seed(5);
  auto centres = torch::tensor({{5.0f, 5.0f}, {-5.0f, 5.0f}, {0.0f, -5.0f}});
  auto data = torch::cat({centres[0] + 0.1 * torch::randn({50, 2}), centres[1] + 0.1 * torch::randn({50, 2}),
                          centres[2] + 0.1 * torch::randn({50, 2})});
  Codebook cb(3, 2);
  std::mt19937_64 rng(11);
  CodebookUpdateOptions opts;
  opts.kmeans_iters = 10;
  codebook_update(cb, data, torch::zeros({150}, torch::kInt64), opts, rng);
  EXPECT_TRUE(cb.initialized.item<bool>());
  for (int c = 0; c < 3; ++c) {
    auto d = (cb.entries - centres[c]).pow(2).sum(1).min().item<double>();
    EXPECT_LT(d, 0.1) << "cluster " << c;
  }
}

TEST(CodebookUpdate, EmaStepMatchesOracle) {
  auto e = torch::tensor({{0.0f, 0.0f}, {1.0f, 1.0f}});
  auto cb = Codebook::from_entries(e);
  auto frames = torch::tensor({{0.2f, 0.0f}, {0.0f, 0.4f}, {2.0f, 2.0f}});
  auto ids = torch::tensor({0, 0, 1}, torch::kInt64);
  CodebookUpdateOptions opts;
  opts.decay = 0.9;
  opts.epsilon = 1e-5;
  std::mt19937_64 rng(0);
  codebook_update(cb, frames, ids, opts, rng);

  // N_k = 0.9 * 1 + 0.1 * count_k; m_k = 0.9 * e_k + 0.1 * sum_k.
  const double n0 = 0.9 + 0.1 * 2, n1 = 0.9 + 0.1 * 1;
  const double n = n0 + n1, eps = 1e-5;
  const double s0 = (n0 + eps) / (n + 2 * eps) * n, s1 = (n1 + eps) / (n + 2 * eps) * n;
  EXPECT_NEAR(cb.entries[0][0].item<double>(), (0.1 * 0.2) / s0, 1e-6);
  EXPECT_NEAR(cb.entries[0][1].item<double>(), (0.1 * 0.4) / s0, 1e-6);
  EXPECT_NEAR(cb.entries[1][0].item<double>(), (0.9 * 1.0 + 0.1 * 2.0) / s1, 1e-6);
  EXPECT_NEAR(cb.ema_cluster_size[0].item<double>(), n0, 1e-6);
}

TEST(CodebookUpdate, DecayOneFreezesEntries) {
  auto cb = Codebook::from_entries(torch::randn({4, 2}));
  auto before = cb.entries.clone();
  CodebookUpdateOptions opts;
  opts.decay = 1.0;
  std::mt19937_64 rng(0);
  codebook_update(cb, torch::randn({10, 2}), torch::zeros({10}, torch::kInt64), opts, rng);
  EXPECT_TRUE(torch::equal(cb.entries, before));
}

TEST(CodebookUpdate, EmptyBatchIsNoOp) {
  auto cb = Codebook::from_entries(torch::randn({4, 2}));
  auto before = cb.entries.clone();
  std::mt19937_64 rng(0);
  codebook_update(cb, torch::zeros({0, 2}), torch::zeros({0}, torch::kInt64), {}, rng);
  EXPECT_TRUE(torch::equal(cb.entries, before));
}

TEST(CodebookUpdate, DeadCodesAreReseededFromBatch) {
  auto cb = Codebook::from_entries(torch::tensor({{0.0f, 0.0f}, {100.0f, 100.0f}}));
  CodebookUpdateOptions opts;
  opts.window_steps = 2;
  opts.dead_windows = 2;
  std::mt19937_64 rng(0);
  auto frames = torch::tensor({{0.1f, 0.0f}, {0.0f, 0.1f}});
  auto ids = torch::zeros({2}, torch::kInt64);
  for (int i = 0; i < 4; ++i) codebook_update(cb, frames, ids, opts, rng);
  // Code 1 was never used for two windows, so it now sits on a batch frame.
  auto row = cb.entries[1];
  const bool on_frame = torch::equal(row, frames[0]) || torch::equal(row, frames[1]);
  EXPECT_TRUE(on_frame) << row;
  EXPECT_EQ(cb.idle_windows[1].item<std::int64_t>(), 0);
}

TEST(SplitRvq, ShapesAndDecodeTokensExact) {
  auto q = make_stack();
  for (auto& cb : q.acoustic()) cb.initialized.fill_(true);
  q.semantic().initialized.fill_(true);
  auto h_sem = torch::randn({2, 5, 4});
  auto h_ac = torch::randn({2, 5, 4});
  auto s = split_rvq(h_sem, h_ac, q);
  ASSERT_EQ(s.semantic_ids.sizes(), (std::vector<std::int64_t>{2, 5}));
  ASSERT_EQ(s.acoustic_ids.sizes(), (std::vector<std::int64_t>{2, 5, 7}));
  ASSERT_EQ(s.pre_q.size(), 8u);
  for (int b = 0; b < 2; ++b) {
    auto t = to_token_sequence(s, b, 25.0, q);
    t.validate();
    auto d = decode_tokens(t, q);
    EXPECT_TRUE(torch::allclose(d.z_sem, s.z_sem[b].detach(), 0, 1e-6));
    EXPECT_TRUE(torch::allclose(d.z_ac, s.z_ac[b].detach(), 0, 1e-5));
  }
}

TEST(SplitRvq, UpdateRequiresRng) {
  auto q = make_stack();
  QuantizerUpdate u;
  EXPECT_THROW(split_rvq(torch::randn({3, 4}), torch::randn({3, 4}), q, &u), ConfigError);
}

TEST(SplitRvq, UpdateInitializesEveryCodebook) {
  auto q = make_stack();
  std::mt19937_64 rng(1);
  QuantizerUpdate u{{}, &rng};
  split_rvq(torch::randn({2, 10, 4}), torch::randn({2, 10, 4}), q, &u);
  EXPECT_TRUE(q.semantic().initialized.item<bool>());
  for (const auto& cb : q.acoustic()) EXPECT_TRUE(cb.initialized.item<bool>());
}

TEST(SplitRvq, StreamsAreIndependent) {
  auto q = make_stack();
  auto h_sem = torch::randn({6, 4});
  auto a = split_rvq(h_sem, torch::randn({6, 4}), q);
  auto b = split_rvq(h_sem, torch::randn({6, 4}), q);
  EXPECT_TRUE(torch::equal(a.semantic_ids, b.semantic_ids));
}

TEST(Quantizer, BadConstruction) {
  EXPECT_THROW(QuantizerStackImpl(8, {4, 4}, 3), ConfigError);
  EXPECT_THROW(Codebook(1, 3), ConfigError);
}
