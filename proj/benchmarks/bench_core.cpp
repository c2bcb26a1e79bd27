#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "semcodec/config.hpp"
#include "semcodec/eval.hpp"
#include "semcodec/model.hpp"
#include "semcodec/quantize.hpp"
#include "semcodec/signal.hpp"

using namespace semcodec;

static void BM_StftRoundTrip(benchmark::State& state) {
  torch::manual_seed(0);
  auto x = torch::randn({1, state.range(0)});
  for (auto _ : state) {
    auto y = istft(stft(x, 1280, 320));
    benchmark::DoNotOptimize(y.data_ptr<float>());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StftRoundTrip)->Arg(16000)->Arg(96000);

static void BM_MelLoss(benchmark::State& state) {
  torch::manual_seed(0);
  auto x = torch::randn({1, 16000});
  auto y = torch::randn({1, 16000});
  for (auto _ : state) benchmark::DoNotOptimize(multiscale_mel_loss(x, y).total().item<float>());
}
BENCHMARK(BM_MelLoss);

static void BM_RvqEncode(benchmark::State& state) {
  torch::manual_seed(0);
  const auto k = state.range(0);
  std::vector<Codebook> books;
  for (int s = 0; s < kNumAcousticQuantizers; ++s)
    books.push_back(Codebook::from_entries(torch::randn({k, 256})));
  auto frames = torch::randn({1000, 256});
  for (auto _ : state) benchmark::DoNotOptimize(rvq_encode(frames, books).ids.data_ptr());
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_RvqEncode)->Arg(1024)->Arg(4096);

static void BM_ToyEncodeDecode(benchmark::State& state) {
  torch::manual_seed(0);
  auto cfg = resolve_config({{"preset", "toy-25hz"}});
  TokenizerModel model(cfg, cfg.teacher.dim);
  Waveform w;
  w.sample_rate = 16000;
  auto t = torch::randn({16000}) * 0.1;
  w.samples.assign(t.data_ptr<float>(), t.data_ptr<float>() + 16000);
  for (auto _ : state) {
    auto out = model->decode(model->encode(w));
    benchmark::DoNotOptimize(out.samples.data());
  }
}
BENCHMARK(BM_ToyEncodeDecode)->Unit(benchmark::kMillisecond);

static void BM_LshBucket(benchmark::State& state) {
  std::vector<std::int32_t> ids(state.range(0));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int32_t>((i * 37) % 1024);
  for (auto _ : state) benchmark::DoNotOptimize(lsh_bucket(ids));
}
BENCHMARK(BM_LshBucket)->Arg(50)->Arg(500);
BENCHMARK_MAIN();
