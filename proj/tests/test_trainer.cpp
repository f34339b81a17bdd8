#include <doctest.h>

#include <cmath>

#include "cvls/rng.hpp"
#include "cvls/train/trainer.hpp"

using namespace cvls;

namespace {

rco::Dataset synthetic_dataset(int samples, int cells, int k, std::uint64_t seed) {
  rco::Dataset d;
  d.grid.lanes = 1;
  d.grid.cell_length = 1.0;
  d.grid.link_length = cells;
  d.grid.free_flow_speed = 13.89;
  d.k = k;
  d.windows.resize(cells * 2 * k, samples);
  d.targets.resize(cells * 2, samples);
  RngStream rng(seed);
  for (int s = 0; s < samples; ++s) {
    for (int c = 0; c < cells; ++c) {
      const bool occupied = rng.bernoulli(0.15);
      const float spd = occupied ? static_cast<float>(rng.uniform01()) : -1.0f;
      d.targets(c * 2 + 0, s) = occupied ? 1.0f : 0.0f;
      d.targets(c * 2 + 1, s) = spd;
      for (int kk = 0; kk < k; ++kk) {
        const bool seen = occupied && rng.bernoulli(0.6);
        d.windows(c * 2 * k + 2 * kk + 0, s) = seen ? 1.0f : 0.0f;
        d.windows(c * 2 * k + 2 * kk + 1, s) = seen ? spd : -1.0f;
      }
    }
    d.sample_scenario.push_back(0);
    d.sample_time.push_back(s);
  }
  d.scenarios.push_back({});
  return d;
}

train::TrainConfig small_tc() {
  train::TrainConfig tc;
  tc.k = 2;
  tc.hidden = 16;
  tc.heads = 4;
  tc.patch = 10;
  tc.batch_size = 8;
  tc.d_e = 6;
  // four tokens only: keep the attention mixing factor w/(N eps^2) tame
  tc.epsilon = 1.0;
  tc.kappa = 0.25;
  return tc;
}

}  // namespace

TEST_CASE("lr = 0 leaves parameters untouched and logs one epoch") {
  const auto data = synthetic_dataset(4, 40, 2, 1);
  train::TrainConfig tc = small_tc();
  tc.epochs = 1;
  tc.learning_rate = 0.0;
  tc.weight_decay = 0.0;

  auto params = crate::init_params<float>(tc.crate_config(data.grid), tc.seed);
  auto before = params;
  train::AdamW<float> opt(tc.adamw());
  const auto history = train::train(data, tc, params, opt);

  REQUIRE(history.size() == 1);
  auto now = params.tensors();
  auto old = before.tensors();
  for (std::size_t i = 0; i < now.size(); ++i)
    CHECK((now[i].second->array() == old[i].second->array()).all());
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  const auto data = synthetic_dataset(12, 40, 2, 2);
  train::TrainConfig tc = small_tc();
  tc.epochs = 3;
  tc.seed = 42;

  auto run = [&]() {
    auto params = crate::init_params<float>(tc.crate_config(data.grid), tc.seed);
    train::AdamW<float> opt(tc.adamw());
    auto history = train::train(data, tc, params, opt);
    return std::make_pair(std::move(params), std::move(history));
  };
  auto [p1, h1] = run();
  auto [p2, h2] = run();

  REQUIRE(h1.size() == h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1[i] == h2[i]);
  auto t1 = p1.tensors();
  auto t2 = p2.tensors();
  for (std::size_t i = 0; i < t1.size(); ++i)
    CHECK((t1[i].second->array() == t2[i].second->array()).all());
}

TEST_CASE("a tiny dataset is overfit far below the initial loss") {
  const auto data = synthetic_dataset(8, 40, 2, 3);
  train::TrainConfig tc = small_tc();
  tc.hidden = 32;
  tc.epochs = 500;
  tc.batch_size = 8;
  tc.learning_rate = 3e-3;
  tc.weight_decay = 0.0;
  tc.mu = 0.0;

  auto params = crate::init_params<float>(tc.crate_config(data.grid), tc.seed);
  train::AdamW<float> opt(tc.adamw());
  const auto history = train::train(data, tc, params, opt);
  REQUIRE(history.size() == 500);
  CHECK(history.back() < 0.02 * history.front());
}

TEST_CASE("epoch callback fires once per epoch with the running loss") {
  const auto data = synthetic_dataset(6, 40, 2, 4);
  train::TrainConfig tc = small_tc();
  tc.epochs = 3;
  auto params = crate::init_params<float>(tc.crate_config(data.grid), tc.seed);
  train::AdamW<float> opt(tc.adamw());
  std::vector<double> seen;
  const auto history = train::train(
      data, tc, params, opt,
      /*start_epoch=*/0,
      [&](int epoch, crate::CrateParams<float>&, train::AdamW<float>&, double loss) {
        CHECK(epoch == static_cast<int>(seen.size()));
        seen.push_back(loss);
      });
  REQUIRE(seen.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(seen[i] == history[i]);
}
