#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ssv/csv.hpp"
#include "ssv/errors.hpp"
#include "ssv/trainer.hpp"
#include "temp_dir.hpp"

using namespace ssv;
using ssv::testing::TempDir;

namespace {

Dataset id_dataset(const std::vector<std::size_t>& counts) {
  std::vector<Utterance> utts;
  for (std::size_t s = 0; s < counts.size(); ++s)
    for (std::size_t u = 0; u < counts[s]; ++u) utts.push_back({synth_speaker_id(s), synth_utterance_id(s, u), {}});
  return Dataset(std::move(utts));
}

// Small synthetic feature set shared by the training tests.
const Dataset& synth_set() {
  static const Dataset d = synth_features(synth_dataset(20, 5, 77));
  return d;
}

Model small_model(std::uint64_t seed = 1) {
  ModelConfig c;
  c.conv_widths = {4, 4, 4};
  c.seed = seed;
  return build_model(c);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.steps_per_epoch = 2;
  c.seed = 5;
  c.hyperparams = {1e-4, 1e-3, 1.0};
  return c;
}

}  // namespace

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  auto bad = [](auto edit) {
    TrainConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(bad([](TrainConfig& c) { c.epochs = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.momentum = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.genuine_ratio = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.genuine_ratio = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.learning_rate = -0.1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](TrainConfig& c) { c.hyperparams.eta = 0.0; }).validate(), ConfigError);
  EXPECT_EQ(TrainConfig{}.steps_for(id_dataset({10, 7})), 2u);
}

TEST(SamplePairBatch, CountsLabelsAndDeterminism) {
  const Dataset d = id_dataset({3, 4, 2, 5});
  std::mt19937_64 rng(1);
  const PairBatch b = sample_pair_batch(d, 8, 0.5, rng);
  std::size_t gen = 0;
  for (const PairIndex& p : b) gen += p.label == PairLabel::Genuine;
  EXPECT_EQ(gen, 4u);

  std::mt19937_64 r1(9), r2(9);
  EXPECT_EQ(sample_pair_batch(d, 16, 0.3, r1), sample_pair_batch(d, 16, 0.3, r2));
  EXPECT_EQ(r1(), r2());

  std::mt19937_64 r(3);
  std::size_t checked = 0;
  while (checked < 1000) {
    for (const PairIndex& p : sample_pair_batch(d, 10, 0.5, r)) {
      EXPECT_NE(p.a, p.b);
      EXPECT_EQ(d[p.a].speaker_id == d[p.b].speaker_id, p.label == PairLabel::Genuine);
      ++checked;
    }
  }
  std::mt19937_64 rc(4);
  EXPECT_THROW(sample_pair_batch(id_dataset({1, 1, 1}), 4, 0.5, rc), CapacityError);
  EXPECT_THROW(sample_pair_batch(id_dataset({5}), 4, 0.5, rc), CapacityError);
}

TEST(SamplePairBatch, GenuinePairsAreUniform) {
  // Speaker sizes 2 and 4 give 1 + 6 genuine pairs.
  const Dataset d = id_dataset({2, 4});
  std::mt19937_64 rng(6);
  std::map<std::pair<std::size_t, std::size_t>, int> hits;
  const int draws = 7000;
  for (int i = 0; i < draws; ++i) {
    const PairIndex p = sample_pair_batch(d, 2, 0.5, rng)[0];
    ++hits[{p.a, p.b}];
  }
  ASSERT_EQ(hits.size(), 7u);
  for (const auto& [pair, n] : hits) EXPECT_NEAR(n, draws / 7.0, 0.12 * draws / 7.0);
}

TEST(SgdMomentum, Recurrence) {
  Tensor w({1}), g({1}), v({1});
  w[0] = 1.0;
  g[0] = 1.0;
  sgd_momentum_step(w, g, v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(w[0], 0.9);

  Tensor z({3}), zv({3});
  const Tensor before = z;
  sgd_momentum_step(z, Tensor({3}), zv, 0.5, 0.9);
  EXPECT_EQ(z, before);

  std::mt19937_64 rng(7);
  Tensor w2 = oracle::random_tensor({5}, rng), v2({5});
  const Tensor w0 = w2, g1 = oracle::random_tensor({5}, rng), g2 = oracle::random_tensor({5}, rng);
  sgd_momentum_step(w2, g1, v2, 0.01, 0.9);
  sgd_momentum_step(w2, g2, v2, 0.01, 0.9);
  for (std::size_t i = 0; i < 5; ++i) {
    const double v1 = -0.01 * g1[i];
    const double vv = 0.9 * v1 - 0.01 * g2[i];
    EXPECT_DOUBLE_EQ(w2[i], w0[i] + v1 + vv);
    EXPECT_DOUBLE_EQ(v2[i], vv);
  }
  EXPECT_THROW(sgd_momentum_step(w2, Tensor({4}), v2, 0.1, 0.9), ShapeError);
}

TEST(Train, ZeroLearningRateKeepsModel) {
  TrainConfig c = quick_config();
  c.learning_rate = 0.0;
  const Model m = small_model();
  EXPECT_EQ(train(m, synth_set(), c).model, m);
}

TEST(Train, DeterministicLogAndModel) {
  TempDir dir;
  const TrainConfig c = quick_config();
  const Model m = small_model(2);
  const DevSet dev{&synth_set(), make_trials(synth_set(), 10, 10, 1)};
  const TrainResult a = train(m, synth_set(), c, &dev);
  const TrainResult b = train(m, synth_set(), c, &dev);
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(a.log.size(), 2u);
  write_train_log_csv(a.log, dir / "a.csv");
  write_train_log_csv(b.log, dir / "b.csv");
  const CsvTable ta = read_csv(dir / "a.csv"), tb = read_csv(dir / "b.csv");
  EXPECT_EQ(ta.rows, tb.rows);
  EXPECT_EQ(ta.header, (std::vector<std::string>{"epoch", "total_loss", "data_loss", "group_lasso",
                                                 "sparsity_fraction", "dev_eer"}));
  for (const EpochLog& e : a.log) {
    EXPECT_TRUE(std::isfinite(e.total_loss));
    EXPECT_GE(e.total_loss, e.data_loss);
    ASSERT_TRUE(e.dev_eer.has_value());
  }
  EXPECT_NEAR(a.log.back().group_lasso, scaled_group_lasso(a.model), 1e-12);
}

TEST(Train, WithoutGroupTermMatchesPlainObjective) {
  // One step by hand: contrastive + weight decay only.
  TrainConfig c = quick_config();
  c.epochs = 1;
  c.steps_per_epoch = 1;
  c.hyperparams.lambda_gs = 0.0;
  const Model m = small_model(3);
  const Model trained = train(m, synth_set(), c).model;

  std::mt19937_64 rng(c.seed);
  const PairBatch batch = sample_pair_batch(synth_set(), c.batch_size, c.genuine_ratio, rng);
  std::vector<PairInput> in;
  for (const PairIndex& p : batch)
    in.push_back({&synth_set()[p.a].features.tensor(), &synth_set()[p.b].features.tensor(), p.label});
  const auto [loss, grads] = total_loss(m, in, c.hyperparams);
  Model expected = m;
  for (std::size_t i : m.weighted_layers()) {
    for (std::size_t k = 0; k < grads[i].weights.size(); ++k)
      expected.weights(i)[k] += -c.learning_rate * grads[i].weights[k];
    for (std::size_t k = 0; k < grads[i].bias.size(); ++k) expected.bias(i)[k] += -c.learning_rate * grads[i].bias[k];
  }
  EXPECT_EQ(trained, expected);
}

TEST(Train, OneEpochReducesDataLoss) {
  const Dataset& d = synth_set();
  TrainConfig c;
  c.epochs = 1;
  c.seed = 11;
  const Model m = small_model(4);
  std::mt19937_64 rng(99);
  const PairBatch probe = sample_pair_batch(d, 64, 0.5, rng);
  std::vector<PairInput> in;
  for (const PairIndex& p : probe) in.push_back({&d[p.a].features.tensor(), &d[p.b].features.tensor(), p.label});
  const double before = evaluate_loss(m, in, c.hyperparams).data;
  const double after = evaluate_loss(train(m, d, c).model, in, c.hyperparams).data;
  EXPECT_LT(after, before);
}

TEST(Train, DivergenceIsReported) {
  TrainConfig c = quick_config();
  c.learning_rate = 1e300;
  c.momentum = 0.0;
  EXPECT_THROW(train(small_model(), synth_set(), c), DivergenceError);
}

TEST(FineTune, AllKeepEqualsTrainAndMaskHolds) {
  const TrainConfig c = quick_config();
  const Model m = small_model(5);
  EXPECT_EQ(fine_tune(m, full_mask(m), synth_set(), c).model, train(m, synth_set(), c).model);

  PruneMask mask = full_mask(m);
  mask.layers[0].keep = {true, false, true, false};
  mask.layers[2].keep = {false, false, true, true};
  TrainConfig longer = c;
  longer.epochs = 3;
  const Model tuned = fine_tune(m, mask, synth_set(), longer).model;
  const GroupNormReport norms = group_norms(tuned);
  for (std::size_t r = 0; r < mask.layers.size(); ++r)
    for (std::size_t g = 0; g < mask.layers[r].keep.size(); ++g) {
      if (mask.layers[r].keep[g]) continue;
      EXPECT_EQ(norms[r].norms[g], 0.0);
      EXPECT_EQ(tuned.layer(mask.layers[r].layer).bias[g], 0.0);
    }
  EXPECT_NE(tuned, apply_mask(m, mask));
}
