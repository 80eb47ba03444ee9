#include <gtest/gtest.h>

#include <cmath>

#include "catvrnn/checkpoint.hpp"
#include "catvrnn/data.hpp"
#include "catvrnn/training.hpp"
#include "test_util.hpp"

using namespace catvrnn;
using catvrnn::testing::read_file;
using catvrnn::testing::TempDir;
using catvrnn::testing::write_file;

namespace {

struct Setup {
  LabeledCorpus corpus;
  Vocabulary vocab;
  ModelConfig cfg;
  Batch data;
  TrainPlan plan;
};

Setup small_setup(InitMode init = InitMode::kStatic) {
  Setup s;
  s.corpus = make_synthetic_corpus(2, 12, 6, {2, 4}, 3);
  s.vocab = build_vocabulary(s.corpus);
  s.cfg.vocab_size = s.vocab.size();
  s.cfg.num_categories = 2;
  s.cfg.max_len = 5;
  s.cfg.embed_dim = 6;
  s.cfg.hidden_dim = 8;
  s.cfg.latent_dim = 4;
  s.cfg.encoder_hidden = 8;
  s.cfg.encoder_out = 6;
  s.cfg.decoder_hidden = 8;
  s.cfg.decoder_out = 6;
  s.cfg.prior_hidden = 5;
  s.cfg.init_mode = init;
  s.data = encode_batch(s.corpus.sentences, s.vocab, s.cfg.max_len);
  s.plan.epochs = 10;
  s.plan.batch_size = 5;
  s.plan.adam.lr = 5e-3;
  return s;
}

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
std::uint32_t crc32_oracle(const std::string& bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char ch : bytes) {
    crc ^= ch;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

/// Replaces the 4-byte trailer with the checksum of everything before it.
std::string with_fresh_trailer(std::string bytes) {
  bytes.resize(bytes.size() - 4);
  const std::uint32_t crc = crc32_oracle(bytes);
  bytes.append(reinterpret_cast<const char*>(&crc), 4);
  return bytes;
}

}  // namespace

// Scalar Adam written out by hand for a single weight.
TEST(Adam, MatchesHandWrittenUpdate) {
  ParamStore<double> store;
  const auto i = store.add("w", {1, 2});
  store[i].value << 0.3, -1.2;
  AdamState<double> st;
  st.options = {0.1, 0.9, 0.999, 1e-8};
  double w[2] = {0.3, -1.2}, m[2] = {0, 0}, v[2] = {0, 0};
  const double grads[4][2] = {{0.5, -2.0}, {0.1, 0.0}, {-0.7, 3.0}, {0.2, 1e-3}};
  for (int step = 1; step <= 4; ++step) {
    store.zero_grad();
    store[i].grad << grads[step - 1][0], grads[step - 1][1];
    adam_step(store, st);
    for (int k = 0; k < 2; ++k) {
      const double g = grads[step - 1][k];
      m[k] = 0.9 * m[k] + 0.1 * g;
      v[k] = 0.999 * v[k] + 0.001 * g * g;
      const double mh = m[k] / (1 - std::pow(0.9, step));
      const double vh = v[k] / (1 - std::pow(0.999, step));
      w[k] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(store[i].value(0, k), w[k], 1e-14) << "step " << step << " k " << k;
    }
  }
  EXPECT_EQ(st.step, 4);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> store;
  const auto i = store.add("w", {3});
  store.zero_grad();
  store[i].grad << 0.5, -4.0, 1e-3;
  AdamState<double> st;
  st.options.lr = 0.01;
  adam_step(store, st);
  // Bias correction makes the first update lr * sign(g) up to eps.
  EXPECT_NEAR(store[i].value(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(store[i].value(0, 1), 0.01, 1e-9);
  EXPECT_NEAR(store[i].value(0, 2), -0.01, 1e-7);
}

TEST(Adam, ZeroGradientLeavesWeightsUnchanged) {
  ParamStore<double> store;
  const auto i = store.add("w", {2, 2});
  store[i].value << 1, 2, 3, 4;
  const Matrix<double> before = store[i].value;
  AdamState<double> st;
  for (int k = 0; k < 3; ++k) {
    store.zero_grad();
    adam_step(store, st);
  }
  EXPECT_EQ(store[i].value, before);
}

TEST(Adam, MissingGradientIsAnError) {
  ParamStore<double> store;
  store.add("w", {2});
  AdamState<double> st;
  EXPECT_THROW(adam_step(store, st), ConfigError);
}

TEST(Adam, FrozenTensorsAreSkipped) {
  ParamStore<double> store;
  const auto a = store.add("a", {1});
  const auto b = store.add("b", {1});
  store[b].trainable = false;
  store.zero_grad();
  store[a].grad(0, 0) = 1.0;
  AdamState<double> st;
  adam_step(store, st);
  EXPECT_NE(store[a].value(0, 0), 0.0);
  EXPECT_EQ(store[b].value(0, 0), 0.0);
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  ParamStore<double> store;
  const auto a = store.add("a", {2});
  store.zero_grad();
  store[a].grad << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(store, 1.0), 5.0);
  EXPECT_NEAR(store[a].grad.norm(), 1.0, 1e-15);
  EXPECT_NEAR(store[a].grad(0, 0), 0.6, 1e-15);
}

TEST(TrainPlan, ValidatesFields) {
  TrainPlan p;
  p.epochs = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.adam.lr = -1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.max_grad_norm = 2.5;
  nlohmann::json j = p;
  EXPECT_EQ(j.get<TrainPlan>().max_grad_norm, 2.5);
}

TEST(Training, LossDecreasesOnSmallCorpus) {
  for (auto init : {InitMode::kStatic, InitMode::kAdaptive, InitMode::kZero}) {
    auto s = small_setup(init);
    auto st = init_training<double>(s.cfg, s.plan, 4);
    const auto first = train_epoch(s.data, st, s.plan);
    EpochStats last;
    for (int e = 1; e < 25; ++e) last = train_epoch(s.data, st, s.plan);
    EXPECT_LT(last.mean_total, first.mean_total * 0.8) << to_string(init);
    EXPECT_EQ(last.epoch, 25);
    EXPECT_EQ(st.epoch, 25);
    EXPECT_EQ(last.sentences, s.corpus.sentences.size());
    EXPECT_DOUBLE_EQ(last.mean_kl, 0.0);
  }
}

TEST(Training, KlTermIsReportedAndNonNegative) {
  auto s = small_setup();
  s.cfg.use_kl_term = true;
  auto st = init_training<double>(s.cfg, s.plan, 4);
  for (int e = 0; e < 5; ++e) {
    const auto stats = train_epoch(s.data, st, s.plan);
    EXPECT_GE(stats.min_kl, 0.0);
    EXPECT_GT(stats.mean_kl, 0.0);
    EXPECT_NEAR(stats.mean_total, stats.mean_gen_nll + stats.mean_cls_nll + stats.mean_kl, 1e-9);
  }
}

TEST(Training, SameSeedGivesIdenticalWeights) {
  auto s = small_setup();
  auto a = init_training<double>(s.cfg, s.plan, 12);
  auto b = init_training<double>(s.cfg, s.plan, 12);
  for (int e = 0; e < 3; ++e) {
    train_epoch(s.data, a, s.plan);
    train_epoch(s.data, b, s.plan);
  }
  for (std::size_t i = 0; i < a.params.store.size(); ++i) {
    EXPECT_EQ(a.params.store[i].value, b.params.store[i].value);
  }
}

TEST(Training, EmptyCorpusIsRejected) {
  auto s = small_setup();
  auto st = init_training<double>(s.cfg, s.plan, 1);
  EXPECT_THROW(train_epoch(Batch{}, st, s.plan), DataError);
}

template <typename Scalar>
void expect_same_state(TrainingState<Scalar>& a, TrainingState<Scalar>& b) {
  ASSERT_EQ(a.params.store.size(), b.params.store.size());
  for (std::size_t i = 0; i < a.params.store.size(); ++i) {
    EXPECT_EQ(a.params.store[i].value, b.params.store[i].value) << a.params.store[i].name;
    EXPECT_EQ(a.adam.m[i], b.adam.m[i]);
    EXPECT_EQ(a.adam.v[i], b.adam.v[i]);
  }
  EXPECT_EQ(a.adam.step, b.adam.step);
  EXPECT_EQ(a.epoch, b.epoch);
  EXPECT_EQ(a.rng.state(), b.rng.state());
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  TempDir dir;
  auto s = small_setup(InitMode::kAdaptive);
  auto st = init_training<float>(s.cfg, s.plan, 6);
  train_epoch(s.data, st, s.plan);
  const auto path = dir / "a.ckpt";
  save_checkpoint(path, make_checkpoint(st, s.vocab, {{"note", "x"}}));
  const auto ck = load_checkpoint<float>(path);
  auto back = restore_training(ck);
  expect_same_state(st, back);
  EXPECT_EQ(ck.vocab_tokens, s.vocab.tokens());
  EXPECT_EQ(ck.run_config.at("note"), "x");
  EXPECT_EQ(nlohmann::json(ck.config), nlohmann::json(s.cfg));
  // Saving the restored state reproduces the file byte for byte.
  save_checkpoint(dir / "b.ckpt", make_checkpoint(back, s.vocab, {{"note", "x"}}));
  EXPECT_EQ(read_file(path), read_file(dir / "b.ckpt"));
  EXPECT_EQ(checkpoint_digest(path), checkpoint_digest(dir / "b.ckpt"));
}

TEST(Checkpoint, ResumeContinuesBitIdentically) {
  TempDir dir;
  auto s = small_setup();
  auto straight = init_training<double>(s.cfg, s.plan, 31);
  for (int e = 0; e < 4; ++e) train_epoch(s.data, straight, s.plan);

  auto first = init_training<double>(s.cfg, s.plan, 31);
  for (int e = 0; e < 2; ++e) train_epoch(s.data, first, s.plan);
  save_checkpoint(dir / "mid.ckpt", make_checkpoint(first, s.vocab));
  auto resumed = restore_training(load_checkpoint<double>(dir / "mid.ckpt"));
  for (int e = 0; e < 2; ++e) train_epoch(s.data, resumed, s.plan);
  expect_same_state(straight, resumed);

  Rng ga(5), gb(5);
  EXPECT_EQ(generate(1, 20, straight.params, s.cfg, ga), generate(1, 20, resumed.params, s.cfg, gb));
}

TEST(Checkpoint, DetectsCorruptionAndTruncation) {
  TempDir dir;
  auto s = small_setup();
  auto st = init_training<double>(s.cfg, s.plan, 2);
  const auto path = dir / "m.ckpt";
  save_checkpoint(path, make_checkpoint(st, s.vocab));
  const std::string bytes = read_file(path);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x10);
  write_file(dir / "flip.ckpt", flipped);
  EXPECT_THROW(load_checkpoint<double>(dir / "flip.ckpt"), FormatError);

  write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() - 9));
  EXPECT_THROW(load_checkpoint<double>(dir / "short.ckpt"), FormatError);

  write_file(dir / "tiny.ckpt", bytes.substr(0, 5));
  EXPECT_THROW(load_checkpoint<double>(dir / "tiny.ckpt"), FormatError);

  EXPECT_THROW(load_checkpoint<double>(dir / "missing.ckpt"), Error);
}

TEST(Checkpoint, RejectsWrongDtypeKindAndVersion) {
  TempDir dir;
  auto s = small_setup();
  auto st = init_training<double>(s.cfg, s.plan, 2);
  save_checkpoint(dir / "m.ckpt", make_checkpoint(st, s.vocab));
  EXPECT_THROW(load_checkpoint<float>(dir / "m.ckpt"), FormatError);

  Container c = read_container(dir / "m.ckpt");
  c.meta["kind"] = "something-else";
  write_container(dir / "kind.ckpt", c);
  EXPECT_THROW(load_checkpoint<double>(dir / "kind.ckpt"), FormatError);

  // Rewrite the header with a future version; the crc trailer is recomputed
  // so only the version check can reject it.
  const auto header = read_container_header(dir / "m.ckpt");
  EXPECT_EQ(header.at("format_version"), kCheckpointVersion);
  std::string bytes = read_file(dir / "m.ckpt");
  EXPECT_EQ(with_fresh_trailer(bytes), bytes);
  const std::string needle = "\"format_version\":1";
  const auto at = bytes.find(needle);
  ASSERT_NE(at, std::string::npos);
  bytes.replace(at, needle.size(), "\"format_version\":7");
  write_file(dir / "v7.ckpt", with_fresh_trailer(bytes));
  EXPECT_THROW(load_checkpoint<double>(dir / "v7.ckpt"), FormatError);
}

TEST(Checkpoint, RejectsTamperedVocabulary) {
  TempDir dir;
  auto s = small_setup();
  auto st = init_training<double>(s.cfg, s.plan, 2);
  save_checkpoint(dir / "m.ckpt", make_checkpoint(st, s.vocab));
  Container c = read_container(dir / "m.ckpt");
  auto tokens = c.meta["vocab"]["tokens"];
  std::swap(tokens[2], tokens[3]);
  c.meta["vocab"]["tokens"] = tokens;
  write_container(dir / "swap.ckpt", c);
  EXPECT_THROW(load_checkpoint<double>(dir / "swap.ckpt"), FormatError);
}
