#include <gtest/gtest.h>

#include "slt/encoder.hpp"
#include "slt/error.hpp"
#include "slt/ops.hpp"
#include "test_util.hpp"

namespace slt {
namespace {

using testing::random_tensor;

Tensor frames_for(const ModelConfig& c, std::size_t t, std::uint64_t seed) {
  Rng rng(seed, "frames");
  const std::size_t s = c.backbone.input_size;
  return random_tensor(rng, {t, input_channels(c.input_kind), s, s}, 0, 1);
}

TEST(Backbone, DeskShapes) {
  ModelConfig c;
  ParamStore store(1);
  Backbone b(store, c);
  auto out = b.forward(frames_for(c, 3, 1));
  EXPECT_EQ(out.shape(), (Shape{3, 16, 4, 4}));
  EXPECT_EQ(c.d_model(), 256u);
}

TEST(Backbone, WrongChannelCountIsConfigError) {
  ModelConfig c;
  ParamStore store(1);
  Backbone b(store, c);
  EXPECT_THROW(b.forward(Tensor::zeros({1, 3, 32, 32})), ConfigError);
  EXPECT_THROW(b.forward(Tensor::zeros({1, 2, 16, 16})), ConfigError);
}

TEST(Backbone, DeterministicOnZeroFrame) {
  ModelConfig c;
  ParamStore s1(4), s2(4);
  Backbone a(s1, c), b(s2, c);
  auto z = Tensor::zeros({1, 2, 32, 32});
  EXPECT_EQ(a.forward(z).values(), b.forward(z).values());
}

TEST(Flatten, RowMajor) {
  auto m = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto f = flatten_maps(m);
  EXPECT_EQ(f.shape(), (Shape{1, 4}));
  EXPECT_EQ(f.values(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Flatten, RoundTripIsExact) {
  Rng rng(2, "t");
  auto m = random_tensor(rng, {3, 4, 2, 5});
  auto back = unflatten_maps(flatten_maps(m), 4, 2, 5);
  EXPECT_EQ(back.shape(), m.shape());
  EXPECT_EQ(back.values(), m.values());
  EXPECT_THROW(unflatten_maps(flatten_maps(m), 4, 2, 4), ShapeError);
}

TEST(Encoder, FullConfigShapes) {
  ModelConfig c;
  ParamStore store(1);
  Encoder enc(store, c, 13);
  auto out = enc.forward(frames_for(c, 5, 2), ops::NormMode::kTrain);
  EXPECT_EQ(out.memory.shape(), (Shape{5, 256}));
  EXPECT_EQ(out.gloss_log_probs.shape(), (Shape{5, 13}));
  EXPECT_EQ(out.attention.shape(), (Shape{5, 16, 16}));
}

TEST(Encoder, IdentityAtInitialization) {
  ModelConfig c;
  c.use_pe2d = false;
  c.use_ffn2d = false;
  ParamStore store(3);
  Encoder enc(store, c, 13);
  auto frames = frames_for(c, 4, 3);
  auto out = enc.forward(frames, ops::NormMode::kTrain);
  EXPECT_EQ(out.memory.values(), flatten_maps(enc.backbone().forward(frames)).values());
}

TEST(Encoder, MinimalRowMatchesHandBuiltPipeline) {
  ModelConfig c;
  c.use_attn2d = c.use_ffn2d = false;
  ParamStore store(5);
  Encoder enc(store, c, 13);
  auto frames = frames_for(c, 2, 5);
  Tensor x = frames;
  for (int i = 0; i < 3; ++i) {
    const std::string n = "backbone.stage" + std::to_string(i);
    x = ops::relu(ops::conv2d(x, store.param(n + ".kernel"), store.param(n + ".bias"), 2, 1));
  }
  x = ops::add(x, build_pe2d(16, 4, 4).as_tensor());
  auto memory = ops::reshape(x, {2, 256});
  auto out = enc.forward(frames, ops::NormMode::kTrain);
  EXPECT_EQ(out.memory.values(), memory.values());
  EXPECT_FALSE(out.attention.defined());
}

TEST(Encoder, DisabledAttentionMatchesArchitectureWithoutIt) {
  ModelConfig with;
  ModelConfig without = with;
  without.use_attn2d = false;
  ParamStore s1(9), s2(9);
  Encoder a(s1, with, 13), b(s2, without, 13);
  auto frames = frames_for(with, 3, 9);
  EXPECT_EQ(a.forward(frames, ops::NormMode::kTrain).memory.values(),
            b.forward(frames, ops::NormMode::kTrain).memory.values());
  // Components shared by both architectures start from identical weights.
  for (const auto& [name, t] : s2.params()) EXPECT_EQ(s1.params().at(name).values(), t.values()) << name;
}

TEST(Encoder, SwitchesNeverChangeSharedInitialization) {
  ModelConfig full;
  for (int mask = 0; mask < 16; ++mask) {
    ModelConfig c = full;
    c.use_pe2d = mask & 1;
    c.use_attn2d = mask & 2;
    c.use_ffn2d = mask & 4;
    c.use_glosses = mask & 8;
    ParamStore s1(1), s2(1);
    Encoder a(s1, full, 13), b(s2, c, 13);
    for (const auto& [name, t] : s2.params()) ASSERT_EQ(s1.params().at(name).values(), t.values()) << name;
  }
}

TEST(Encoder, DeterministicInEvalMode) {
  ModelConfig c;
  ParamStore store(6);
  Encoder enc(store, c, 13);
  store.param("encoder.attn2d.gamma").mutable_data()[0] = 0.5;
  auto frames = frames_for(c, 3, 6);
  enc.forward(frames, ops::NormMode::kTrain);
  auto a = enc.forward(frames, ops::NormMode::kEval);
  auto b = enc.forward(frames, ops::NormMode::kEval);
  EXPECT_EQ(a.memory.values(), b.memory.values());
}

TEST(Encoder, MemoryWidthIsChannelsTimesGrid) {
  for (auto channels : {std::vector<std::size_t>{4, 8}, std::vector<std::size_t>{8, 16, 16}, std::vector<std::size_t>{4, 4, 8, 12}}) {
    ModelConfig c;
    c.backbone.channels = channels;
    const std::size_t grid = 32 >> channels.size();
    ParamStore store(1);
    Encoder enc(store, c, 13);
    auto out = enc.forward(frames_for(c, 2, 1), ops::NormMode::kTrain);
    EXPECT_EQ(out.memory.dim(1), channels.back() * grid * grid);
    EXPECT_EQ(out.memory.dim(1), c.d_model());
  }
}

TEST(Encoder, NoGlossHeadWithoutGlosses) {
  ModelConfig c;
  c.use_glosses = false;
  ParamStore store(1);
  Encoder enc(store, c, 13);
  EXPECT_FALSE(enc.forward(frames_for(c, 2, 1), ops::NormMode::kTrain).gloss_log_probs.defined());
  for (const auto& [name, t] : store.params()) EXPECT_EQ(name.find("gloss_head"), std::string::npos);
}

}  // namespace
}  // namespace slt
