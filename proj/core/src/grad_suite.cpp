#include "slt/grad_suite.hpp"

#include <chrono>

#include <json.hpp>

#include "slt/attention.hpp"
#include "slt/data.hpp"
#include "slt/encoder.hpp"
#include "slt/losses.hpp"
#include "slt/model.hpp"
#include "slt/ops.hpp"
#include "slt/posenc2d.hpp"
#include "slt/rng.hpp"

namespace slt {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Random weights keep every output element relevant to the scalar; plain
// sums would make e.g. softmax or normalization gradients vanish.
Tensor probe(const Tensor& y, Rng& rng) {
  std::vector<double> w(y.numel());
  for (auto& x : w) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
  return ops::sum(ops::mul(y, Tensor::from(y.shape(), std::move(w))));
}

GradCheckResult worst(const GradCheckResult& a, const GradCheckResult& b) {
  return b.max_relative_error > a.max_relative_error ? b : a;
}

// Runs `check` on each shape and keeps the worst result.
template <typename F>
GradCheckResult over_shapes(const std::vector<Shape>& shapes, F check) {
  GradCheckResult r;
  for (const auto& s : shapes) r = worst(r, check(s));
  return r;
}

GradComponent unary(const std::string& name, std::function<Tensor(const Tensor&)> op, std::vector<Shape> shapes,
                    std::uint64_t seed) {
  return {name, [=] {
            return over_shapes(shapes, [&](const Shape& s) {
              Rng rng(seed, "grad/" + name + "/" + shape_str(s));
              auto x = random_tensor(rng, s);
              Rng w(seed, "grad/" + name + "/probe" + shape_str(s));
              return grad_check(
                  [&] {
                    Rng wp = w;
                    return probe(op(x), wp);
                  },
                  {x});
            });
          }};
}

GradComponent binary(const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> op,
                     std::vector<std::pair<Shape, Shape>> shapes, std::uint64_t seed) {
  return {name, [=] {
            GradCheckResult r;
            for (const auto& [sa, sb] : shapes) {
              Rng rng(seed, "grad/" + name + "/" + shape_str(sa) + shape_str(sb));
              auto a = random_tensor(rng, sa);
              auto b = random_tensor(rng, sb);
              Rng w(seed, "grad/" + name + "/probe");
              r = worst(r, grad_check(
                               [&] {
                                 Rng wp = w;
                                 return probe(op(a, b), wp);
                               },
                               {a, b}));
            }
            return r;
          }};
}

}  // namespace

ModelConfig toy_model_config(const ModelConfig& switches) {
  ModelConfig c = switches;
  c.backbone.input_size = 8;
  c.backbone.channels = {2, 4};
  c.backbone.kernel = 4;
  c.backbone.stride = 2;
  c.backbone.padding = 1;
  c.decoder_heads = 4;
  c.decoder_layers = 1;
  c.decoder_ff = 8;
  c.max_decode_len = 4;
  return c;
}

std::vector<GradComponent> standard_grad_components(const ModelConfig& config) {
  const std::uint64_t seed = config.seed;
  std::vector<GradComponent> out;

  out.push_back(binary("add", ops::add, {{{3}, {3}}, {{2, 3}, {2, 3}}, {{2, 3, 4}, {4}}}, seed));
  out.push_back(binary("sub", ops::sub, {{{3}, {3}}, {{2, 5}, {2, 5}}, {{4, 2, 2}, {4, 2, 2}}}, seed));
  out.push_back(binary("mul", ops::mul, {{{3}, {3}}, {{2, 5}, {2, 5}}, {{4, 2, 2}, {4, 2, 2}}}, seed));
  out.push_back(binary("mul_scalar", ops::mul_scalar, {{{3}, {1}}, {{2, 5}, {1}}, {{2, 3, 2, 2}, {1}}}, seed));
  out.push_back(binary("matmul", ops::matmul, {{{1, 3}, {3, 2}}, {{4, 5}, {5, 3}}, {{3, 1}, {1, 4}}}, seed));
  out.push_back(binary("bmm", ops::bmm, {{{1, 2, 3}, {1, 3, 2}}, {{3, 4, 2}, {3, 2, 5}}, {{2, 1, 3}, {2, 3, 1}}}, seed));
  out.push_back(binary(
      "concat", [](const Tensor& a, const Tensor& b) { return ops::concat({a, b}, 1); },
      {{{2, 3}, {2, 1}}, {{1, 2, 2, 2}, {1, 3, 2, 2}}, {{2, 2, 3}, {2, 4, 3}}}, seed));

  out.push_back(unary("scale", [](const Tensor& x) { return ops::scale(x, -2.5); }, {{4}, {2, 3}, {2, 2, 2}}, seed));
  out.push_back(unary("relu", ops::relu, {{7}, {3, 4}, {2, 3, 2}}, seed));
  out.push_back(unary("reshape", [](const Tensor& x) { return ops::reshape(x, {x.numel()}); }, {{2, 3}, {2, 2, 3}, {5}},
                      seed));
  out.push_back(unary("permute", [](const Tensor& x) { return ops::permute(x, {2, 0, 1}); },
                      {{2, 3, 4}, {1, 2, 2}, {3, 1, 2}}, seed));
  out.push_back(unary("transpose", ops::transpose, {{2, 3}, {1, 4}, {5, 5}}, seed));
  out.push_back(unary("slice", [](const Tensor& x) { return ops::slice(x, 0, 1, 1); }, {{2, 3}, {3, 2, 2}, {4}}, seed));
  out.push_back(unary("softmax", [](const Tensor& x) { return ops::softmax(x, x.rank() - 1); }, {{4}, {3, 5}, {2, 3, 4}},
                      seed));
  out.push_back(unary("softmax_axis0", [](const Tensor& x) { return ops::softmax(x, 0); }, {{4}, {3, 5}, {2, 3, 4}}, seed));
  out.push_back(unary("log_softmax", [](const Tensor& x) { return ops::log_softmax(x, x.rank() - 1); },
                      {{4}, {3, 5}, {2, 3, 4}}, seed));
  out.push_back(unary("mean", ops::mean, {{4}, {3, 5}, {2, 3, 4}}, seed));
  out.push_back(unary("flatten", flatten_maps, {{1, 1, 2, 2}, {2, 3, 2, 2}, {3, 2, 1, 3}}, seed));

  out.push_back({"conv2d", [seed] {
                   struct Case {
                     Shape x, k;
                     std::size_t stride, pad;
                   };
                   const std::vector<Case> cases{{{1, 2, 4, 4}, {3, 2, 3, 3}, 1, 1},
                                                 {{2, 3, 6, 6}, {2, 3, 4, 4}, 2, 1},
                                                 {{1, 1, 5, 5}, {2, 1, 1, 1}, 1, 0}};
                   GradCheckResult r;
                   for (const auto& c : cases) {
                     Rng rng(seed, "grad/conv2d/" + shape_str(c.x) + shape_str(c.k));
                     auto x = random_tensor(rng, c.x);
                     auto k = random_tensor(rng, c.k);
                     auto b = random_tensor(rng, {c.k[0]});
                     Rng w(seed, "grad/conv2d/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(ops::conv2d(x, k, b, c.stride, c.pad), wp);
                                      },
                                      {x, k, b}));
                   }
                   return r;
                 }});

  out.push_back({"batchnorm2d", [seed] {
                   GradCheckResult r;
                   for (const Shape& s : std::vector<Shape>{{2, 3, 2, 2}, {3, 2, 3, 3}, {4, 1, 2, 2}}) {
                     Rng rng(seed, "grad/batchnorm2d/" + shape_str(s));
                     auto x = random_tensor(rng, s);
                     auto g = random_tensor(rng, {s[1]}, 0.5, 1.5);
                     auto b = random_tensor(rng, {s[1]});
                     auto stats = ops::BatchNormStats::fresh(s[1]);
                     Rng w(seed, "grad/batchnorm2d/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(ops::batchnorm2d(x, g, b, stats, ops::NormMode::kTrain), wp);
                                      },
                                      {x, g, b}));
                   }
                   return r;
                 }});

  out.push_back({"layer_norm", [seed] {
                   GradCheckResult r;
                   for (const Shape& s : std::vector<Shape>{{1, 4}, {3, 5}, {2, 2, 6}}) {
                     Rng rng(seed, "grad/layer_norm/" + shape_str(s));
                     auto x = random_tensor(rng, s);
                     auto g = random_tensor(rng, {s.back()}, 0.5, 1.5);
                     auto b = random_tensor(rng, {s.back()});
                     Rng w(seed, "grad/layer_norm/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(ops::layer_norm(x, g, b), wp);
                                      },
                                      {x, g, b}));
                   }
                   return r;
                 }});

  out.push_back({"embedding", [seed] {
                   GradCheckResult r;
                   const std::vector<std::vector<std::size_t>> id_sets{{0}, {2, 0, 2}, {1, 3, 3, 0, 2}};
                   for (const auto& ids : id_sets) {
                     Rng rng(seed, "grad/embedding/" + std::to_string(ids.size()));
                     auto table = random_tensor(rng, {4, 3});
                     Rng w(seed, "grad/embedding/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(ops::embedding(table, ids), wp);
                                      },
                                      {table}));
                   }
                   return r;
                 }});

  out.push_back({"add_pe2d", [seed] {
                   GradCheckResult r;
                   for (const Shape& s : std::vector<Shape>{{1, 4, 2, 2}, {2, 8, 3, 2}, {3, 4, 1, 3}}) {
                     Rng rng(seed, "grad/add_pe2d/" + shape_str(s));
                     auto x = random_tensor(rng, s);
                     const auto pe = build_pe2d(s[1], s[2], s[3]);
                     Rng w(seed, "grad/add_pe2d/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(add_pe2d(x, pe), wp);
                                      },
                                      {x}));
                   }
                   return r;
                 }});

  out.push_back({"attention2d", [seed] {
                   GradCheckResult r;
                   for (const Shape& s : std::vector<Shape>{{1, 8, 2, 2}, {2, 4, 3, 3}, {2, 16, 2, 3}}) {
                     ParamStore store(seed);
                     Attention2D attn(store, "attn", s[1]);
                     store.param("attn.gamma").mutable_data()[0] = 0.7;
                     Rng rng(seed, "grad/attention2d/" + shape_str(s));
                     auto x = random_tensor(rng, s);
                     std::vector<Tensor> inputs{x};
                     for (const auto& [name, p] : store.params()) inputs.push_back(p);
                     Rng w(seed, "grad/attention2d/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(attn.forward(x).maps, wp);
                                      },
                                      inputs));
                   }
                   return r;
                 }});

  out.push_back({"multihead_attention", [seed] {
                   GradCheckResult r;
                   const std::vector<std::array<std::size_t, 3>> cases{{1, 1, 4}, {3, 2, 8}, {4, 5, 8}};
                   for (const auto& [lq, lk, d] : cases) {
                     ParamStore store(seed);
                     MultiHeadAttention mha(store, "mha", d, 4);
                     Rng rng(seed, "grad/mha/" + std::to_string(lq) + "/" + std::to_string(lk));
                     auto q = random_tensor(rng, {lq, d});
                     auto kv = random_tensor(rng, {lk, d});
                     std::vector<Tensor> inputs{q, kv};
                     for (const auto& [name, p] : store.params()) inputs.push_back(p);
                     const auto mask = causal_mask(lq);
                     Rng w(seed, "grad/mha/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        auto cross = mha.forward(q, kv, kv).out;
                                        auto self = mha.forward(q, q, q, &mask).out;
                                        return ops::add(probe(cross, wp), probe(self, wp));
                                      },
                                      inputs));
                   }
                   return r;
                 }});

  out.push_back({"conv_ffn", [seed] {
                   GradCheckResult r;
                   for (const Shape& s : std::vector<Shape>{{1, 2, 6, 6}, {2, 4, 2, 2}, {3, 2, 3, 2}}) {
                     ParamStore store(seed);
                     ConvFeedForward ffn(store, "ffn", s[1]);
                     Rng rng(seed, "grad/conv_ffn/" + shape_str(s));
                     auto x = random_tensor(rng, s);
                     std::vector<Tensor> inputs{x};
                     for (const auto& [name, p] : store.params()) inputs.push_back(p);
                     Rng w(seed, "grad/conv_ffn/probe");
                     r = worst(r, grad_check(
                                      [&] {
                                        Rng wp = w;
                                        return probe(ffn.forward(x, ops::NormMode::kTrain), wp);
                                      },
                                      inputs));
                   }
                   return r;
                 }});

  out.push_back({"cross_entropy", [seed] {
                   GradCheckResult r;
                   const std::vector<std::vector<std::size_t>> target_sets{{1}, {0, 2, 3}, {3, 0, 0, 1, 2}};
                   for (const auto& targets : target_sets) {
                     Rng rng(seed, "grad/cross_entropy/" + std::to_string(targets.size()));
                     auto logits = random_tensor(rng, {targets.size(), 4}, -2.0, 2.0);
                     r = worst(r, grad_check([&] { return cross_entropy(logits, targets, 0); }, {logits}));
                   }
                   return r;
                 }});

  out.push_back({"ctc_loss", [seed] {
                   GradCheckResult r;
                   struct Case {
                     std::size_t frames, classes;
                     std::vector<std::size_t> targets;
                   };
                   const std::vector<Case> cases{{4, 3, {1, 2}}, {5, 3, {1, 1}}, {6, 4, {3, 1, 2}}};
                   for (const auto& c : cases) {
                     Rng rng(seed, "grad/ctc/" + std::to_string(c.frames));
                     auto logits = random_tensor(rng, {c.frames, c.classes}, -2.0, 2.0);
                     r = worst(r, grad_check([&] { return ctc_loss(ops::log_softmax(logits, 1), c.targets); }, {logits}));
                   }
                   return r;
                 }});

  // End-to-end checks on the toy geometry. The losses are O(1) while some
  // gradients are O(1e-6); this step balances cancellation noise (~1/h)
  // against batch-norm curvature (~h^2).
  constexpr double kEndToEndEps = 3e-5;
  const ModelConfig toy = toy_model_config(config);
  auto toy_inputs = [](Model& m, std::uint64_t s) {
    const std::size_t frames = 6;
    Rng rng(s, "grad/e2e/frames");
    const auto c = input_channels(m.config().input_kind);
    const auto extent = m.config().backbone.input_size;
    auto x = random_tensor(rng, {frames, c, extent, extent});
    x.set_requires_grad(false);
    if (m.config().use_attn2d) m.store().param("encoder.attn2d.gamma").mutable_data()[0] = 0.5;
    return x;
  };
  const std::vector<std::size_t> glosses{gloss::kCarlos, gloss::kViajar, gloss::kBogota};
  const auto text = Grammar::text_ids(glosses);
  const std::size_t gloss_vocab = gloss::kCount + 1;
  const std::size_t text_vocab = Grammar::text_vocabulary().size();

  out.push_back({"encoder+cross_entropy", [=] {
                   auto enc_cfg = toy;
                   enc_cfg.use_glosses = false;
                   Model m(enc_cfg, gloss_vocab, text_vocab);
                   auto x = toy_inputs(m, seed);
                   std::vector<Tensor> inputs;
                   for (const auto& [name, p] : m.named_parameters()) {
                     if (name.rfind("encoder.", 0) == 0 || name.rfind("backbone.", 0) == 0) inputs.push_back(p);
                   }
                   return grad_check([&] { return m.loss(x, glosses, text).ce; }, inputs, kEndToEndEps);
                 }});

  out.push_back({"joint_loss", [=] {
                   Model m(toy, gloss_vocab, text_vocab);
                   auto x = toy_inputs(m, seed);
                   std::vector<Tensor> inputs;
                   for (const auto& [name, p] : m.named_parameters()) inputs.push_back(p);
                   return grad_check([&] { return m.loss(x, glosses, text).total; }, inputs, kEndToEndEps);
                 }});
  return out;
}

bool GradSuiteReport::passed() const { return failures().empty(); }

std::vector<std::string> GradSuiteReport::failures() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (!r.passed) out.push_back(r.name);
  }
  return out;
}

GradSuiteReport run_grad_suite(const std::vector<GradComponent>& components, double tolerance) {
  GradSuiteReport report;
  report.tolerance = tolerance;
  for (const auto& c : components) {
    const auto start = std::chrono::steady_clock::now();
    GradSuiteRow row;
    row.name = c.name;
    row.result = c.run();
    row.passed = row.result.max_relative_error < tolerance;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string grad_suite_json(const GradSuiteReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"component", r.name},
                    {"max_relative_error", r.result.max_relative_error},
                    {"passed", r.passed},
                    {"worst_input", r.result.worst_tensor},
                    {"worst_element", r.result.worst_element}});
  }
  nlohmann::json j{{"tolerance", report.tolerance},
                   {"passed", report.passed()},
                   {"failures", report.failures()},
                   {"components", rows}};
  return j.dump(2) + "\n";
}

}  // namespace slt
