// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all twelve
//   acceptance 3 5 11     run a subset
//
// Exit status is 0 only when every selected criterion passes.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "slt/attention.hpp"
#include "slt/checkpoint.hpp"
#include "slt/config.hpp"
#include "slt/data.hpp"
#include "slt/encoder.hpp"
#include "slt/error.hpp"
#include "slt/grad_suite.hpp"
#include "slt/log.hpp"
#include "slt/losses.hpp"
#include "slt/metrics.hpp"
#include "slt/ops.hpp"
#include "slt/posenc2d.hpp"
#include "slt/rng.hpp"
#include "slt/trainer.hpp"
#include "slt/vocab.hpp"

namespace fs = std::filesystem;
using namespace slt;

namespace {

constexpr int kSeeds = 5;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void progress(const std::string& line) { std::cerr << "  .. " << line << std::endl; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Scratch space shared by the training criteria; corpora are generated once.
class Workspace {
 public:
  Workspace() {
    root_ = fs::temp_directory_path() / ("slt_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  const fs::path& root() const { return root_; }

  std::string corpus(std::uint64_t seed) {
    const auto dir = root_ / ("corpus_" + std::to_string(seed));
    if (!fs::exists(dir / "manifest.jsonl")) {
      CorpusConfig c;
      c.seed = seed;
      generate_dataset(c, dir.string(), false);
    }
    return dir.string();
  }

  // Ablation reports per seed, shared by criteria 8 and 9.
  const AblationReport& ablation(std::uint64_t seed) {
    auto it = ablations_.find(seed);
    if (it != ablations_.end()) return it->second;
    ModelConfig base;
    base.seed = seed;
    const auto start = Clock::now();
    auto report = run_ablation(base, corpus(seed), "");
    progress("ablation seed " + std::to_string(seed) + " done in " + fmt("%.0f s", seconds_since(start)));
    return ablations_.emplace(seed, std::move(report)).first->second;
  }

 private:
  fs::path root_;
  std::map<std::uint64_t, AblationReport> ablations_;
};

Workspace* workspace = nullptr;

// ---------------------------------------------------------------------------

Verdict c1_not_reproducible() {
  return {true,
          "the published BLEU4 figures (46.84 on CoL-SLTD, 30.77 on PHOENIX14T) are NOT reproducible here: "
          "they need those datasets and an ImageNet-pretrained ResNet18, neither of which is available. This "
          "build trains a small backbone on a synthetic gesture corpus and checks relative trends only"};
}

Verdict c2_gradients() {
  const auto start = Clock::now();
  const auto report = run_grad_suite(standard_grad_components(ModelConfig{}), 1e-4);
  const double elapsed = seconds_since(start);
  double worst = 0;
  std::string worst_name;
  for (const auto& r : report.rows) {
    if (r.result.max_relative_error >= worst) {
      worst = r.result.max_relative_error;
      worst_name = r.name;
    }
  }
  std::string detail = std::to_string(report.rows.size()) + " components, worst " + worst_name + " " +
                       fmt("%.2e", worst) + ", " + fmt("%.1f s", elapsed);
  for (const auto& f : report.failures()) detail += ", failed: " + f;
  const bool has_e2e = std::any_of(report.rows.begin(), report.rows.end(),
                                   [](const GradSuiteRow& r) { return r.name == "joint_loss"; });
  if (!has_e2e) detail += ", no joint_loss row";
  return {report.passed() && has_e2e && elapsed < 60.0, detail};
}

long double brute_force_ctc(const Tensor& log_probs, const std::vector<std::size_t>& targets) {
  const std::size_t t_len = log_probs.dim(0), classes = log_probs.dim(1);
  std::vector<std::size_t> path(t_len, 0);
  long double total = 0.0L;
  while (true) {
    std::vector<std::size_t> collapsed;
    std::size_t prev = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (path[t] != 0 && path[t] != prev) collapsed.push_back(path[t]);
      prev = path[t];
    }
    if (collapsed == targets) {
      long double lp = 0.0L;
      for (std::size_t t = 0; t < t_len; ++t) lp += log_probs.at({t, path[t]});
      total += std::exp(lp);
    }
    std::size_t i = 0;
    while (i < t_len && ++path[i] == classes) path[i++] = 0;
    if (i == t_len) break;
  }
  return -std::log(total);
}

Verdict c3_ctc() {
  Rng rng(3, "acceptance/ctc");
  double worst = 0;
  int checked = 0;
  while (checked < 200) {
    const std::size_t g = 1 + rng.below(3), t = 1 + rng.below(6), lg = 1 + rng.below(3);
    std::vector<std::size_t> targets(lg);
    for (auto& x : targets) x = 1 + rng.below(g);
    if (ctc_min_frames(targets) > t) continue;
    const auto lp = ops::log_softmax(random_tensor(rng, {t, g + 1}, -3, 3), 1);
    const double dp = ctc_loss(lp, targets).item();
    worst = std::max(worst, static_cast<double>(std::fabs(dp - brute_force_ctc(lp, targets))));
    ++checked;
  }
  return {worst < 1e-10, "200 instances, max |dp - brute| = " + fmt("%.2e", worst)};
}

Verdict c4_identity() {
  ModelConfig c;
  c.use_pe2d = false;
  c.use_ffn2d = false;
  c.use_attn2d = true;
  ParamStore store(4);
  Encoder enc(store, c, 13);
  if (!enc.attention() || enc.attention()->gamma().item() != 0.0) return {false, "gamma is not 0 at init"};
  Rng rng(4, "acceptance/identity");
  bool exact = true;
  for (std::size_t frames : {1, 3, 7}) {
    auto x = random_tensor(rng, {frames, 2, 32, 32}, -2, 2);
    const auto out = enc.forward(x, ops::NormMode::kTrain).memory.values();
    const auto ref = flatten_maps(enc.backbone().forward(x)).values();
    exact = exact && out.size() == ref.size() && std::memcmp(out.data(), ref.data(), 8 * out.size()) == 0;
  }
  return {exact, exact ? "encoder memory equals flattened backbone maps bit for bit (T = 1, 3, 7)"
                       : "encoder output differs from the backbone output"};
}

Verdict c5_pe2d() {
  double worst_ref = 0;
  for (std::size_t d = 4; d <= 64; d += 4) {
    const std::size_t h = 9, w = 13;
    const auto pe = build_pe2d(d, h, w);
    for (std::size_t c = 0; c < d; ++c) {
      const bool row_axis = c < d / 2;
      const std::size_t k = row_axis ? c : c - d / 2;
      const long double freq = std::pow(10000.0L, -static_cast<long double>(4 * (k / 2)) / d);
      for (std::size_t x = 0; x < h; ++x) {
        for (std::size_t y = 0; y < w; ++y) {
          const long double arg = (row_axis ? x : y) * freq;
          const long double want = (k % 2 == 0) ? std::sin(arg) : std::cos(arg);
          worst_ref = std::max(worst_ref, static_cast<double>(std::fabs(pe.at(c, x, y) - want)));
        }
      }
    }
  }
  bool constant = true, injective = true;
  for (std::size_t d : {4, 8, 16}) {
    for (std::size_t h = 1; h <= 12; ++h) {
      for (std::size_t w = 1; w <= 12; ++w) {
        const auto pe = build_pe2d(d, h, w);
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t x = 0; x < h; ++x) {
            for (std::size_t y = 0; y < w; ++y) {
              if (c < d / 2) constant = constant && pe.at(c, x, y) == pe.at(c, x, 0);
              else constant = constant && pe.at(c, x, y) == pe.at(c, 0, y);
            }
          }
        }
        std::set<std::vector<double>> seen;
        for (std::size_t x = 0; x < h; ++x) {
          for (std::size_t y = 0; y < w; ++y) {
            std::vector<double> v(d);
            for (std::size_t c = 0; c < d; ++c) v[c] = pe.at(c, x, y);
            injective = seen.insert(v).second && injective;
          }
        }
      }
    }
  }
  return {worst_ref < 1e-12 && constant && injective,
          "max |table - sinusoid| = " + fmt("%.2e", worst_ref) + (constant ? ", axis-constant" : ", NOT axis-constant") +
              (injective ? ", injective" : ", NOT injective") + " (D 4/8/16, H,W <= 12)"};
}

Tensor permute_positions(const Tensor& maps, const std::vector<std::size_t>& perm) {
  const std::size_t tc = maps.dim(0) * maps.dim(1), hw = maps.dim(2) * maps.dim(3);
  std::vector<double> out(maps.numel());
  for (std::size_t f = 0; f < tc; ++f) {
    for (std::size_t p = 0; p < hw; ++p) out[f * hw + perm[p]] = maps.data()[f * hw + p];
  }
  return Tensor::from(maps.shape(), out);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

Verdict c6_permutation() {
  ParamStore store(6);
  Attention2D attn(store, "attn", 16);
  store.param("attn.gamma").mutable_data()[0] = 0.8;
  const auto pe = build_pe2d(16, 4, 4);
  Rng rng(6, "acceptance/perm");
  double worst_off = 0, best_on = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_tensor(rng, {2, 16, 4, 4});
    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    worst_off = std::max(worst_off, max_abs_diff(attn.forward(permute_positions(f, perm)).maps,
                                                 permute_positions(attn.forward(f).maps, perm)));
    const auto lhs = attn.forward(add_pe2d(permute_positions(f, perm), pe)).maps;
    const auto rhs = permute_positions(attn.forward(add_pe2d(f, pe)).maps, perm);
    double scale = 0;
    for (double v : rhs.data()) scale = std::max(scale, std::fabs(v));
    best_on = std::max(best_on, max_abs_diff(lhs, rhs) / scale);
  }
  return {worst_off < 1e-9 && best_on > 1e-3,
          "without PE2D max diff " + fmt("%.2e", worst_off) + ", with PE2D max relative change " + fmt("%.2e", best_on)};
}

Verdict c7_overfit() {
  const auto data = workspace->corpus(1);
  ModelConfig c;
  c.epochs = 200;
  TrainOptions opts;
  opts.train_limit = 8;
  opts.eval_split = "";
  const auto start = Clock::now();
  const auto result = train(c, data, opts);
  const auto train8 = load_split(data, "train", c.input_kind, 8);
  const auto ev = evaluate(*result.model, train8, check_vocabularies(*result.model, data));
  const double elapsed = seconds_since(start);
  return {ev.bleu.bleu[3] >= 0.95 && elapsed < 600.0,
          "training BLEU4 on 8 samples after 200 epochs = " + fmt("%.4f", ev.bleu.bleu[3]) + ", " +
              fmt("%.0f s", elapsed)};
}

Verdict c8_flow_vs_rgb() {
  int wins = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    // The full-model ablation row is exactly the flow run for this seed.
    const auto& ablation = workspace->ablation(seed);
    const double flow = ablation.rows.at(0).test.bleu[3];
    ModelConfig rgb;
    rgb.seed = seed;
    rgb.input_kind = InputKind::kRgb;
    TrainOptions opts;
    opts.eval_split = "";
    const auto data = workspace->corpus(seed);
    const auto model = train(rgb, data, opts).model;
    const auto ev = evaluate(*model, load_split(data, "test", InputKind::kRgb), check_vocabularies(*model, data));
    const double rgb_bleu = ev.bleu.bleu[3];
    progress("seed " + std::to_string(seed) + " flow " + fmt("%.4f", flow) + " rgb " + fmt("%.4f", rgb_bleu));
    if (flow > rgb_bleu) ++wins;
    detail += (detail.empty() ? "" : ", ") + std::string("s") + std::to_string(seed) + " " + fmt("%.3f", flow) + "/" +
              fmt("%.3f", rgb_bleu);
  }
  return {wins >= 4, "flow beats RGB on test BLEU4 in " + std::to_string(wins) + "/5 seeds (flow/rgb: " + detail + ")"};
}

Verdict c9_ablation() {
  int wins = 0;
  bool shape_ok = true;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto& report = workspace->ablation(seed);
    shape_ok = shape_ok && report.rows.size() == 6;
    const auto table = ablation_table(report);
    for (const char* col : {"BLEU1", "BLEU2", "BLEU3", "BLEU4"}) shape_ok = shape_ok && table.find(col) != std::string::npos;
    if (seed == 1) std::cerr << table;
    const auto find = [&](const std::string& name) {
      for (const auto& r : report.rows) {
        if (r.name == name) return r.test.bleu[3];
      }
      shape_ok = false;
      return 0.0;
    };
    const double full = find("P.A."), bare = find("-ATTN2D-FFN2D");
    if (full > bare) ++wins;
    detail += (detail.empty() ? "" : ", ") + std::string("s") + std::to_string(seed) + " " + fmt("%.3f", full) + "/" +
              fmt("%.3f", bare);
  }
  return {shape_ok && wins >= 4, std::string(shape_ok ? "6 rows x 4 columns" : "table shape wrong") +
                                     ", P.A. beats -ATTN2D-FFN2D on test BLEU4 in " + std::to_string(wins) +
                                     "/5 seeds (P.A./bare: " + detail + ")"};
}

Verdict c10_determinism() {
  const auto data_dir = workspace->root() / "small_corpus";
  CorpusConfig corpus;
  corpus.affirmative = 6;
  corpus.negative = 2;
  corpus.interrogative = 2;
  corpus.repetitions = 1;
  generate_dataset(corpus, data_dir.string(), true);
  ModelConfig c;
  c.decoder_ff = 32;
  c.epochs = 3;
  const auto run = [&](const std::string& name, std::size_t stop_after) {
    TrainOptions o;
    o.out_dir = (workspace->root() / name).string();
    o.stop_after = stop_after;
    return train(c, data_dir.string(), o);
  };
  const auto a = run("det_a", 0);
  const auto b = run("det_b", 0);
  const auto ra = workspace->root() / "det_a", rb = workspace->root() / "det_b", rp = workspace->root() / "det_part";
  const bool logs = a.log == b.log && slurp(ra / "train.log") == slurp(rb / "train.log") &&
                    slurp(ra / "checkpoint.bin") == slurp(rb / "checkpoint.bin");
  run("det_part", 1);
  TrainOptions o;
  o.out_dir = rp.string();
  const auto resumed = resume_training((rp / "checkpoint.bin").string(), data_dir.string(), o);
  const bool resume = resumed.log == a.log && slurp(rp / "checkpoint.bin") == slurp(ra / "checkpoint.bin");
  return {logs && resume, std::string(logs ? "identical seeds give identical logs and checkpoints"
                                           : "identical seeds DIVERGED") +
                              (resume ? ", resume after epoch 1 matches the uninterrupted run bit for bit"
                                      : ", resume NOT bit-exact")};
}

Verdict c11_bleu() {
  const auto w = [](const std::string& s) { return split_words(s); };
  std::vector<TokenSeq> corpus{w("carlos viaja a bogotá hoy"), w("ana no compra una casa"), w("¿ juan viaja mañana ?")};
  const auto identity = corpus_bleu(corpus, corpus);
  const bool id_ok = std::all_of(identity.bleu.begin(), identity.bleu.end(), [](double b) { return b == 1.0; });

  const auto four = corpus_bleu({w("a b c d")}, {w("a b c e")});
  const double want = std::pow(0.75 * (2.0 / 3.0) * 0.5 * 1e-9, 0.25);
  const bool four_ok = std::fabs(four.bleu[3] - want) < 1e-12 && std::fabs(four.bleu[0] - 0.75) < 1e-12;

  const auto clipped = corpus_bleu({w("the the the the")}, {w("the cat")});
  const bool clip_ok = clipped.matches[0] == 1 && clipped.totals[0] == 4;

  const auto shorter = corpus_bleu({w("a b")}, {w("a b c d")});
  const auto longer = corpus_bleu({w("a b c d e")}, {w("a b c d")});
  const bool bp_ok = std::fabs(shorter.brevity_penalty - std::exp(-1.0)) < 1e-15 && longer.brevity_penalty == 1.0;

  return {id_ok && four_ok && clip_ok && bp_ok,
          std::string("identity ") + (id_ok ? "ok" : "FAIL") + ", 4-token BLEU4 " + fmt("%.15g", four.bleu[3]) +
              (four_ok ? " ok" : " FAIL") + ", clipping " + (clip_ok ? "ok" : "FAIL") + ", brevity " +
              (bp_ok ? "ok" : "FAIL")};
}

// Decodes `bytes` and classifies the outcome: 0 decoded, 1 FormatError, 2 anything else.
template <class Decode>
int classify(const Decode& decode, std::span<const std::uint8_t> bytes) {
  try {
    decode(bytes);
    return 0;
  } catch (const FormatError&) {
    return 1;
  } catch (...) {
    return 2;
  }
}

Verdict c12_io() {
  Rng rng(12, "acceptance/io");
  bool round_trip = true;
  std::size_t corrupt = 0, wrong_error = 0, truncations_ok = 0, truncations = 0;
  const auto decode_s = [](std::span<const std::uint8_t> b) { decode_sample(b); };
  for (int i = 0; i < 200; ++i) {
    SampleRecord r;
    r.kind = rng.below(2) ? InputKind::kFlow : InputKind::kRgb;
    const std::size_t t = 1 + rng.below(6), c = input_channels(r.kind), h = 1 + rng.below(8), w = 1 + rng.below(8);
    std::vector<double> v(t * c * h * w);
    for (auto& x : v) x = static_cast<double>(static_cast<float>(rng.normal()));
    r.frames = Tensor::from({t, c, h, w}, v);
    for (std::size_t k = 0, n = rng.below(5); k < n; ++k) r.gloss_ids.push_back(1 + rng.below(12));
    for (std::size_t k = 0, n = 2 + rng.below(8); k < n; ++k) r.text_ids.push_back(rng.below(60));
    const auto bytes = encode_sample(r);
    const auto back = decode_sample(bytes);
    round_trip = round_trip && encode_sample(back) == bytes && back.frames.values() == r.frames.values() &&
                 back.gloss_ids == r.gloss_ids && back.text_ids == r.text_ids;
    for (std::size_t n = 0; n < bytes.size(); n += 1 + rng.below(7)) {
      ++truncations;
      truncations_ok += classify(decode_s, std::span(bytes).first(n)) == 1;
    }
    for (int f = 0; f < 10; ++f) {
      auto b = bytes;
      b[rng.below(b.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      ++corrupt;
      wrong_error += classify(decode_s, b) == 2;
    }
  }

  // Checkpoint of a small model, with optimizer state.
  ModelConfig mc;
  mc.backbone.input_size = 16;
  mc.backbone.channels = {4, 4, 4};
  mc.decoder_heads = 2;
  mc.decoder_ff = 8;
  Model model(mc, 6, 9);
  Adam adam(model.named_parameters(), mc.optimizer);
  const auto frames = random_tensor(rng, {5, 2, 16, 16});
  const std::vector<std::size_t> glosses{1, 2}, text{1, 5, 2};
  backward(model.loss(frames, glosses, text).total);
  adam.step();
  const CheckpointMeta meta{mc, 6, 9, "00000000deadbeef", 7, 1};
  const auto ck = encode_checkpoint(model, &adam, meta);
  auto back = decode_checkpoint(ck);
  Adam adam2(back.model->named_parameters(), mc.optimizer);
  adam2.load_state(*back.optimizer);
  round_trip = round_trip && encode_checkpoint(*back.model, &adam2, back.meta) == ck &&
               back.model->translate(frames) == model.translate(frames);
  const auto decode_c = [](std::span<const std::uint8_t> b) { decode_checkpoint(b); };
  for (std::size_t n = 0; n < ck.size(); n += 1 + rng.below(97)) {
    ++truncations;
    truncations_ok += classify(decode_c, std::span(ck).first(n)) == 1;
  }
  for (int f = 0; f < 300; ++f) {
    auto b = ck;
    b[rng.below(std::min<std::size_t>(b.size(), 64))] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    ++corrupt;
    // A flipped header byte may also describe a different, valid architecture.
    try {
      decode_checkpoint(b);
    } catch (const FormatError&) {
    } catch (const ConfigError&) {
    } catch (...) {
      ++wrong_error;
    }
  }

  // Text formats.
  ConfigFile cfg;
  cfg.model.optimizer.lr = 1.0 / 3.0;
  cfg.corpus.speed_jitter = 0.1 + 0.2;
  round_trip = round_trip && parse_config(serialize_config(cfg)) == cfg;
  const std::vector<ManifestEntry> manifest{{"samples/a.slts", "train", 3, InputKind::kFlow},
                                            {"samples/b.slts", "test", 9, InputKind::kRgb}};
  round_trip = round_trip && parse_manifest(serialize_manifest(manifest)) == manifest;
  const auto vocab = Grammar::text_vocabulary();
  round_trip = round_trip && Vocabulary::from_json(vocab.to_json()) == vocab;

  const bool ok = round_trip && wrong_error == 0 && truncations_ok == truncations;
  return {ok, std::string(round_trip ? "round-trips bit-exact" : "round-trip MISMATCH") + ", " +
                  std::to_string(truncations_ok) + "/" + std::to_string(truncations) + " truncations -> FormatError, " +
                  std::to_string(corrupt) + " corruptions, " + std::to_string(wrong_error) + " other exceptions"};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  log::set_min_level(log::Level::kError);

  const std::vector<Criterion> criteria{
      {1, "published numbers not reproducible", c1_not_reproducible},
      {2, "gradient suite < 1e-4, < 60 s", c2_gradients},
      {3, "CTC matches brute force", c3_ctc},
      {4, "encoder identity at init", c4_identity},
      {5, "PE2D reference, axis constancy, injectivity", c5_pe2d},
      {6, "attention permutation behaviour", c6_permutation},
      {7, "overfit 8 samples", c7_overfit},
      {8, "flow beats RGB", c8_flow_vs_rgb},
      {9, "ablation table", c9_ablation},
      {10, "determinism and resume", c10_determinism},
      {11, "BLEU golden values", c11_bleu},
      {12, "I/O round-trips and corruption", c12_io},
  };

  Workspace ws;
  workspace = &ws;
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("C%-2d %s  %s: %s [%.1f s]\n", c.id, v.pass ? "PASS" : "FAIL", c.title, v.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  workspace = nullptr;
  return failed == 0 ? 0 : 1;
}
