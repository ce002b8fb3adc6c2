#include "slt/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "slt/decoder.hpp"
#include "slt/error.hpp"
#include "slt/rng.hpp"

namespace slt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SentenceKind kind) {
  switch (kind) {
    case SentenceKind::kAffirmative: return "affirmative";
    case SentenceKind::kNegative: return "negative";
    case SentenceKind::kInterrogative: return "interrogative";
  }
  return "?";
}

namespace {

const std::vector<std::string>& gloss_names() {
  static const std::vector<std::string> names{"<blank>", "CARLOS", "JUAN", "MARY",   "ANA", "VIAJAR",  "COMPRAR",
                                              "BOGOTA",  "CASA",   "HOY",  "MANANA", "NEG", "PREGUNTA"};
  return names;
}

const std::vector<std::string>& text_words() {
  static const std::vector<std::string> words{"<pad>", "<bos>", "<eos>", "<unk>", "carlos", "juan",
                                              "mary",  "ana",   "viaja", "compra", "a",     "bogotá",
                                              "una",   "casa",  "hoy",   "mañana", "no",    "?"};
  return words;
}

// Spoken rendering of every content gloss.
const std::vector<std::vector<std::string>>& gloss_words() {
  static const std::vector<std::vector<std::string>> words{
      {},        {"carlos"}, {"juan"},  {"mary"}, {"ana"},    {"viaja"},  {"compra"},
      {"a", "bogotá"}, {"una", "casa"}, {"hoy"}, {"mañana"}, {},          {}};
  return words;
}

bool is_subject(std::size_t g) { return g >= gloss::kCarlos && g <= gloss::kAna; }
bool is_verb(std::size_t g) { return g == gloss::kViajar || g == gloss::kComprar; }
bool is_object(std::size_t g) { return g == gloss::kBogota || g == gloss::kCasa; }
bool is_time(std::size_t g) { return g == gloss::kHoy || g == gloss::kManana; }
bool is_marker(std::size_t g) { return g == gloss::kNeg || g == gloss::kPregunta; }

float to_f32(double v) { return static_cast<float>(v); }

}  // namespace

Vocabulary Grammar::gloss_vocabulary() { return Vocabulary(gloss_names()); }
Vocabulary Grammar::text_vocabulary() { return Vocabulary(text_words()); }

void Grammar::validate(std::span<const std::size_t> g) {
  auto fail = [&](const std::string& why) {
    std::string seq;
    for (auto id : g) seq += (seq.empty() ? "" : " ") + std::to_string(id);
    throw ContractError("gloss sequence [" + seq + "] " + why);
  };
  if (g.size() < 2) fail("is shorter than SUBJECT VERB");
  if (!is_subject(g[0])) fail("does not start with a subject");
  if (!is_verb(g[1])) fail("has no verb in second position");
  std::size_t i = 2;
  if (i < g.size() && is_object(g[i])) ++i;
  if (i < g.size() && is_time(g[i])) ++i;
  if (i < g.size() && is_marker(g[i])) ++i;
  if (i != g.size()) fail("does not follow SUBJECT VERB [OBJECT] [TIME] [NEG|PREGUNTA]");
}

SentenceKind Grammar::kind_of(std::span<const std::size_t> g) {
  if (!g.empty() && g.back() == gloss::kNeg) return SentenceKind::kNegative;
  if (!g.empty() && g.back() == gloss::kPregunta) return SentenceKind::kInterrogative;
  return SentenceKind::kAffirmative;
}

std::vector<std::string> Grammar::realize(std::span<const std::size_t> g) {
  validate(g);
  const auto kind = kind_of(g);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i == 1 && kind == SentenceKind::kNegative) out.push_back("no");
    for (const auto& w : gloss_words()[g[i]]) out.push_back(w);
  }
  if (kind == SentenceKind::kInterrogative) out.push_back("?");
  return out;
}

std::vector<std::size_t> Grammar::text_ids(std::span<const std::size_t> g) {
  static const Vocabulary vocab = text_vocabulary();
  std::vector<std::size_t> ids{TextTokens::kBos};
  for (const auto& w : realize(g)) ids.push_back(vocab.id(w));
  ids.push_back(TextTokens::kEos);
  return ids;
}

std::size_t Grammar::partner(std::size_t g) {
  if (g == 0 || g > gloss::kCount) throw ContractError("partner: not a gloss id: " + std::to_string(g));
  return g % 2 == 1 ? g + 1 : g - 1;
}

std::vector<Sentence> plan_sentences(const CorpusConfig& config) {
  config.validate();
  const std::vector<std::size_t> anchor{gloss::kCarlos, gloss::kViajar, gloss::kBogota, gloss::kHoy};
  std::vector<std::vector<std::size_t>> frames;
  for (std::size_t s = gloss::kCarlos; s <= gloss::kAna; ++s) {
    for (std::size_t v : {gloss::kViajar, gloss::kComprar}) {
      for (std::size_t o : {std::size_t{0}, gloss::kBogota, gloss::kCasa}) {
        for (std::size_t t : {std::size_t{0}, gloss::kHoy, gloss::kManana}) {
          std::vector<std::size_t> g{s, v};
          if (o) g.push_back(o);
          if (t) g.push_back(t);
          if (g != anchor) frames.push_back(std::move(g));
        }
      }
    }
  }
  Rng pick(config.seed, "corpus/sentences");
  pick.shuffle(frames);
  frames.insert(frames.begin(), anchor);

  const std::size_t n = config.sentences();
  std::vector<Sentence> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = i;
    out[i].glosses = frames[i];
    if (i < config.affirmative) {
      out[i].kind = SentenceKind::kAffirmative;
    } else if (i < config.affirmative + config.negative) {
      out[i].kind = SentenceKind::kNegative;
      out[i].glosses.push_back(gloss::kNeg);
    } else {
      out[i].kind = SentenceKind::kInterrogative;
      out[i].glosses.push_back(gloss::kPregunta);
    }
  }

  // 80/10/10 by sentence identity.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split(config.seed, "corpus/split");
  split.shuffle(order);
  const std::size_t held = n >= 3 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * n))) : 0;
  for (std::size_t k = 0; k < n; ++k) {
    out[order[k]].split = k < held ? "test" : k < 2 * held ? "dev" : "train";
  }
  return out;
}

GestureSpec gesture_spec(std::size_t gloss_id, const CorpusConfig& config) {
  if (gloss_id == 0 || gloss_id > gloss::kCount) throw ContractError("gesture_spec: not a gloss id: " + std::to_string(gloss_id));
  // Both members of a mirrored pair draw from the same stream.
  const std::size_t pair = (gloss_id - 1) / 2;
  Rng rng(config.seed, "corpus/pair/" + std::to_string(pair));
  GestureSpec spec;
  spec.gloss_id = gloss_id;
  spec.frames = config.frames_per_gesture;
  spec.size = rng.uniform(5.0, 8.0);
  for (auto& c : spec.color) c = rng.uniform(0.35, 1.0);
  const double speed = rng.uniform(1.5, 2.5);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double sign = gloss_id % 2 == 1 ? 1.0 : -1.0;
  spec.velocity_row = sign * speed * std::sin(angle);
  spec.velocity_col = sign * speed * std::cos(angle);
  const double reach = 0.5 * static_cast<double>(spec.frames - 1) * speed * (1.0 + config.speed_jitter);
  const double margin = 0.5 * spec.size + reach + 0.5;
  const double extent = static_cast<double>(config.image_size);
  spec.center_row = rng.uniform(margin, extent - margin);
  spec.center_col = rng.uniform(margin, extent - margin);
  return spec;
}

Tensor render_frames(std::span<const GestureInstance> gestures, std::size_t image_size) {
  std::size_t total = 0;
  for (const auto& g : gestures) total += g.spec.frames;
  if (total == 0) throw ContractError("render_frames: no frames to render");
  const std::size_t plane = image_size * image_size;
  std::vector<double> out(total * 3 * plane, 0.0);
  const double extent = static_cast<double>(image_size);
  std::size_t t = 0;
  for (const auto& g : gestures) {
    const auto& s = g.spec;
    for (std::size_t j = 0; j < s.frames; ++j, ++t) {
      const double step = static_cast<double>(j) - 0.5 * static_cast<double>(s.frames - 1);
      const double top = s.center_row + g.speed_scale * s.velocity_row * step - 0.5 * s.size;
      const double left = s.center_col + g.speed_scale * s.velocity_col * step - 0.5 * s.size;
      if (top < 0.0 || left < 0.0 || top + s.size > extent || left + s.size > extent) {
        throw ContractError("render_frames: blob of gloss " + std::to_string(s.gloss_id) + " leaves the frame");
      }
      const auto r0 = static_cast<std::size_t>(std::floor(top));
      const auto c0 = static_cast<std::size_t>(std::floor(left));
      const auto r1 = std::min(image_size, static_cast<std::size_t>(std::ceil(top + s.size)));
      const auto c1 = std::min(image_size, static_cast<std::size_t>(std::ceil(left + s.size)));
      for (std::size_t r = r0; r < r1; ++r) {
        const double cover_r = std::min(r + 1.0, top + s.size) - std::max(static_cast<double>(r), top);
        for (std::size_t c = c0; c < c1; ++c) {
          const double cover_c = std::min(c + 1.0, left + s.size) - std::max(static_cast<double>(c), left);
          const double cover = std::clamp(cover_r * cover_c, 0.0, 1.0);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            out[(t * 3 + ch) * plane + r * image_size + c] = to_f32(cover * s.color[ch]);
          }
        }
      }
    }
  }
  return Tensor::from({total, 3, image_size, image_size}, std::move(out));
}

Tensor optical_flow(const Tensor& prev, const Tensor& next, std::size_t block, std::size_t radius) {
  if (prev.rank() != 3 || prev.shape() != next.shape()) {
    throw ShapeError("optical_flow: frames must share a [C,H,W] shape, got " + shape_str(prev.shape()) + " and " +
                     shape_str(next.shape()));
  }
  const std::size_t channels = prev.dim(0), height = prev.dim(1), width = prev.dim(2);
  if (block == 0 || height % block != 0 || width % block != 0) {
    throw ContractError("optical_flow: block " + std::to_string(block) + " must divide " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  auto gray = [&](const Tensor& f) {
    std::vector<double> g(height * width, 0.0);
    const auto d = f.data();
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[c * g.size() + i];
    }
    for (auto& v : g) v /= static_cast<double>(channels);
    return g;
  };
  const auto a = gray(prev), b = gray(next);

  struct Candidate {
    int dx, dy;
  };
  const int r = static_cast<int>(radius);
  std::vector<Candidate> candidates;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) candidates.push_back({dx, dy});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& p, const Candidate& q) {
    const int mp = std::abs(p.dx) + std::abs(p.dy), mq = std::abs(q.dx) + std::abs(q.dy);
    if (mp != mq) return mp < mq;
    if (p.dy != q.dy) return p.dy < q.dy;
    return p.dx < q.dx;
  });

  const int h = static_cast<int>(height), w = static_cast<int>(width);
  std::vector<double> flow(2 * height * width, 0.0);
  for (std::size_t by = 0; by < height; by += block) {
    for (std::size_t bx = 0; bx < width; bx += block) {
      double best = std::numeric_limits<double>::infinity();
      Candidate chosen{0, 0};
      for (const auto& cand : candidates) {
        double sad = 0.0;
        for (std::size_t y = by; y < by + block; ++y) {
          for (std::size_t x = bx; x < bx + block; ++x) {
            const int ny = static_cast<int>(y) + cand.dy, nx = static_cast<int>(x) + cand.dx;
            const double other = (ny >= 0 && ny < h && nx >= 0 && nx < w) ? b[ny * w + nx] : 0.0;
            sad += std::abs(a[y * width + x] - other);
          }
        }
        if (sad < best) {
          best = sad;
          chosen = cand;
        }
      }
      for (std::size_t y = by; y < by + block; ++y) {
        for (std::size_t x = bx; x < bx + block; ++x) {
          flow[y * width + x] = chosen.dx;
          flow[height * width + y * width + x] = chosen.dy;
        }
      }
    }
  }
  return Tensor::from({2, height, width}, std::move(flow));
}

Tensor video_flow(const Tensor& frames, std::size_t block, std::size_t radius) {
  if (frames.rank() != 4 || frames.dim(0) < 2) {
    throw ShapeError("video_flow: need [T>=2, C, H, W], got " + shape_str(frames.shape()));
  }
  const std::size_t frames_n = frames.dim(0), c = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
  const std::size_t stride = c * h * w;
  auto frame = [&](std::size_t t) {
    const auto d = frames.data();
    return Tensor::from({c, h, w}, std::vector<double>(d.begin() + t * stride, d.begin() + (t + 1) * stride));
  };
  std::vector<double> out;
  out.reserve(frames_n * 2 * h * w);
  for (std::size_t t = 0; t < frames_n; ++t) {
    const std::size_t a = t == 0 ? 0 : t - 1;
    const auto f = optical_flow(frame(a), frame(a + 1), block, radius);
    out.insert(out.end(), f.data().begin(), f.data().end());
  }
  return Tensor::from({frames_n, 2, h, w}, std::move(out));
}

// ---------------------------------------------------------------------------
// manifest

std::string serialize_manifest(std::span<const ManifestEntry> entries) {
  std::string out;
  for (const auto& e : entries) {
    json j{{"path", e.path}, {"split", e.split}, {"sentence_id", e.sentence_id}, {"kind", to_string(e.kind)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    if (!line.empty()) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw FormatError("manifest: invalid JSON line", pos + (e.byte > 0 ? e.byte - 1 : 0));
      }
      auto bad = [&](const std::string& why) { throw FormatError("manifest: " + why, pos); };
      if (!j.is_object() || j.size() != 4) bad("each line needs exactly {path, split, sentence_id, kind}");
      for (const char* key : {"path", "split", "sentence_id", "kind"}) {
        if (!j.contains(key)) bad(std::string("missing field '") + key + "'");
      }
      if (!j["path"].is_string() || !j["split"].is_string() || !j["kind"].is_string()) bad("path, split and kind must be strings");
      if (!j["sentence_id"].is_number_unsigned()) bad("sentence_id must be an unsigned integer");
      ManifestEntry e;
      e.path = j["path"].get<std::string>();
      e.split = j["split"].get<std::string>();
      e.sentence_id = j["sentence_id"].get<std::size_t>();
      if (e.split != "train" && e.split != "dev" && e.split != "test") bad("unknown split '" + e.split + "'");
      const auto kind = j["kind"].get<std::string>();
      if (kind != "rgb" && kind != "flow") bad("unknown kind '" + kind + "'");
      e.kind = parse_input_kind(kind);
      out.push_back(std::move(e));
    }
    pos = end + 1;
  }
  return out;
}

void write_manifest(std::span<const ManifestEntry> entries, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path);
  out << serialize_manifest(entries);
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

// ---------------------------------------------------------------------------
// corpus generation

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[i] = digits[value & 0xf];
  return out;
}

std::string corpus_summary_json(const CorpusSummary& s, const CorpusConfig& config) {
  json j{{"config", json::parse(serialize_corpus_config(config))},
         {"sentences", s.sentences},
         {"samples", s.samples},
         {"splits", {{"train", s.train}, {"dev", s.dev}, {"test", s.test}}},
         {"kinds", {{"affirmative", s.affirmative}, {"negative", s.negative}, {"interrogative", s.interrogative}}},
         {"hash", s.hash}};
  return j.dump(2) + "\n";
}

CorpusSummary read_corpus_summary(const std::string& data_dir) {
  const auto path = (fs::path(data_dir) / "corpus.json").string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    const auto j = json::parse(ss.str());
    CorpusSummary s;
    s.sentences = j.at("sentences").get<std::size_t>();
    s.samples = j.at("samples").get<std::size_t>();
    s.train = j.at("splits").at("train").get<std::size_t>();
    s.dev = j.at("splits").at("dev").get<std::size_t>();
    s.test = j.at("splits").at("test").get<std::size_t>();
    s.affirmative = j.at("kinds").at("affirmative").get<std::size_t>();
    s.negative = j.at("kinds").at("negative").get<std::size_t>();
    s.interrogative = j.at("kinds").at("interrogative").get<std::size_t>();
    s.hash = j.at("hash").get<std::string>();
    s.seed = j.at("config").at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::parse_error& e) {
    throw FormatError("corpus.json: " + std::string(e.what()), e.byte);
  } catch (const json::exception& e) {
    throw FormatError("corpus.json: " + std::string(e.what()), 0);
  }
}

CorpusSummary generate_dataset(const CorpusConfig& config, const std::string& out_dir, bool overwrite) {
  config.validate();
  const fs::path root(out_dir);
  if (!fs::exists(root)) {
    const auto parent = fs::absolute(root).parent_path();
    if (!fs::is_directory(parent)) throw IoError("output parent directory does not exist: " + parent.string());
    fs::create_directory(root);
  } else if (!fs::is_directory(root)) {
    throw IoError("output path exists and is not a directory: " + root.string());
  }
  const fs::path manifest_path = root / "manifest.jsonl";
  if (fs::exists(manifest_path) && !overwrite) {
    throw IoError("refusing to overwrite existing corpus at " + root.string() + " (pass the overwrite flag)");
  }
  fs::create_directories(root / "samples");

  const auto sentences = plan_sentences(config);
  CorpusSummary summary;
  summary.sentences = sentences.size();
  summary.seed = config.seed;
  std::vector<ManifestEntry> entries;
  std::uint64_t hash = fnv1a("");
  auto absorb = [&hash](std::span<const std::uint8_t> bytes) {
    for (auto b : bytes) {
      hash ^= b;
      hash *= 0x100000001b3ULL;
    }
  };

  for (const auto& s : sentences) {
    switch (s.kind) {
      case SentenceKind::kAffirmative: ++summary.affirmative; break;
      case SentenceKind::kNegative: ++summary.negative; break;
      case SentenceKind::kInterrogative: ++summary.interrogative; break;
    }
    const auto text = Grammar::text_ids(s.glosses);
    for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
      Rng jitter(config.seed, "corpus/jitter/" + std::to_string(s.id) + "/" + std::to_string(rep));
      std::vector<GestureInstance> gestures;
      for (auto g : s.glosses) {
        gestures.push_back({gesture_spec(g, config), 1.0 + jitter.uniform(-config.speed_jitter, config.speed_jitter)});
      }
      SampleRecord rgb;
      rgb.kind = InputKind::kRgb;
      rgb.frames = render_frames(gestures, config.image_size);
      rgb.gloss_ids = s.glosses;
      rgb.text_ids = text;
      rgb.sentence_kind = s.kind;
      SampleRecord flow = rgb;
      flow.kind = InputKind::kFlow;
      flow.frames = video_flow(rgb.frames, config.flow_block, config.flow_radius);

      for (const auto* rec : {&rgb, &flow}) {
        char name[64];
        std::snprintf(name, sizeof name, "samples/s%03zu_r%zu_%s.slts", s.id, rep, to_string(rec->kind).c_str());
        const auto bytes = encode_sample(*rec);
        absorb(bytes);
        std::ofstream out(root / name, std::ios::binary);
        if (!out) throw IoError("cannot write sample " + (root / name).string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + (root / name).string());
        entries.push_back({name, s.split, s.id, rec->kind});
      }
      ++summary.samples;
      if (s.split == "train") ++summary.train;
      else if (s.split == "dev") ++summary.dev;
      else ++summary.test;
    }
  }
  summary.hash = hex64(hash);
  write_manifest(entries, manifest_path.string());
  Grammar::gloss_vocabulary().save((root / "gloss_vocab.json").string());
  Grammar::text_vocabulary().save((root / "text_vocab.json").string());
  std::ofstream meta(root / "corpus.json", std::ios::binary);
  if (!meta) throw IoError("cannot write " + (root / "corpus.json").string());
  meta << corpus_summary_json(summary, config);
  return summary;
}

}  // namespace slt
