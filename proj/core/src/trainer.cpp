#include "slt/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slt/checkpoint.hpp"
#include "slt/error.hpp"
#include "slt/log.hpp"
#include "slt/rng.hpp"

namespace slt {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset load_split(const std::string& data_dir, const std::string& split, InputKind kind, std::size_t limit) {
  if (split != "train" && split != "dev" && split != "test") throw ConfigError("unknown split '" + split + "'");
  Dataset d;
  d.kind = kind;
  d.split = split;
  for (const auto& e : read_manifest((fs::path(data_dir) / "manifest.jsonl").string())) {
    if (e.split != split || e.kind != kind) continue;
    if (limit && d.examples.size() == limit) break;
    auto rec = load_sample((fs::path(data_dir) / e.path).string());
    if (rec.kind != kind) throw FormatError("manifest lists " + e.path + " as " + to_string(kind), 0);
    d.examples.push_back({e.path, e.sentence_id, std::move(rec)});
  }
  if (d.examples.empty()) {
    throw ConfigError("no " + to_string(kind) + " samples in split '" + split + "' of " + data_dir);
  }
  return d;
}

namespace {

std::vector<std::string> content_words(std::span<const std::size_t> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == TextTokens::kBos || id == TextTokens::kEos || id == TextTokens::kPad) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

struct Session {
  std::unique_ptr<Model> model;
  std::unique_ptr<Adam> adam;
  std::size_t epoch = 0;
  std::vector<std::string> log;
};

TrainResult run_session(Session s, const std::string& data_dir, const TrainOptions& options) {
  const auto& config = s.model->config();
  const auto summary = read_corpus_summary(data_dir);
  const auto vocab = check_vocabularies(*s.model, data_dir);
  const auto train_set = load_split(data_dir, "train", config.input_kind, options.train_limit);
  std::optional<Dataset> eval_set;
  if (!options.eval_split.empty()) {
    eval_set = options.eval_split == "train" ? train_set : load_split(data_dir, options.eval_split, config.input_kind);
  }
  fs::path out;
  if (!options.out_dir.empty()) {
    out = options.out_dir;
    if (!fs::exists(out)) {
      if (!fs::is_directory(fs::absolute(out).parent_path())) {
        throw IoError("output parent directory does not exist: " + fs::absolute(out).parent_path().string());
      }
      fs::create_directory(out);
    }
  }

  TrainResult result;
  result.corpus_hash = summary.hash;
  const std::size_t last = options.stop_after ? std::min(options.stop_after, config.epochs) : config.epochs;
  std::optional<Evaluation> eval;
  for (std::size_t epoch = s.epoch + 1; epoch <= last; ++epoch) {
    std::vector<std::size_t> order(train_set.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(config.seed, "train/order/" + std::to_string(epoch));
    rng.shuffle(order);

    double ce_sum = 0.0, ctc_sum = 0.0;
    for (auto i : order) {
      const auto& rec = train_set.examples[i].record;
      const auto parts = s.model->loss(rec.frames, rec.gloss_ids, rec.text_ids);
      const double total = parts.total.item();
      if (!std::isfinite(total)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + " on " + train_set.examples[i].path);
      }
      backward(parts.total);
      s.adam->step();
      s.adam->zero_grad();
      ce_sum += parts.ce.item();
      if (parts.ctc.defined()) ctc_sum += parts.ctc.item();
    }
    const double n = static_cast<double>(order.size());
    std::string line = "epoch " + std::to_string(epoch) + " ce " + fixed(ce_sum / n);
    if (config.ctc_enabled()) line += " ctc " + fixed(ctc_sum / n);
    if (eval_set) {
      eval = evaluate(*s.model, *eval_set, vocab);
      line += " " + options.eval_split + "_bleu";
      for (double b : eval->bleu.bleu) line += " " + fixed(b);
    }
    s.log.push_back(line);
    if (options.on_log) options.on_log(line);
    s.epoch = epoch;

    if (!out.empty()) {
      CheckpointMeta meta{config, s.model->gloss_vocab(), s.model->text_vocab(), summary.hash, summary.seed, epoch};
      save_checkpoint(*s.model, s.adam.get(), meta, (out / "checkpoint.bin").string());
      std::string text;
      for (const auto& l : s.log) text += l + "\n";
      write_text(out / "train.log", text);
    }
  }
  result.model = std::move(s.model);
  result.log = std::move(s.log);
  result.epochs_completed = s.epoch;
  result.last_eval = std::move(eval);
  return result;
}

}  // namespace

Vocabulary check_vocabularies(const Model& model, const std::string& data_dir) {
  const auto text = Vocabulary::load((fs::path(data_dir) / "text_vocab.json").string());
  const auto gloss = Vocabulary::load((fs::path(data_dir) / "gloss_vocab.json").string());
  if (text.size() != model.text_vocab() || gloss.size() != model.gloss_vocab()) {
    throw ConfigError("model vocabularies (text " + std::to_string(model.text_vocab()) + ", gloss " +
                      std::to_string(model.gloss_vocab()) + ") do not match corpus " + data_dir + " (text " +
                      std::to_string(text.size()) + ", gloss " + std::to_string(gloss.size()) + ")");
  }
  return text;
}

Evaluation evaluate(const Model& model, const Dataset& data, const Vocabulary& text_vocab) {
  if (data.kind != model.config().input_kind) {
    throw ConfigError("model expects " + to_string(model.config().input_kind) + " input, dataset is " +
                      to_string(data.kind));
  }
  Evaluation ev;
  ev.split = data.split;
  std::vector<TokenSeq> hyps, refs;
  for (const auto& ex : data.examples) {
    const auto out = model.translate(ex.record.frames);
    auto hyp = content_words(out, text_vocab);
    auto ref = content_words(ex.record.text_ids, text_vocab);
    Transcript t;
    t.sample = ex.path;
    t.reference = join_words(ref) + " <EOS>";
    t.hypothesis = join_words(hyp);
    if (!out.empty() && out.back() == TextTokens::kEos) t.hypothesis += t.hypothesis.empty() ? "<EOS>" : " <EOS>";
    ev.transcripts.push_back(std::move(t));
    hyps.push_back(std::move(hyp));
    refs.push_back(std::move(ref));
  }
  ev.bleu = corpus_bleu(hyps, refs);
  return ev;
}

std::string evaluation_json(const Evaluation& e) {
  json j = json::parse(bleu_json(e.bleu));
  j["split"] = e.split;
  json rows = json::array();
  for (const auto& t : e.transcripts) {
    rows.push_back({{"sample", t.sample}, {"reference", t.reference}, {"hypothesis", t.hypothesis}});
  }
  j["transcripts"] = rows;
  return j.dump(2) + "\n";
}

TrainResult train(const ModelConfig& config, const std::string& data_dir, const TrainOptions& options) {
  const auto gloss = Vocabulary::load((fs::path(data_dir) / "gloss_vocab.json").string());
  const auto text = Vocabulary::load((fs::path(data_dir) / "text_vocab.json").string());
  Session s;
  s.model = std::make_unique<Model>(config, gloss.size(), text.size());
  s.adam = std::make_unique<Adam>(s.model->named_parameters(), config.optimizer);
  return run_session(std::move(s), data_dir, options);
}

TrainResult resume_training(const std::string& checkpoint_path, const std::string& data_dir,
                            const TrainOptions& options) {
  auto ck = load_checkpoint(checkpoint_path);
  if (!ck.optimizer) throw ConfigError("checkpoint " + checkpoint_path + " has no optimizer state to resume from");
  const auto summary = read_corpus_summary(data_dir);
  if (summary.hash != ck.meta.corpus_hash) {
    throw ConfigError("checkpoint was trained on corpus " + ck.meta.corpus_hash + ", " + data_dir + " is " +
                      summary.hash);
  }
  Session s;
  s.model = std::move(ck.model);
  s.adam = std::make_unique<Adam>(s.model->named_parameters(), s.model->config().optimizer);
  s.adam->load_state(std::move(*ck.optimizer));
  s.epoch = ck.meta.epoch;
  if (!options.out_dir.empty()) {
    const auto log_path = fs::path(options.out_dir) / "train.log";
    if (fs::exists(log_path)) {
      std::istringstream in(read_text(log_path));
      for (std::string line; std::getline(in, line) && s.log.size() < s.epoch;) s.log.push_back(line);
    }
  }
  return run_session(std::move(s), data_dir, options);
}

std::vector<std::pair<std::string, ModelConfig>> ablation_configs(const ModelConfig& base) {
  std::vector<std::pair<std::string, ModelConfig>> rows;
  ModelConfig full = base;
  full.use_pe2d = full.use_attn2d = full.use_ffn2d = full.use_glosses = true;
  rows.emplace_back("P.A.", full);
  auto no_pe = full;
  no_pe.use_pe2d = false;
  rows.emplace_back("-P.E 2D", no_pe);
  auto no_attn = full;
  no_attn.use_attn2d = false;
  rows.emplace_back("-ATTN 2D", no_attn);
  auto no_ffn = full;
  no_ffn.use_ffn2d = false;
  rows.emplace_back("-FFN 2D", no_ffn);
  auto neither = full;
  neither.use_attn2d = neither.use_ffn2d = false;
  rows.emplace_back("-ATTN2D-FFN2D", neither);
  auto no_gloss = full;
  no_gloss.use_glosses = false;
  rows.emplace_back("-GLOSSES", no_gloss);
  return rows;
}

AblationReport run_ablation(const ModelConfig& base, const std::string& data_dir, const std::string& out_dir,
                            const std::function<void(const std::string&)>& on_log) {
  AblationReport report;
  report.seed = base.seed;
  report.corpus_hash = read_corpus_summary(data_dir).hash;
  if (!out_dir.empty() && !fs::exists(out_dir)) {
    if (!fs::is_directory(fs::absolute(out_dir).parent_path())) {
      throw IoError("output parent directory does not exist: " + fs::absolute(out_dir).parent_path().string());
    }
    fs::create_directory(out_dir);
  }
  const auto rows = ablation_configs(base);
  const auto dev = load_split(data_dir, "dev", base.input_kind);
  const auto test = load_split(data_dir, "test", base.input_kind);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    TrainOptions opt;
    opt.eval_split = "";
    if (!out_dir.empty()) opt.out_dir = (fs::path(out_dir) / ("row" + std::to_string(r))).string();
    opt.on_log = [&](const std::string& line) {
      if (on_log) on_log("[" + rows[r].first + "] " + line);
    };
    auto trained = train(rows[r].second, data_dir, opt);
    const auto vocab = check_vocabularies(*trained.model, data_dir);
    AblationRow row;
    row.name = rows[r].first;
    row.config = rows[r].second;
    row.dev = evaluate(*trained.model, dev, vocab).bleu;
    row.test = evaluate(*trained.model, test, vocab).bleu;
    if (on_log) {
      on_log("[" + row.name + "] dev_bleu4 " + fixed(row.dev.bleu[3]) + " test_bleu4 " + fixed(row.test.bleu[3]));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ablation_json(const AblationReport& report) {
  json rows = json::array();
  auto scores = [](const BleuReport& b) {
    return json{{"bleu1", b.bleu[0]}, {"bleu2", b.bleu[1]}, {"bleu3", b.bleu[2]}, {"bleu4", b.bleu[3]}};
  };
  for (const auto& r : report.rows) rows.push_back({{"row", r.name}, {"dev", scores(r.dev)}, {"test", scores(r.test)}});
  json j{{"seed", report.seed},
         {"corpus_hash", report.corpus_hash},
         {"columns", {"bleu1", "bleu2", "bleu3", "bleu4"}},
         {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string ablation_table(const AblationReport& report) {
  std::string out;
  char buf[160];
  for (const char* split : {"dev", "test"}) {
    std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %8s   (%s)\n", "", "BLEU1", "BLEU2", "BLEU3", "BLEU4", split);
    out += buf;
    for (const auto& r : report.rows) {
      const auto& b = std::string(split) == "dev" ? r.dev : r.test;
      std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f %8.4f\n", r.name.c_str(), b.bleu[0], b.bleu[1], b.bleu[2],
                    b.bleu[3]);
      out += buf;
    }
  }
  return out;
}

}  // namespace slt
