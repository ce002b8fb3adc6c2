#include "slt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "slt/checkpoint.hpp"
#include "slt/config.hpp"
#include "slt/data.hpp"
#include "slt/error.hpp"
#include "slt/grad_suite.hpp"
#include "slt/log.hpp"
#include "slt/trainer.hpp"

namespace slt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ConfigFile config_from(const CommandArgs& args) {
  ConfigFile c = args.config_path.empty() ? ConfigFile{} : load_config(args.config_path);
  if (args.seed) {
    c.corpus.seed = *args.seed;
    c.model.seed = *args.seed;
  }
  if (args.epochs) c.model.epochs = *args.epochs;
  c.model.validate();
  c.corpus.validate();
  return c;
}

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw ConfigError(std::string(command) + " needs " + flag);
}

void emit(const std::string& text, const CommandArgs& args, std::ostream& report, const std::string& file_name) {
  report << text;
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    std::ofstream out(fs::path(args.out) / file_name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (fs::path(args.out) / file_name).string());
    out << text;
  }
}

void ensure_dir(const fs::path& dir) {
  if (fs::exists(dir)) return;
  const auto parent = fs::absolute(dir).parent_path();
  if (!fs::is_directory(parent)) throw IoError("output parent directory does not exist: " + parent.string());
  fs::create_directories(dir);
}

// Writes `m` ([rows, cols]) as CSV and as an 8-bit PGM scaled by the max.
void write_grid(const fs::path& csv, const fs::path& pgm, std::span<const double> m, std::size_t rows,
                std::size_t cols) {
  std::ofstream c(csv, std::ios::binary);
  if (!c) throw IoError("cannot write " + csv.string());
  char buf[40];
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m[i * cols + j]);
      c << buf << (j + 1 < cols ? "," : "\n");
    }
  }
  std::ofstream p(pgm, std::ios::binary);
  if (!p) throw IoError("cannot write " + pgm.string());
  p << "P5\n" << cols << " " << rows << "\n255\n";
  const double top = std::max(1e-300, *std::max_element(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(rows * cols)));
  for (std::size_t i = 0; i < rows * cols; ++i) {
    p.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(m[i] / top, 0.0, 1.0)))));
  }
}

}  // namespace

int cmd_gen_data(const CommandArgs& args, std::ostream& report) {
  const auto config = config_from(args);
  const std::string dir = !args.out.empty() ? args.out : args.data_dir;
  require(dir, "--out (or --data)", "gen-data");
  const auto summary = generate_dataset(config.corpus, dir, args.overwrite);
  log::info("generated " + std::to_string(summary.samples) + " samples (" + std::to_string(summary.train) + " train, " +
            std::to_string(summary.dev) + " dev, " + std::to_string(summary.test) + " test) in " + dir);
  report << corpus_summary_json(summary, config.corpus);
  return 0;
}

int cmd_train(const CommandArgs& args, std::ostream& report) {
  require(args.data_dir, "--data", "train");
  require(args.out, "--out", "train");
  TrainOptions opt;
  opt.out_dir = args.out;
  opt.on_log = [](const std::string& line) { log::info(line); };
  TrainResult result;
  if (args.resume) {
    const std::string ck = args.checkpoint.empty() ? (fs::path(args.out) / "checkpoint.bin").string() : args.checkpoint;
    result = resume_training(ck, args.data_dir, opt);
  } else {
    result = train(config_from(args).model, args.data_dir, opt);
  }
  json j{{"epochs", result.epochs_completed},
         {"checkpoint", (fs::path(args.out) / "checkpoint.bin").string()},
         {"corpus_hash", result.corpus_hash},
         {"log", result.log}};
  if (result.last_eval) j["dev"] = json::parse(bleu_json(result.last_eval->bleu));
  report << j.dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const CommandArgs& args, std::ostream& report) {
  require(args.checkpoint, "--checkpoint", "evaluate");
  require(args.data_dir, "--data", "evaluate");
  const auto ck = load_checkpoint(args.checkpoint);
  const auto vocab = check_vocabularies(*ck.model, args.data_dir);
  const auto summary = read_corpus_summary(args.data_dir);
  if (summary.hash != ck.meta.corpus_hash) {
    log::warn("checkpoint was trained on corpus " + ck.meta.corpus_hash + "; evaluating on " + summary.hash);
  }
  const auto data = load_split(args.data_dir, args.split, ck.model->config().input_kind);
  const auto ev = evaluate(*ck.model, data, vocab);
  log::info(args.split + " bleu4 " + std::to_string(ev.bleu.bleu[3]));
  emit(evaluation_json(ev), args, report, "evaluation_" + args.split + ".json");
  return 0;
}

int cmd_translate(const CommandArgs& args, std::ostream& report) {
  require(args.checkpoint, "--checkpoint", "translate");
  require(args.sample, "--sample", "translate");
  const auto ck = load_checkpoint(args.checkpoint);
  const auto rec = load_sample(args.sample);
  if (rec.kind != ck.model->config().input_kind) {
    throw ConfigError("sample is " + to_string(rec.kind) + " but the model expects " +
                      to_string(ck.model->config().input_kind));
  }
  const auto vocab = Grammar::text_vocabulary();
  if (vocab.size() != ck.model->text_vocab()) throw ConfigError("checkpoint text vocabulary does not match the corpus grammar");
  const auto ids = ck.model->translate(rec.frames);
  std::vector<std::string> words;
  for (auto id : ids) {
    if (id != TextTokens::kBos && id != TextTokens::kEos) words.push_back(vocab.token(id));
  }
  std::string text = join_words(words);
  if (!ids.empty() && ids.back() == TextTokens::kEos) text += text.empty() ? "<EOS>" : " <EOS>";
  json j{{"sample", args.sample}, {"hypothesis", text}, {"token_ids", ids}};
  report << j.dump() << "\n";
  return 0;
}

int cmd_ablate(const CommandArgs& args, std::ostream& report) {
  require(args.data_dir, "--data", "ablate");
  const auto config = config_from(args);
  const auto result = run_ablation(config.model, args.data_dir, args.out, [](const std::string& l) { log::info(l); });
  std::istringstream table(ablation_table(result));
  for (std::string line; std::getline(table, line);) log::info(line);
  emit(ablation_json(result), args, report, "ablation.json");
  return 0;
}

int cmd_grad_check(const CommandArgs& args, std::ostream& report) {
  const auto config = config_from(args);
  const auto suite = run_grad_suite(standard_grad_components(config.model));
  for (const auto& row : suite.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s max_rel_err %.3e  %s", row.name.c_str(), row.result.max_relative_error,
                  row.passed ? "ok" : "FAIL");
    log::info(buf);
  }
  emit(grad_suite_json(suite), args, report, "grad_check.json");
  return suite.passed() ? 0 : 2;
}

int cmd_dump_attention(const CommandArgs& args, std::ostream& report) {
  require(args.checkpoint, "--checkpoint", "dump-attention");
  require(args.sample, "--sample", "dump-attention");
  require(args.out, "--out", "dump-attention");
  const auto ck = load_checkpoint(args.checkpoint);
  const auto& model = *ck.model;
  const auto rec = load_sample(args.sample);
  if (rec.kind != model.config().input_kind) {
    throw ConfigError("sample is " + to_string(rec.kind) + " but the checkpoint expects " +
                      to_string(model.config().input_kind) + " input");
  }
  const fs::path out(args.out);
  ensure_dir(out);
  fs::create_directories(out / "images");

  NoGradGuard no_grad;
  const auto enc = model.encoder().forward(rec.frames, ops::NormMode::kEval);
  const auto tokens = model.decoder().greedy_decode(enc.memory, model.config().max_decode_len);
  const auto dec = model.decoder().forward(enc.memory, tokens);

  std::vector<std::string> files;
  char name[64];
  if (enc.attention.defined()) {
    const std::size_t frames = enc.attention.dim(0), n = enc.attention.dim(1);
    const auto a = enc.attention.data();
    for (std::size_t t = 0; t < frames; ++t) {
      std::snprintf(name, sizeof name, "encoder_frame%02zu", t);
      write_grid(out / (std::string(name) + ".csv"), out / "images" / (std::string(name) + ".pgm"),
                 a.subspan(t * n * n, n * n), n, n);
      files.push_back(std::string(name) + ".csv");
    }
  } else {
    log::warn("model has no 2D attention; only decoder maps are written");
  }
  for (std::size_t l = 0; l < dec.self_attn.size(); ++l) {
    for (const auto* which : {&dec.self_attn, &dec.cross_attn}) {
      const auto& w = (*which)[l];
      const std::size_t heads = w.dim(0), rows = w.dim(1), cols = w.dim(2);
      for (std::size_t h = 0; h < heads; ++h) {
        std::snprintf(name, sizeof name, "decoder_layer%zu_%s_head%zu", l, which == &dec.self_attn ? "self" : "cross", h);
        write_grid(out / (std::string(name) + ".csv"), out / "images" / (std::string(name) + ".pgm"),
                   w.data().subspan(h * rows * cols, rows * cols), rows, cols);
        files.push_back(std::string(name) + ".csv");
      }
    }
  }
  json j{{"sample", args.sample}, {"out", args.out}, {"tokens", tokens}, {"files", files}};
  report << j.dump(2) << "\n";
  return 0;
}

int run_guarded(const std::function<int()>& command) {
  try {
    return command();
  } catch (const Error& e) {
    log::error(e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    log::error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log::error(std::string("unexpected error: ") + e.what());
    return 1;
  }
}

}  // namespace slt
