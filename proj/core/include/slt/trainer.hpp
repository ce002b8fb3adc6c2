#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slt/adam.hpp"
#include "slt/data.hpp"
#include "slt/metrics.hpp"
#include "slt/model.hpp"

namespace slt {

struct Example {
  std::string path;  // as listed in the manifest
  std::size_t sentence_id = 0;
  SampleRecord record;
};

struct Dataset {
  InputKind kind = InputKind::kFlow;
  std::string split;
  std::vector<Example> examples;
};

// Samples of one split and input kind, in manifest order. `limit` > 0 keeps
// only the first `limit` of them.
Dataset load_split(const std::string& data_dir, const std::string& split, InputKind kind, std::size_t limit = 0);

struct Transcript {
  std::string sample;
  std::string reference;   // words + " <EOS>"
  std::string hypothesis;  // words, + " <EOS>" when the decoder emitted it
};

struct Evaluation {
  std::string split;
  BleuReport bleu;
  std::vector<Transcript> transcripts;
};

// Greedy decoding with batch norm in eval mode. Hypotheses and references
// are compared without BOS/EOS/PAD.
Evaluation evaluate(const Model& model, const Dataset& data, const Vocabulary& text_vocab);
std::string evaluation_json(const Evaluation& evaluation);

struct TrainOptions {
  // Receives checkpoint.bin and train.log after every epoch; empty keeps
  // everything in memory.
  std::string out_dir;
  // Split whose BLEU is logged each epoch ("" disables per-epoch evaluation).
  std::string eval_split = "dev";
  // Train on the first N training samples only (0 = all).
  std::size_t train_limit = 0;
  // Stop once this many epochs are complete (0 = the configured count).
  std::size_t stop_after = 0;
  // Also receives every log line (the CLI forwards them to stderr).
  std::function<void(const std::string&)> on_log;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<std::string> log;  // one line per epoch
  std::size_t epochs_completed = 0;
  std::optional<Evaluation> last_eval;
  std::string corpus_hash;
};

// Batch size 1, per-epoch order drawn from the (seed, epoch) stream. Throws
// NumericError on a non-finite loss or gradient; checkpoints already written
// are left untouched.
TrainResult train(const ModelConfig& config, const std::string& data_dir, const TrainOptions& options);

// Continues a run from its checkpoint up to the configured epoch count.
TrainResult resume_training(const std::string& checkpoint_path, const std::string& data_dir,
                            const TrainOptions& options);

// Text vocabulary of a corpus directory; ConfigError if `model` disagrees
// with the corpus vocabularies.
Vocabulary check_vocabularies(const Model& model, const std::string& data_dir);

struct AblationRow {
  std::string name;
  ModelConfig config;
  BleuReport dev;
  BleuReport test;
};

struct AblationReport {
  std::uint64_t seed = 0;
  std::string corpus_hash;
  std::vector<AblationRow> rows;
};

// The six rows: full model, -P.E 2D, -ATTN 2D, -FFN 2D, -ATTN2D-FFN2D,
// -GLOSSES, derived from `base`.
std::vector<std::pair<std::string, ModelConfig>> ablation_configs(const ModelConfig& base);

// Trains every row on the same corpus and seed and scores dev and test.
// Per-row checkpoints go to out_dir/<row index> when out_dir is non-empty.
AblationReport run_ablation(const ModelConfig& base, const std::string& data_dir, const std::string& out_dir,
                            const std::function<void(const std::string&)>& on_log = {});
std::string ablation_json(const AblationReport& report);
std::string ablation_table(const AblationReport& report);

}  // namespace slt
