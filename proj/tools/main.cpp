// slt: synthetic sign-language translation toolkit.
#include <iostream>

#include <CLI11.hpp>

#include "slt/commands.hpp"

namespace {

void add_common(CLI::App* cmd, slt::CommandArgs& a) {
  cmd->add_option("--config", a.config_path, "JSON config file");
  cmd->add_option("--seed", a.seed, "Master seed (overrides the config)");
  cmd->add_option("--data", a.data_dir, "Corpus directory");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--split", a.split, "Dataset split")->check(CLI::IsMember({"train", "dev", "test"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially-aware transformer for sign-language translation (synthetic desk scale)"};
  app.require_subcommand(1);
  slt::CommandArgs a;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic gesture corpus");
  add_common(gen, a);
  gen->add_flag("--overwrite", a.overwrite, "Replace an existing corpus");

  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.bin and train.log to --out");
  add_common(train, a);
  train->add_option("--epochs", a.epochs, "Override the configured epoch count");
  train->add_flag("--resume", a.resume, "Continue from --checkpoint (default: <out>/checkpoint.bin)");
  train->add_option("--checkpoint", a.checkpoint, "Checkpoint to resume from");

  auto* eval = app.add_subcommand("evaluate", "BLEU and transcripts on a split");
  add_common(eval, a);
  eval->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required();

  auto* tr = app.add_subcommand("translate", "Translate one sample file");
  add_common(tr, a);
  tr->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required();
  tr->add_option("--sample", a.sample, "Sample file (.slts)")->required();

  auto* ablate = app.add_subcommand("ablate", "Train and score the six ablation rows");
  add_common(ablate, a);
  ablate->add_option("--epochs", a.epochs, "Override the configured epoch count");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient checks per component");
  add_common(grad, a);

  auto* dump = app.add_subcommand("dump-attention", "Write encoder and decoder attention maps");
  add_common(dump, a);
  dump->add_option("--checkpoint", a.checkpoint, "Trained checkpoint")->required();
  dump->add_option("--sample", a.sample, "Sample file (.slts)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto& out = std::cout;
  return slt::run_guarded([&]() -> int {
    if (*gen) return slt::cmd_gen_data(a, out);
    if (*train) return slt::cmd_train(a, out);
    if (*eval) return slt::cmd_evaluate(a, out);
    if (*tr) return slt::cmd_translate(a, out);
    if (*ablate) return slt::cmd_ablate(a, out);
    if (*grad) return slt::cmd_grad_check(a, out);
    return slt::cmd_dump_attention(a, out);
  });
}
