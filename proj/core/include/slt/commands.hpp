#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace slt {

// Flags shared by the command-line front end. Empty strings mean "not given".
struct CommandArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data_dir;
  std::string out;
  std::string split = "test";
  std::string checkpoint;
  std::string sample;
  std::optional<std::size_t> epochs;
  bool overwrite = false;
  bool resume = false;
};

// Every command writes its JSON report to `report` (or to `args.out` where
// noted) and line-oriented progress through slt::log. They throw slt::Error
// subclasses; exit codes are derived from those by the caller.
int cmd_gen_data(const CommandArgs& args, std::ostream& report);
int cmd_train(const CommandArgs& args, std::ostream& report);
int cmd_evaluate(const CommandArgs& args, std::ostream& report);
int cmd_translate(const CommandArgs& args, std::ostream& report);
int cmd_ablate(const CommandArgs& args, std::ostream& report);
// Returns 2 when any component exceeds the tolerance.
int cmd_grad_check(const CommandArgs& args, std::ostream& report);
int cmd_dump_attention(const CommandArgs& args, std::ostream& report);

// Runs `command`, mapping slt::Error to its exit code (after logging it) and
// any other exception to 1.
int run_guarded(const std::function<int()>& command);

}  // namespace slt
