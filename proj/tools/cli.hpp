#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rsum/config.hpp"

namespace rsum::cli {

/// Parses argv, runs one command, and returns the process exit code: 0 on
/// success, nonzero when parsing or any delegate failed.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

void cmd_pretrain_data(const config::RunConfig& cfg, std::ostream& out);
void cmd_pretrain(const config::RunConfig& cfg, std::ostream& out);
void cmd_train_rl(const config::RunConfig& cfg, std::ostream& out);
void cmd_summarize(const config::RunConfig& cfg, std::ostream& out);
void cmd_evaluate(const config::RunConfig& cfg, std::ostream& out);

}  // namespace rsum::cli
