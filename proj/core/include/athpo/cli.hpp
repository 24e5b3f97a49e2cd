#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "athpo/manifest.hpp"

namespace athpo {

// Command-line flags that override manifest entries.
struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  std::optional<std::vector<std::int64_t>> seed_list;
  std::optional<double> epsilon;
};

// Exit codes: 0 ok, 1 internal error, 2 input/coverage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

void cmd_sweep(const Manifest& m, const CliOverrides& o, std::ostream& log);
void cmd_analyze(const Manifest& m, const CliOverrides& o, std::ostream& log);
void cmd_replay(const Manifest& m, const CliOverrides& o, std::ostream& log);
void cmd_tune(const Manifest& m, const CliOverrides& o, std::ostream& log);

// Dispatches to the cmd_* above and maps exceptions onto exit codes.
int run_cli_command(const std::string& subcommand, const Manifest& m,
                    const CliOverrides& o, std::ostream& log);

// Full usage text, including every manifest key each subcommand accepts.
std::string help_text();

}  // namespace athpo
