#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pvlab::cli {

inline constexpr int kConfigVersion = 1;
inline constexpr const char* kToolVersion = "pvlab 1.0.0";

// Stable exit-code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

struct RunOptions {
  std::string config_path;  // empty selects the built-in default (verify only)
  std::string out_dir = "pvlab-out";
  bool has_seed_override = false;
  std::uint64_t seed_override = 0;
  int threads = 1;
};

int cmd_augment(const RunOptions& options);
int cmd_oracle(const RunOptions& options);
int cmd_fit(const RunOptions& options);
int cmd_generate(const RunOptions& options);
int cmd_verify(const RunOptions& options);

// Maps a thrown exception to the exit-code contract and prints the message
// on standard error. Used by the tool entry point around every command.
int run_command(const char* name, int (*command)(const RunOptions&),
                const RunOptions& options);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pvlab::cli
