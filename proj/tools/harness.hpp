#pragma once

// Experiment runner shared by the command-line tool and the acceptance binary.

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "stirlab/experiment_config.hpp"

namespace stirlab::harness {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCapacity = 3;
inline constexpr int kExitStarved = 4;

std::string version_string();

// Thread count: STIRRINGLAB_THREADS when set, otherwise `configured`.
unsigned effective_threads(unsigned configured);

// Runs one study subcommand: simulate | profile | hydro | vstudy | stdecay |
// gradstudy | field | oracle | kernels. Writes CSVs and manifest.txt into
// out_dir. Config errors surface as ConfigError before any compute.
void run_command(const std::string& command, const ExperimentConfig& config,
                 const std::string& out_dir, const std::vector<std::string>& argv);

// Manifest next to every set of outputs.
struct ManifestInfo {
  std::string command;
  std::string config_text;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  std::vector<std::string> argv;
};
void write_manifest(const std::string& out_dir, const ManifestInfo& info);
std::string sha256_hex(const std::string& text);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool starved = false;  // failed for lack of signal rather than by contradiction
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::set<int> only;  // empty = all
  unsigned threads = 0;
  std::string out_dir;  // empty = no artifacts
};

// Runs the primary acceptance list, printing one PASS/FAIL line per criterion
// to `out` as each completes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out);

// 0 when everything passed, 4 when the only failures were signal-starved, else 1.
int acceptance_exit_code(const std::vector<CriterionResult>& results);

// Entry point shared by both executables.
int main_entry(int argc, char** argv, bool accept_only);

}  // namespace stirlab::harness
