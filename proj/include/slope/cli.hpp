#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "slope/montecarlo.hpp"
#include "slope/prox.hpp"

namespace slope::cli {

enum class Command {
  solve,
  prox,
  pattern,
  simulate_fdr,
  simulate_pattern,
  limiting,
  recovery,
  attainability,
  hausdorff_check,
};

enum class Format { csv, json };

std::optional<Command> parse_command(std::string_view name);
std::string command_name(Command command);

struct RunManifest {
  Command command = Command::pattern;
  std::filesystem::path config_path;
  std::filesystem::path output_path;
  Format format = Format::csv;
  std::optional<std::uint64_t> seed;
  /// 0 uses the hardware concurrency.
  unsigned threads = 0;
};

/// Invalid configuration; `what()` starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig parse_experiment_config(std::string_view text);
ModelSpec parse_model_spec(std::string_view text);
ProxRequest parse_prox_request(std::string_view text);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitIo = 3;

/// Executes one command; the one-line summary goes to `out`, diagnostics to `err`.
int run(const RunManifest& manifest, std::ostream& out, std::ostream& err);

/// Command-line entry point: slope <command> --config --out [--format] [--seed] [--threads].
int main(int argc, char** argv);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view value);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace slope::cli
