#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qlo/franck_hertz.hpp"
#include "qlo/integrator.hpp"
#include "qlo/oscillator.hpp"
#include "qlo/settle.hpp"

namespace qlo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

enum class Subcommand { simulate, sweep, staircase, lifetimes, uncertainty, franck_hertz };

std::string to_string(Subcommand sub);

/// Bad flag, bad config-file key or a value outside its domain.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised by parse_config for --help; carries the help text.
class HelpRequested : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Fully resolved configuration of one run.
struct RunConfig {
  Subcommand subcommand = Subcommand::simulate;
  ModelParams model;
  IntegratorConfig integrator;
  SettleCriterion settle;
  double exit_threshold = 0.1;
  std::string output_path;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;  ///< 0 means available parallelism
  std::string profile;

  struct Simulate {
    double q0 = 0.0;
    double v0 = 1.0;
  } simulate;

  struct Sweep {
    std::vector<double> v0_grid;
    std::vector<double> observation_times;
  } sweep;

  struct Staircase {
    double v0 = 0.0;
  } staircase;

  struct Lifetimes {
    std::vector<std::uint64_t> levels;
    std::size_t ensemble_size = 32;
    double chunk = 250.0;
  } lifetimes;

  struct Uncertainty {
    std::uint64_t level = 2;
    std::vector<double> delta_e;
    double escape_depth = 0.5;
  } uncertainty;

  struct FranckHertz {
    std::vector<double> t0_grid;
    CollisionConfig collision;
  } franck_hertz;

  /// key=value echo of every resolved setting, in a fixed order.
  std::vector<std::pair<std::string, std::string>> describe() const;
};

/// Parses command-line arguments (without the program name). Values from
/// --config FILE apply below flags; --profile figN values apply below both.
/// Throws ConfigError or HelpRequested.
RunConfig parse_config(std::span<const std::string> args);

/// Runs the experiment, writes the CSV and its manifest. Returns the exit
/// code: 0 on success, 3 when any numerical failure occurred.
int run(const RunConfig& config, std::ostream& log);

/// Entry point used by the executable.
int main(int argc, const char* const* argv);

/// Reads a flat `key = value` document. Blank lines and lines starting with
/// '#' are ignored.
std::vector<std::pair<std::string, std::string>> read_key_values(const std::string& path);

}  // namespace qlo::cli
