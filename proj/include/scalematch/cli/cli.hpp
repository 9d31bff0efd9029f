#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scalematch/pipeline/pipeline.hpp"
#include "scalematch/stats/scale_stats.hpp"

namespace scalematch::cli {

inline constexpr std::string_view kEnvPrefix = "SCALEMATCH_";
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct CliConfig {
  std::string command;
  pipeline::PipelineConfig pipeline;
  std::string method = "msm+";
  std::string layout = "equal-width";
  std::filesystem::path source;
  std::filesystem::path source_images;
  std::filesystem::path target;
  std::filesystem::path out;
  std::filesystem::path report;
  std::filesystem::path csv;
  std::filesystem::path svg;
  std::string which = "after";
  bool skip_ignored = false;
  bool quiet = false;
};

/// Parses argv (argv[0] is the program name). Values resolve as: flag, then
/// --config file (TOML), then SCALEMATCH_* environment variable, then the
/// built-in default. Throws UsageError on bad input.
CliConfig parse_args(const std::vector<std::string>& args);

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by parse_args for --help; what() is the help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int cmd_transform(const CliConfig& cfg, std::ostream& err);
int cmd_report(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_plot(const CliConfig& cfg, std::ostream& err);

/// Entry point shared by the binary and the tests. Errors are reported on
/// `err` as a single line starting with "scalematch: error[<kind>]:".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Standalone SVG with the source and target PMFs as overlaid bar series
/// (one <rect class="bar ..."> per bin and series) and the JS value.
std::string render_svg(const stats::DivergenceReport& report, std::string_view title);

}  // namespace scalematch::cli
