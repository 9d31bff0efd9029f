#include "scalematch/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scalematch/core/coco_io.hpp"
#include "scalematch/core/error.hpp"

namespace scalematch::cli {
namespace {

std::string env_name(std::string_view flag) {
  std::string name(kEnvPrefix);
  for (char c : flag) {
    name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return name;
}

template <typename T>
CLI::Option* add(CLI::App& app, const std::string& flag, T& target, const std::string& help) {
  return app.add_option("--" + flag, target, help)->envname(env_name(flag))->capture_default_str();
}

void require(const std::filesystem::path& value, std::string_view flag) {
  if (value.empty()) throw UsageError("missing required option --" + std::string(flag));
}

void require_readable(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorKind::kIo, "cannot read " + path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

DatasetIndex load_source_for(const std::filesystem::path& path, match::MatchMethod method) {
  DatasetIndex index = load_index(path, IndexRole::kBoxesOnly);
  if (!match::is_instance_level(method)) return index;
  std::vector<Id> missing;
  for (const auto& [id, inst] : index.instances()) {
    if (!inst.has_segmentation()) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "method " << match::to_string(method) << " needs segmentation masks; "
        << missing.size() << " annotation(s) lack one (first id " << missing.front() << ")";
    throw Error(ErrorKind::kPrecondition, msg.str());
  }
  return std::move(index).with_role(IndexRole::kSourceWithMasks);
}

stats::DivergenceReport report_from_indices(const CliConfig& cfg) {
  require(cfg.source, "source");
  require(cfg.target, "target");
  const stats::SizeFilter filter{!cfg.skip_ignored};
  const DatasetIndex source = load_index(cfg.source, IndexRole::kBoxesOnly);
  const DatasetIndex target = load_index(cfg.target, IndexRole::kBoxesOnly);
  return stats::compare_sizes(stats::collect_sizes(source, filter),
                              stats::collect_sizes(target, filter), cfg.pipeline.bins);
}

}  // namespace

CliConfig parse_args(const std::vector<std::string>& args) {
  CliConfig cfg;
  CLI::App app{"Rewrites an instance-segmentation dataset so its object-size distribution "
               "matches a target dataset", "scalematch"};
  app.set_config("--config", "", "TOML file with any of the long options as keys");
  app.require_subcommand(1);

  auto& p = cfg.pipeline;
  add(app, "source", cfg.source, "Source COCO JSON");
  add(app, "source-images", cfg.source_images, "Directory holding the source images");
  add(app, "target", cfg.target, "Target COCO JSON (boxes only)");
  add(app, "out", cfg.out, "Output directory");
  add(app, "report", cfg.report, "Report JSON path (written by transform/report, read by plot)");
  add(app, "csv", cfg.csv, "Histogram CSV path for the report command");
  add(app, "svg", cfg.svg, "SVG output path for the plot command");
  add(app, "method", cfg.method, "Scale match method")
      ->check(CLI::IsMember({"rsm", "msm", "rsm+", "msm+", "cp", "cp+"}));
  add(app, "psi-p", p.psi_p, "Probability of keeping the inpainted background")
      ->check(CLI::Range(0.0, 1.0));
  add(app, "bins", p.bins, "Histogram bins")->check(CLI::PositiveNumber);
  add(app, "layout", cfg.layout, "Target histogram layout")
      ->check(CLI::IsMember({"equal-width", "equal-frequency"}));
  add(app, "tail-quantile", p.tail_quantile, "Target sizes above this quantile are trimmed");
  add(app, "seed", p.seed, "Random seed");
  add(app, "workers", p.workers, "Worker threads")->check(CLI::PositiveNumber);
  add(app, "matting-radius", p.matting.radius, "Matte feather radius (px)")
      ->check(CLI::NonNegativeNumber);
  add(app, "matting-eps", p.matting.regularization, "Guided filter regularization");
  add(app, "inpaint-iters", p.inpaint.max_iters, "Maximum diffusion sweeps")
      ->check(CLI::NonNegativeNumber);
  add(app, "inpaint-tol", p.inpaint.tol, "Diffusion stopping tolerance (intensity levels)");
  add(app, "which", cfg.which, "Report section to plot")->check(CLI::IsMember({"before", "after"}));
  app.add_flag("--skip-ignored", cfg.skip_ignored, "Leave crowd/ignore boxes out of statistics")
      ->envname(env_name("skip-ignored"));
  app.add_flag("--quiet", cfg.quiet, "No progress output");

  for (const char* name : {"transform", "report", "plot"}) {
    app.add_subcommand(name)->fallthrough();
  }
  app.get_subcommand("transform")->description("Transform a source dataset");
  app.get_subcommand("report")->description("Divergences between two datasets' size distributions");
  app.get_subcommand("plot")->description("Render a report or dataset pair as SVG");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  // CLI11 drops environment values that fail validation; surface them instead.
  for (const CLI::Option* opt : app.get_options()) {
    const std::string& env = opt->get_envname();
    if (env.empty() || opt->count() > 0) continue;
    if (const char* value = std::getenv(env.c_str()); value != nullptr && *value != '\0') {
      throw UsageError(env + ": invalid value '" + value + "' for " + opt->get_name());
    }
  }
  cfg.command = app.get_subcommands().front()->get_name();
  p.method = match::parse_method(cfg.method);
  p.layout = stats::parse_bin_layout(cfg.layout);
  p.include_ignored = !cfg.skip_ignored;
  return cfg;
}

int cmd_transform(const CliConfig& cfg, std::ostream& err) {
  require(cfg.source, "source");
  require(cfg.source_images, "source-images");
  require(cfg.target, "target");
  require(cfg.out, "out");
  cfg.pipeline.validate();
  require_readable(cfg.source);
  require_readable(cfg.target);
  if (!std::filesystem::is_directory(cfg.source_images)) {
    throw Error(ErrorKind::kIo, "not a directory: " + cfg.source_images.string());
  }

  const DatasetIndex source = load_source_for(cfg.source, cfg.pipeline.method);
  const DatasetIndex target = load_index(cfg.target, IndexRole::kBoxesOnly);
  if (!cfg.quiet) {
    err << "scalematch: " << match::to_string(cfg.pipeline.method) << " over "
        << source.images().size() << " images, " << source.instances().size() << " instances\n";
  }
  std::size_t last_decile = 0;
  const pipeline::ProgressFn progress = [&](std::size_t done, std::size_t total) {
    if (cfg.quiet) return;
    const std::size_t decile = total == 0 ? 10 : done * 10 / total;
    if (decile != last_decile || done == total) {
      last_decile = decile;
      err << "scalematch: [" << done << "/" << total << "] images\n";
    }
  };
  const auto result =
      pipeline::run_to_directory(source, target, cfg.pipeline, cfg.source_images, cfg.out, progress);
  if (!cfg.report.empty()) {
    write_file(cfg.report, pipeline::to_json(result.report).dump(2) + "\n");
  }
  if (!cfg.quiet) {
    err << "scalematch: js before " << result.report.before.js << ", after "
        << result.report.after.js << "; swapped " << result.report.swapped << "/"
        << result.report.psi_draws << "; dropped " << result.report.dropped_instances
        << " instances; " << result.report.failures.size() << " image failures\n";
  }
  return kExitOk;
}

int cmd_report(const CliConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  const auto report = report_from_indices(cfg);
  if (!cfg.report.empty()) write_file(cfg.report, stats::to_json(report).dump(2) + "\n");
  if (!cfg.csv.empty()) write_file(cfg.csv, stats::to_csv(report));
  out.precision(10);
  out << "kl_forward\t" << report.kl_forward << "\nkl_backward\t" << report.kl_backward
      << "\njs\t" << report.js << "\n";
  return kExitOk;
}

int cmd_plot(const CliConfig& cfg, std::ostream& /*err*/) {
  require(cfg.svg, "svg");
  stats::DivergenceReport report;
  std::string title = "Object size distribution";
  if (!cfg.report.empty()) {
    std::ifstream in(cfg.report, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + cfg.report.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("report JSON: ") + e.what(), e.byte);
    }
    if (doc.contains("js")) {
      report = stats::divergence_report_from_json(doc);
    } else if (doc.contains(cfg.which)) {
      report = stats::divergence_report_from_json(doc.at(cfg.which));
      title += " (" + doc.value("method", std::string("?")) + ", " + cfg.which + ")";
    } else {
      throw Error(ErrorKind::kParse, "report has neither divergences nor a '" + cfg.which + "' section");
    }
  } else {
    report = report_from_indices(cfg);
  }
  write_file(cfg.svg, render_svg(report, title));
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const CliConfig cfg = parse_args(args);
    if (cfg.command == "transform") return cmd_transform(cfg, err);
    if (cfg.command == "report") return cmd_report(cfg, out, err);
    return cmd_plot(cfg, err);
  } catch (const HelpRequested& e) {
    out << e.what();
    return kExitOk;
  } catch (const UsageError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "scalematch: error[usage]: " << msg << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "scalematch: error[" << to_string(e.kind()) << "]: " << msg << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "scalematch: error[internal]: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace scalematch::cli
