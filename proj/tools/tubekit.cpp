#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tubekit/config.hpp"
#include "tubekit/error.hpp"
#include "tubekit/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kInput = 2, kConfig = 3, kProcessing = 4 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  std::string in = ".";
  std::string out;
  std::string predictions;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Config file (default: scenario.cfg in the input directory, if any)");
  cmd->add_option("--seed", o.seed, "Overrides synth.seed");
  cmd->add_option("--threads", o.threads, "Overrides run.threads")->check(CLI::PositiveNumber);
  cmd->add_option("--stage-override", o.overrides, "key=value applied after the config file")->take_all();
  cmd->add_option("--in", o.in, "Input directory");
  cmd->add_option("--out", o.out, "Output directory (default: the input directory)");
}

tubekit::PipelineConfig resolve_config(const CommonOptions& o, bool read_bundle_config) {
  tubekit::PipelineConfig config;
  if (!o.config.empty()) {
    config = tubekit::PipelineConfig::load(o.config);
  } else if (read_bundle_config && fs::exists(fs::path(o.in) / tubekit::files::kScenario)) {
    config = tubekit::PipelineConfig::load((fs::path(o.in) / tubekit::files::kScenario).string());
  }
  if (o.seed) config.synth.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  for (const auto& assignment : o.overrides) {
    const auto [key, value] = tubekit::split_override(assignment);
    try {
      config.set(key, value);
    } catch (const tubekit::ConfigError& e) {
      throw tubekit::ConfigError(std::string("--stage-override: ") + e.what());
    }
  }
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action tube detection pipeline"};
  app.require_subcommand(1);
  CommonOptions opts;

  struct Command {
    const char* name;
    const char* help;
  };
  const std::vector<Command> commands{
      {"synth", "Generate a synthetic scenario bundle into --out"},
      {"fuse", "Fuse detection streams and prune proposals by flow saliency"},
      {"track", "Build candidate tubes by tracking-by-point-matching"},
      {"score", "Score tubes with the recurrent clip scorer"},
      {"prune", "Remove overlapped and drifted tubes"},
      {"localize", "Trim tubes temporally by clip scores"},
      {"evaluate", "Score final tubes against the ground truth"},
      {"pipeline", "Run fuse, track, score, prune, localize and evaluate"},
  };
  for (const auto& c : commands) {
    CLI::App* cmd = app.add_subcommand(c.name, c.help);
    add_common(cmd, opts);
    if (std::string(c.name) == "evaluate") {
      cmd->add_option("--predictions", opts.predictions, "Tube file to evaluate (default: final_tubes.jsonl)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const bool is_synth = name == "synth";
    const auto config = resolve_config(opts, !is_synth);
    const tubekit::StageDirs dirs{opts.in, opts.out.empty() ? opts.in : opts.out};
    if (is_synth) {
      tubekit::run_synth(config, dirs.out);
    } else if (name == "fuse") {
      tubekit::run_fuse(config, dirs);
    } else if (name == "track") {
      tubekit::run_track(config, dirs);
    } else if (name == "score") {
      tubekit::run_score(config, dirs);
    } else if (name == "prune") {
      tubekit::run_prune(config, dirs);
    } else if (name == "localize") {
      tubekit::run_localize(config, dirs);
    } else if (name == "evaluate") {
      std::optional<fs::path> predictions;
      if (!opts.predictions.empty()) predictions = opts.predictions;
      std::cout << tubekit::run_evaluate(config, dirs, predictions).to_table();
    } else if (name == "pipeline") {
      if (const auto report = tubekit::run_pipeline(config, dirs)) std::cout << report->to_table();
    }
  } catch (const tubekit::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const tubekit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const tubekit::ProcessingError& e) {
    std::cerr << "processing error: " << e.what() << '\n';
    return kProcessing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
