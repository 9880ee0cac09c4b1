#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "terrasense/io.hpp"
#include "terrasense/pipeline.hpp"

namespace fs = std::filesystem;
using namespace terrasense;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "out";
  std::string bundle;
  bool force = false;
  std::string experiment;
  std::string start;
  std::string goal;
};

pipeline::PipelineConfig load_config(const Options& o) {
  KeyValueConfig kv;
  if (!o.config_path.empty()) kv = KeyValueConfig::load(o.config_path);
  for (const auto& s : o.overrides) kv.merge(KeyValueConfig::parse(s));
  if (o.seed_set) kv.set("seed", std::to_string(o.seed));
  return pipeline::PipelineConfig::from_kv(kv);
}

mapplan::Cell parse_cell(const std::string& text, const char* what) {
  int r = 0;
  int c = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d,%d%c", &r, &c, &tail) != 2) {
    throw ConfigError(std::string(what) + " must be ROW,COL (got '" + text + "')");
  }
  return {r, c};
}

fs::path bundle_path(const Options& o) {
  if (o.bundle.empty()) throw ConfigError("--bundle is required for this command");
  if (!fs::exists(fs::path(o.bundle) / "manifest.txt")) throw ConfigError("no dataset bundle at " + o.bundle);
  return o.bundle;
}

void print_metrics(const fs::path& csv) {
  const auto t = io::read_csv(csv);
  for (const auto& row : t.rows) {
    std::cout << row.at(0) << (row.at(1) == "all" ? "" : "[" + row.at(1) + "]") << " = " << row.at(2) << "\n";
  }
}

int run(const std::string& cmd, const Options& o) {
  const auto config = load_config(o);
  const fs::path out = o.out;
  using Stage = void (*)(const fs::path&, const fs::path&, const pipeline::PipelineConfig&);
  const std::vector<std::pair<std::string, Stage>> stages{
      {"spectrogram", pipeline::stages::spectrogram}, {"features", pipeline::stages::features},
      {"triplets", pipeline::stages::make_triplets},  {"train-encoder", pipeline::stages::train_encoder},
      {"cluster", pipeline::stages::cluster},         {"label", pipeline::stages::label},
      {"train-seg", pipeline::stages::train_seg},     {"evaluate", pipeline::stages::evaluate},
      {"map", pipeline::stages::map}};

  if (cmd == "generate") {
    pipeline::write_dataset(out, config, o.force);
    std::cout << "bundle written to " << out.string() << "\n";
    return 0;
  }
  for (const auto& [name, fn] : stages) {
    if (cmd != name) continue;
    fn(bundle_path(o), out, config);
    if (cmd == "evaluate") print_metrics(out / "evaluate" / "metrics.csv");
    return 0;
  }
  if (cmd == "pipeline") {
    pipeline::stages::all(bundle_path(o), out, config);
    print_metrics(out / "evaluate" / "metrics.csv");
    return 0;
  }
  if (cmd == "plan") {
    pipeline::stages::plan(out, config, {parse_cell(o.start, "--start"), parse_cell(o.goal, "--goal")});
    const auto t = io::read_csv(out / "plan" / "report.csv");
    for (const auto& row : t.rows) {
      std::cout << row[0] << ": " << row[1] << " cells, uniform cost " << row[2] << ", terrain cost " << row[3] << "\n";
    }
    return 0;
  }
  if (cmd == "experiment") {
    const auto rows = pipeline::run_experiment(o.experiment, config);
    fs::create_directories(out);
    const auto path = out / ("experiment_" + o.experiment + ".csv");
    pipeline::write_experiment_csv(path, "variable", rows);
    for (const auto& r : rows) {
      std::cout << o.experiment << "=" << r.variable << " seed=" << r.seed << " accuracy=" << r.clustering_accuracy
                << " nmi=" << r.nmi << "\n";
    }
    return 0;
  }
  throw ConfigError("unknown command " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised acoustic terrain labeling, weak segmentation and terrain-aware planning"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "key=value config file");
  app.add_option("--set", o.overrides, "Extra key=value setting (repeatable)");
  auto* seed = app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--force", o.force, "Overwrite an existing bundle");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "Write a synthetic dataset bundle to --out"},
      {"spectrogram", "Encoder inputs from the bundle's clips"},
      {"features", "Terrain patches and visual features along the path"},
      {"triplets", "Form triplets from the visual features"},
      {"train-encoder", "Train the audio encoder on the triplets"},
      {"cluster", "Embed and cluster the clips"},
      {"label", "Project clip clusters onto the images as weak labels"},
      {"train-seg", "Train the segmenter on the weak labels"},
      {"evaluate", "Clustering and segmentation metrics against the held-out truth"},
      {"map", "Fuse segmenter predictions into a semantic map"},
      {"plan", "Uniform and terrain-aware trajectories on the semantic map"},
      {"experiment", "Sweep snr, triplet_count, sampling or correct_ratio"},
      {"pipeline", "Run every stage from spectrogram to evaluate"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name != "generate" && name != "plan" && name != "experiment") {
      sub->add_option("--bundle", o.bundle, "Dataset bundle directory")->required();
    }
    if (name == "plan") {
      sub->add_option("--start", o.start, "Start cell ROW,COL")->required();
      sub->add_option("--goal", o.goal, "Goal cell ROW,COL")->required();
    }
    if (name == "experiment") sub->add_option("name", o.experiment, "Experiment name")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  o.seed_set = seed->count() > 0;
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "stage " << cmd << ": " << e.what() << "\n";
    return 3;
  }
}
