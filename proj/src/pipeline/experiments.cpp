#include <cmath>

#include "terrasense/io.hpp"
#include "terrasense/pipeline.hpp"

namespace terrasense::pipeline {

namespace {

// Index used as the variable of the sampling experiment.
const std::vector<std::string>& sampling_variants() {
  static const std::vector<std::string> v{"ground_truth",      "random/random",     "cluster/distance",
                                          "cluster/cluster",   "distance/distance", "distance/cluster"};
  return v;
}

std::vector<double> default_grid(const std::string& name) {
  if (name == "snr") return {0, 10, 20, 30, 40, 50, 60};
  if (name == "triplet_count") return {30, 100, 300, 1000, 3000};
  if (name == "correct_ratio") return {0.2, 0.4, 0.6, 0.8, 1.0};
  return {0, 1, 2, 3, 4, 5};
}

ExperimentRow row(double v, std::uint64_t seed, double acc, double nmi) { return {v, seed, acc, nmi}; }

}  // namespace

std::vector<ExperimentRow> run_experiment(const std::string& name, const PipelineConfig& config) {
  if (name != "snr" && name != "triplet_count" && name != "sampling" && name != "correct_ratio") {
    throw ConfigError("unknown experiment: " + name + " (expected snr, triplet_count, sampling or correct_ratio)");
  }
  const auto grid = config.grid.empty() ? default_grid(name) : config.grid;
  RunOptions opts;
  opts.segmentation = false;

  std::vector<ExperimentRow> rows;
  for (std::uint64_t seed : config.seeds) {
    auto base = config;
    base.seed = seed;
    const auto data = generate_dataset(base);

    if (name == "snr") {
      const auto run = run_pipeline(data, base, opts);
      const auto val = generate_dataset(base, true);
      for (double snr : grid) {
        const auto labels = label_clips(run.clusterer, val.bundle.clips, base, snr, base.stage_seed(7));
        rows.push_back(row(snr, seed, cluster::clustering_accuracy(labels, val.truth.clip_classes),
                           cluster::nmi(val.truth.clip_classes, labels)));
      }
      continue;
    }
    for (double v : grid) {
      auto cfg = base;
      if (name == "triplet_count") {
        if (v < 1 || v != std::floor(v)) throw ConfigError("triplet counts must be positive integers");
        cfg.triplet_count = static_cast<std::size_t>(v);
      } else if (name == "correct_ratio") {
        cfg.correct_ratio = v;
      } else {
        const auto& variants = sampling_variants();
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(variants.size())) {
          throw ConfigError("sampling grid entries index the mechanism table 0.." + std::to_string(variants.size() - 1));
        }
        cfg.mechanism = triplets::SamplingMechanism::parse(variants[static_cast<std::size_t>(v)]);
      }
      cfg.validate();
      const auto m = run_pipeline(data, cfg, opts).metrics;
      rows.push_back(row(v, seed, m.clustering_accuracy, m.nmi));
    }
  }
  return rows;
}

void write_experiment_csv(const std::filesystem::path& path, const std::string& variable,
                          const std::vector<ExperimentRow>& rows) {
  io::CsvTable t;
  t.header = {variable, "seed", "clustering_accuracy", "nmi"};
  for (const auto& r : rows) {
    t.rows.push_back({io::format_double(r.variable), std::to_string(r.seed), io::format_double(r.clustering_accuracy),
                      io::format_double(r.nmi)});
  }
  io::write_csv(path, t);
}

}  // namespace terrasense::pipeline
