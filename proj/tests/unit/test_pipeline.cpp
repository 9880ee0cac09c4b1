#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "terrasense/io.hpp"
#include "terrasense/pipeline.hpp"

using namespace terrasense;
using namespace terrasense::pipeline;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.seed = 4;
  c.world_size_m = 20.0;
  c.num_waypoints = 40;
  c.waypoint_margin_m = 2.0;
  c.num_clips = 200;
  c.speed_min_mps = 0.6;
  c.speed_max_mps = 1.2;
  c.validation_clips = 60;
  c.triplet_count = 400;
  c.train.epochs = 15;
  c.seg.epochs = 3;
  c.seg.pixels_per_image = 150;
  return c;
}

const Dataset& small_dataset() {
  static const Dataset d = generate_dataset(small_config());
  return d;
}

}  // namespace

TEST_CASE("datasets are reproducible and hold every class") {
  const auto& d = small_dataset();
  const auto again = generate_dataset(small_config());
  REQUIRE(d.bundle.clips.size() == 200);
  CHECK(d.bundle.info.spec_hash == again.bundle.info.spec_hash);
  CHECK(d.bundle.clips[17].samples == again.bundle.clips[17].samples);
  CHECK(d.truth.clip_classes == again.truth.clip_classes);
  CHECK(std::set<int>(d.truth.clip_classes.begin(), d.truth.clip_classes.end()).size() == 5);
  CHECK(d.bundle.images.size() == d.truth.image_truth.size());

  auto other = small_config();
  other.audio.hum_amplitude += 0.01;
  CHECK(generate_dataset(other).bundle.info.spec_hash != d.bundle.info.spec_hash);
  const auto val = generate_dataset(small_config(), true);
  CHECK(val.bundle.clips.size() == 60);
  CHECK(val.bundle.info.spec_hash != d.bundle.info.spec_hash);
}

TEST_CASE("audio inputs are pooled, scaled columns") {
  const auto& d = small_dataset();
  const auto cfg = small_config();
  const auto in = audio_inputs(d.bundle.clips, cfg);
  CHECK(in.x.rows() == 256);
  CHECK(in.x.cols() == 200);
  CHECK(in.x.minCoeff() >= -1e-12);
  CHECK(in.x.maxCoeff() <= 1.0 + 1e-12);
  const auto reused = audio_inputs(d.bundle.clips, cfg, &in.scaler);
  CHECK(reused.x == in.x);
  const auto noisy = audio_inputs(d.bundle.clips, cfg, &in.scaler, 0.0, 5);
  CHECK(noisy.x != in.x);
  CHECK(audio_inputs(d.bundle.clips, cfg, &in.scaler, 0.0, 5).x == noisy.x);
}

TEST_CASE("clips take the image nearest in time") {
  synth::TrainingBundle b;
  b.clips.resize(12);
  b.images.resize(3);
  b.images[0].clip_index = 0;
  b.images[1].clip_index = 4;
  b.images[2].clip_index = 10;
  const auto owner = image_for_clips(b);
  CHECK(owner == std::vector<int>{0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2});  // clip 2 and 7 are ties
}

TEST_CASE("path pieces carry their clip") {
  const auto& d = small_dataset();
  std::vector<int> ids(d.bundle.clips.size());
  for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = static_cast<int>(j) % 5;
  const auto segs = path_segments_in_image(d.bundle, 1, ids);
  REQUIRE(!segs.empty());
  bool has_own = false;
  for (const auto& s : segs) {
    CHECK(s.class_id == ids[static_cast<std::size_t>(s.provenance)]);
    has_own = has_own || s.provenance == d.bundle.images[1].clip_index;
  }
  CHECK(has_own);
  // The robot sits at the centre of the view at its own clip.
  const auto& frame = d.bundle.images[1];
  for (const auto& s : segs) {
    if (s.provenance == frame.clip_index) CHECK((s.a - Eigen::Vector2d(64, 64)).norm() + (s.b - Eigen::Vector2d(64, 64)).norm() < 40.0);
  }
}

TEST_CASE("patches and triplets") {
  const auto& d = small_dataset();
  auto cfg = small_config();
  const auto p = clip_patches(d.bundle, cfg);
  CHECK(p.features.cols() == static_cast<Eigen::Index>(p.clip_of_column.size()));
  CHECK(std::is_sorted(p.clip_of_column.begin(), p.clip_of_column.end()));
  CHECK(std::adjacent_find(p.clip_of_column.begin(), p.clip_of_column.end()) == p.clip_of_column.end());
  CHECK(p.clip_of_column.size() >= 150);

  const auto t = form_triplets(p, cfg);
  CHECK(t.size() == 400);
  const std::set<int> covered(p.clip_of_column.begin(), p.clip_of_column.end());
  for (const auto& tr : t) {
    CHECK(covered.count(tr.anchor) == 1);
    CHECK(covered.count(tr.positive) == 1);
    CHECK(covered.count(tr.negative) == 1);
  }
  CHECK(triplets::triplet_correctness(t, d.truth.clip_classes) > 0.5);

  cfg.mechanism = triplets::SamplingMechanism::parse("ground_truth");
  CHECK_THROWS(form_triplets(p, cfg));
  CHECK(triplets::triplet_correctness(form_triplets(p, cfg, &d.truth.clip_classes), d.truth.clip_classes) == 1.0);
  cfg.correct_ratio = 0.3;
  const auto corrupted = form_triplets(p, cfg, &d.truth.clip_classes);
  CHECK(std::abs(triplets::triplet_correctness(corrupted, d.truth.clip_classes) - 0.3) <= 0.02);
}

TEST_CASE("weak labels lie on the path and keep void") {
  const auto& d = small_dataset();
  const std::vector<int> labels(d.bundle.clips.size(), 2);
  const auto weak = weak_label_images(d.bundle, labels);
  REQUIRE(weak.size() == d.bundle.images.size());
  for (std::size_t i = 0; i < weak.size(); ++i) {
    const auto& img = d.bundle.images[i].image;
    std::size_t on_path = 0;
    for (std::size_t p = 0; p < img.size(); ++p) {
      if (img.data[p] == kVoidColor) CHECK(weak[i].data[p] == kVoid);
      else CHECK((weak[i].data[p] == 2 || weak[i].data[p] == kBackground));
      on_path += weak[i].data[p] == 2;
    }
    CHECK(on_path > 0);
    CHECK(weak[i].at(64, 64) == 2);
  }
}

TEST_CASE("triplet-only and beta = 1 give the same clusters") {
  const auto& d = small_dataset();
  auto cfg = small_config();
  cfg.train.beta = 1.0;
  const auto in = audio_inputs(d.bundle.clips, cfg);
  const auto p = clip_patches(d.bundle, cfg);
  const auto t = form_triplets(p, cfg);
  cfg.train.seed = cfg.stage_seed(4);
  const auto ser = metric::train(in.x, t, cfg.train);
  const auto se = metric::train_triplet_only(in.x, t, cfg.train);
  const auto a = cluster_embeddings(ser.model.encode(in.x), cfg);
  const auto b = cluster_embeddings(se.model.encode(in.x), cfg);
  CHECK(a.labels == b.labels);
}

TEST_CASE("pipeline runs end to end and is reproducible") {
  const auto& d = small_dataset();
  const auto cfg = small_config();
  RunOptions opt;
  opt.validation = true;
  const auto a = run_pipeline(d, cfg, opt);
  const auto b = run_pipeline(d, cfg, opt);
  CHECK(a.metrics.clustering_accuracy == b.metrics.clustering_accuracy);
  CHECK(a.clip_clusters == b.clip_clusters);
  CHECK(a.metrics.miou == b.metrics.miou);
  CHECK(a.metrics.clustering_accuracy >= 0.0);
  CHECK(a.metrics.clustering_accuracy <= 100.0);
  CHECK(a.metrics.nmi >= 0.0);
  CHECK(a.metrics.nmi <= 1.0);
  CHECK(std::isfinite(a.metrics.miou));
  CHECK(std::isfinite(a.metrics.validation_accuracy));
  CHECK(a.confusion.sum() == 200);
  CHECK(a.training.trace.size() == 16);
  REQUIRE(a.segmenter);

  const auto path = fs::temp_directory_path() / "terrasense_metrics.csv";
  write_metrics_csv(path, a.metrics);
  const auto t = io::read_csv(path);
  CHECK(t.header == std::vector<std::string>{"metric", "class", "value"});
  fs::remove(path);
}

TEST_CASE("experiments reject unknown names and bad grids") {
  auto cfg = small_config();
  CHECK_THROWS_AS(run_experiment("bogus", cfg), ConfigError);
  cfg.grid = {7};
  CHECK_THROWS_AS(run_experiment("sampling", cfg), ConfigError);
}

TEST_CASE("on-disk stages reproduce the in-memory run") {
  const auto root = fs::temp_directory_path() / "terrasense_stage_test";
  fs::remove_all(root);
  auto cfg = small_config();
  write_dataset(root / "bundle", cfg, false);
  CHECK_THROWS_AS(write_dataset(root / "bundle", cfg, false), ConfigError);
  CHECK_THROWS_AS(stages::cluster(root / "bundle", root / "out", cfg), ConfigError);  // encoder missing
  stages::all(root / "bundle", root / "out", cfg);

  const auto mem = run_pipeline(generate_dataset(cfg), cfg);
  const auto clusters = io::read_csv(root / "out" / "cluster" / "clusters.csv");
  const auto col = clusters.column("cluster");
  REQUIRE(clusters.rows.size() == mem.clip_clusters.size());
  for (std::size_t j = 0; j < clusters.rows.size(); ++j) CHECK(std::stoi(clusters.rows[j][col]) == mem.clip_clusters[j]);

  // Re-running one stage from its on-disk inputs gives the same artifact.
  const auto before = io::read_text(root / "out" / "cluster" / "clusters.csv");
  stages::cluster(root / "bundle", root / "out", cfg);
  CHECK(io::read_text(root / "out" / "cluster" / "clusters.csv") == before);
  CHECK(fs::exists(root / "out" / "evaluate" / "metrics.csv"));
  fs::remove_all(root);
}
