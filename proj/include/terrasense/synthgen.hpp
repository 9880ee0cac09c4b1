#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/audio_dsp.hpp"
#include "terrasense/common.hpp"
#include "terrasense/geometry.hpp"

namespace terrasense::synth {

struct AudioSignature {
  std::vector<double> band_centers_hz;
  std::vector<double> band_amplitudes;
  double broadband_floor = 0.0;  // std-dev of the white noise component
  double speed_gain = 1.0;       // band amplitude multiplier per m/s

  void validate(double sample_rate_hz) const;
};

struct VisualTexture {
  std::array<double, 3> base_color{128, 128, 128};
  std::array<double, 3> alt_color{128, 128, 128};
  double tile_size_m = 0.0;  // checkerboard of base/alt colours; 0 disables
  double noise_amplitude = 10.0;
};

struct ClassParams {
  AudioSignature audio;
  VisualTexture visual;
};

/// Global colour transform applied after texturing: hue rotation about the grey axis plus a brightness offset.
struct DomainShift {
  double hue_deg = 0.0;
  double brightness = 0.0;
};

struct WorldSpec {
  std::uint64_t seed = 1;
  double width_m = 40.0;
  double height_m = 40.0;
  double meters_per_pixel = 0.05;
  int num_classes = 5;
  int sites_per_class = 3;
  std::vector<ClassParams> class_params;
  std::optional<DomainShift> domain_shift;
  double illumination_amplitude = 0.0;  // relative brightness swing of the shading field
  double illumination_scale_m = 5.0;

  /// Throws ConfigError on invalid dimensions or class tables.
  void validate(double sample_rate_hz = 44100.0) const;
};

/// Voronoi partition of the world into class regions.
class World {
 public:
  World(WorldSpec spec, int width_px, int height_px, std::vector<std::uint8_t> cells, int retries);

  const WorldSpec& spec() const { return spec_; }
  int width_px() const { return width_px_; }
  int height_px() const { return height_px_; }
  /// Number of regenerations needed until every class covered >= 1% of cells.
  int retries() const { return retries_; }

  bool contains(double x_m, double y_m) const;
  int class_at_cell(int ix, int iy) const { return cells_[static_cast<std::size_t>(iy) * width_px_ + ix]; }
  /// Class under a world position; throws InputError outside the world.
  int class_at(double x_m, double y_m) const;
  std::vector<std::size_t> class_histogram() const;
  std::span<const std::uint8_t> cells() const { return cells_; }

  /// Texture colour of a cell before any domain shift; void colour outside.
  Rgb cell_color(long ix, long iy) const;

 private:
  WorldSpec spec_;
  int width_px_;
  int height_px_;
  std::vector<std::uint8_t> cells_;
  int retries_;
};

World generate_world(const WorldSpec& spec);

/// Minimum distance between the band centres of two classes.
double spectral_separation(const AudioSignature& a, const AudioSignature& b);
double min_spectral_separation(const WorldSpec& spec);

struct AudioParams {
  double sample_rate_hz = 44100.0;
  double clip_duration_s = dsp::kDefaultClipSeconds;
  double band_jitter_hz = 0.0;
  // Drive hum whose pitch follows the speed; shared by all classes.
  double hum_base_hz = 0.0;
  double hum_hz_per_mps = 0.0;
  double hum_amplitude = 0.0;
  // Random ambient tones (wind, distant machinery).
  double ambient_probability = 0.0;
  double ambient_amplitude = 0.0;
};

struct ImagingParams {
  int image_every_clips = 10;
  int image_size_px = 128;
  double camera_height_m = 2.0;
};

struct TraversalParams {
  AudioParams audio;
  ImagingParams imaging;
  std::size_t max_clips = 0;  // 0 = as many as the path allows
  std::uint64_t seed = 1;
};

struct ImageFrame {
  RgbImage image;
  LabelImage truth;  // dense class per pixel, kVoid outside the world
  int clip_index = 0;
  geometry::Pose frame_pose;  // centre of the view, world-aligned
};

struct TraversalRecord {
  std::vector<dsp::AudioClip> clips;
  std::vector<geometry::Pose> poses;  // one per clip, at the clip midpoint
  std::vector<double> speeds;
  std::vector<ImageFrame> images;     // taken at clip midpoints
  std::vector<int> true_class_per_clip;
};

/*
 * Drives the robot along `waypoints` with one speed per segment (or a single
 * speed for all) and synthesises one clip per t_w plus periodic birds-eye views.
 */
TraversalRecord simulate_traversal(const World& world, std::span<const Eigen::Vector2d> waypoints,
                                   std::span<const double> speed_profile, const TraversalParams& params);

/// The clip signal alone, for a given class, speed and per-clip seed.
dsp::AudioClip synthesize_clip(const World& world, int class_id, double speed_mps, const AudioParams& params,
                               std::uint64_t clip_seed);

/// View centre snapped to the world pixel grid, identity orientation.
geometry::Pose snapped_frame_pose(const World& world, const geometry::Pose& pose, double meters_per_pixel);

RgbImage render_birdseye(const World& world, const geometry::Pose& pose, int image_size_px, double meters_per_pixel);
LabelImage render_truth(const World& world, const geometry::Pose& pose, int image_size_px, double meters_per_pixel);

Rgb apply_domain_shift(Rgb c, const DomainShift& shift);

std::vector<Eigen::Vector2d> random_waypoints(const World& world, int count, double margin_m, std::uint64_t seed);
/// Waypoint i lies on class order[i % K], where each round of K visits is freshly shuffled.
std::vector<Eigen::Vector2d> class_balanced_waypoints(const World& world, int count, double margin_m,
                                                      std::uint64_t seed);
std::vector<double> random_speeds(std::size_t count, double lo, double hi, std::uint64_t seed);

/*
 * Class tables. `separation_hz` is the spacing of the band-centre grid and
 * therefore the minimum spectral separation between classes.
 */
std::vector<ClassParams> make_class_params(int num_classes, double separation_hz, std::uint64_t seed);

/// Five-class world with well separated acoustic signatures.
WorldSpec easy_world_spec(std::uint64_t seed);
/// Same layout with nearly overlapping signatures.
WorldSpec hard_world_spec(std::uint64_t seed);
AudioParams default_audio_params();

/// Canonical text of every generation parameter; its hash identifies a bundle.
std::string spec_fingerprint(const WorldSpec& spec, const TraversalParams& params);

struct BundleInfo {
  std::uint64_t seed = 0;
  std::string spec_hash;
  int num_classes = 0;
  double meters_per_pixel = 0.05;
  double camera_height_m = 2.0;
  double sample_rate_hz = 44100.0;
  double clip_duration_s = dsp::kDefaultClipSeconds;
};

struct BundleImage {
  RgbImage image;
  int clip_index = 0;
  geometry::Pose frame_pose;
};

/// Everything training may see. Carries no class ids.
struct TrainingBundle {
  BundleInfo info;
  std::vector<dsp::AudioClip> clips;
  std::vector<geometry::Pose> poses;
  std::vector<BundleImage> images;
};

/// Held-out truth for evaluation only.
struct EvaluationTruth {
  std::vector<int> clip_classes;
  std::vector<LabelImage> image_truth;  // index-aligned with TrainingBundle::images
};

/*
 * Layout: manifest.txt, poses.csv, clips/clip_NNNNN.wav, images/index.csv,
 * images/img_NNNN.ppm, and truth/ (clip_classes.csv, img_NNNN.pgm).
 * Refuses a non-empty directory unless `force`.
 */
void write_bundle(const std::filesystem::path& dir, const BundleInfo& info, const TraversalRecord& record,
                  bool force = false);
TrainingBundle read_training_bundle(const std::filesystem::path& dir);
EvaluationTruth read_evaluation_truth(const std::filesystem::path& dir);
TrainingBundle to_training_bundle(const BundleInfo& info, const TraversalRecord& record);
EvaluationTruth to_evaluation_truth(const TraversalRecord& record);

}  // namespace terrasense::synth
