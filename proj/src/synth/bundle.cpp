#include <cmath>
#include <cstdio>
#include <sstream>

#include "terrasense/config.hpp"
#include "terrasense/io.hpp"
#include "terrasense/synthgen.hpp"

namespace terrasense::synth {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, int index, int width, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*d%s", prefix, width, index, ext);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + io::format_double(v[i]);
  return out;
}

std::vector<std::string> pose_cells(const geometry::Pose& p) {
  using io::format_double;
  const auto& q = p.orientation;
  return {format_double(p.timestamp_s), format_double(p.position.x()), format_double(p.position.y()),
          format_double(p.position.z()), format_double(q.x()), format_double(q.y()),
          format_double(q.z()), format_double(q.w())};
}

geometry::Pose parse_pose(const std::vector<std::string>& row, std::size_t offset) {
  auto num = [&](std::size_t i) { return std::stod(row.at(offset + i)); };
  geometry::Pose p;
  p.timestamp_s = num(0);
  p.position = {num(1), num(2), num(3)};
  p.orientation = Eigen::Quaterniond(num(7), num(4), num(5), num(6));
  p.validate();
  return p;
}

const std::vector<std::string> kPoseHeader{"timestamp_s", "x_m", "y_m", "z_m", "qx", "qy", "qz", "qw"};

}  // namespace

std::string spec_fingerprint(const WorldSpec& spec, const TraversalParams& params) {
  using io::format_double;
  std::ostringstream out;
  out << "seed=" << spec.seed << "\nwidth_m=" << format_double(spec.width_m)
      << "\nheight_m=" << format_double(spec.height_m) << "\nmpp=" << format_double(spec.meters_per_pixel)
      << "\nK=" << spec.num_classes << "\nsites=" << spec.sites_per_class
      << "\nillum=" << format_double(spec.illumination_amplitude) << ","
      << format_double(spec.illumination_scale_m) << "\n";
  if (spec.domain_shift) {
    out << "shift=" << format_double(spec.domain_shift->hue_deg) << ","
        << format_double(spec.domain_shift->brightness) << "\n";
  }
  for (std::size_t c = 0; c < spec.class_params.size(); ++c) {
    const auto& a = spec.class_params[c].audio;
    const auto& v = spec.class_params[c].visual;
    out << "class" << c << ".bands=" << join(a.band_centers_hz) << "\nclass" << c
        << ".amps=" << join(a.band_amplitudes) << "\nclass" << c << ".floor=" << format_double(a.broadband_floor)
        << "\nclass" << c << ".gain=" << format_double(a.speed_gain) << "\nclass" << c << ".visual="
        << join({v.base_color.begin(), v.base_color.end()}) << ";" << join({v.alt_color.begin(), v.alt_color.end()})
        << ";" << format_double(v.tile_size_m) << ";" << format_double(v.noise_amplitude) << "\n";
  }
  const auto& au = params.audio;
  out << "audio=" << join({au.sample_rate_hz, au.clip_duration_s, au.band_jitter_hz, au.hum_base_hz,
                           au.hum_hz_per_mps, au.hum_amplitude, au.ambient_probability, au.ambient_amplitude})
      << "\nimaging=" << params.imaging.image_every_clips << "," << params.imaging.image_size_px << ","
      << format_double(params.imaging.camera_height_m) << "\nmax_clips=" << params.max_clips
      << "\ntraversal_seed=" << params.seed << "\n";
  return out.str();
}

TrainingBundle to_training_bundle(const BundleInfo& info, const TraversalRecord& record) {
  TrainingBundle b;
  b.info = info;
  b.clips = record.clips;
  b.poses = record.poses;
  for (const auto& f : record.images) b.images.push_back({f.image, f.clip_index, f.frame_pose});
  return b;
}

EvaluationTruth to_evaluation_truth(const TraversalRecord& record) {
  EvaluationTruth t;
  t.clip_classes = record.true_class_per_clip;
  for (const auto& f : record.images) t.image_truth.push_back(f.truth);
  return t;
}

void write_bundle(const fs::path& dir, const BundleInfo& info, const TraversalRecord& record, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
    if (!fs::exists(dir / "manifest.txt")) {
      throw ConfigError("refusing to overwrite " + dir.string() + ": not a dataset bundle");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir / "clips");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "truth");

  KeyValueConfig manifest;
  manifest.set("seed", std::to_string(info.seed));
  manifest.set("spec_hash", info.spec_hash);
  manifest.set("num_classes", std::to_string(info.num_classes));
  manifest.set("meters_per_pixel", io::format_double(info.meters_per_pixel));
  manifest.set("camera_height_m", io::format_double(info.camera_height_m));
  manifest.set("sample_rate_hz", io::format_double(info.sample_rate_hz));
  manifest.set("clip_duration_s", io::format_double(info.clip_duration_s));
  manifest.set("num_clips", std::to_string(record.clips.size()));
  manifest.set("num_images", std::to_string(record.images.size()));
  io::write_text(dir / "manifest.txt", manifest.to_text());

  io::CsvTable poses{kPoseHeader, {}};
  for (std::size_t j = 0; j < record.clips.size(); ++j) {
    io::write_wav(dir / "clips" / numbered("clip_", static_cast<int>(j), 5, ".wav"), record.clips[j].samples,
                  static_cast<std::uint32_t>(std::lround(record.clips[j].sample_rate_hz)));
    poses.rows.push_back(pose_cells(record.poses[j]));
  }
  io::write_csv(dir / "poses.csv", poses);

  io::CsvTable index{{"file", "clip_index"}, {}};
  for (const auto& h : kPoseHeader) index.header.push_back(h);
  io::CsvTable clip_truth{{"clip_index", "class_id"}, {}};
  for (std::size_t i = 0; i < record.images.size(); ++i) {
    const auto& f = record.images[i];
    const auto name = numbered("img_", static_cast<int>(i), 4, "");
    io::write_ppm(dir / "images" / (name + ".ppm"), f.image);
    io::write_label_pgm(dir / "truth" / (name + ".pgm"), f.truth);
    std::vector<std::string> row{name + ".ppm", std::to_string(f.clip_index)};
    for (auto& cell : pose_cells(f.frame_pose)) row.push_back(std::move(cell));
    index.rows.push_back(std::move(row));
  }
  io::write_csv(dir / "images" / "index.csv", index);
  for (std::size_t j = 0; j < record.true_class_per_clip.size(); ++j) {
    clip_truth.rows.push_back({std::to_string(j), std::to_string(record.true_class_per_clip[j])});
  }
  io::write_csv(dir / "truth" / "clip_classes.csv", clip_truth);
}

TrainingBundle read_training_bundle(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) throw InputError("not a dataset bundle: " + dir.string());
  const auto manifest = KeyValueConfig::load(dir / "manifest.txt");
  TrainingBundle b;
  b.info.seed = manifest.get_uint("seed", 0);
  b.info.spec_hash = manifest.get_string("spec_hash", "");
  b.info.num_classes = static_cast<int>(manifest.get_int("num_classes", 0));
  b.info.meters_per_pixel = manifest.get_double("meters_per_pixel", 0.05);
  b.info.camera_height_m = manifest.get_double("camera_height_m", 2.0);
  b.info.sample_rate_hz = manifest.get_double("sample_rate_hz", 44100.0);
  b.info.clip_duration_s = manifest.get_double("clip_duration_s", dsp::kDefaultClipSeconds);

  const auto poses = io::read_csv(dir / "poses.csv");
  for (const auto& row : poses.rows) b.poses.push_back(parse_pose(row, 0));
  for (std::size_t j = 0; j < b.poses.size(); ++j) {
    auto pcm = io::read_wav(dir / "clips" / numbered("clip_", static_cast<int>(j), 5, ".wav"));
    b.clips.push_back({std::move(pcm.samples), static_cast<double>(pcm.sample_rate_hz)});
  }
  const auto index = io::read_csv(dir / "images" / "index.csv");
  const auto file_col = index.column("file");
  const auto clip_col = index.column("clip_index");
  const auto pose_col = index.column("timestamp_s");
  for (const auto& row : index.rows) {
    BundleImage img;
    img.image = io::read_ppm(dir / "images" / row.at(file_col));
    img.clip_index = std::stoi(row.at(clip_col));
    img.frame_pose = parse_pose(row, pose_col);
    b.images.push_back(std::move(img));
  }
  return b;
}

EvaluationTruth read_evaluation_truth(const fs::path& dir) {
  const auto truth_dir = dir / "truth";
  if (!fs::exists(truth_dir / "clip_classes.csv")) throw InputError("bundle has no evaluation truth: " + dir.string());
  EvaluationTruth t;
  const auto table = io::read_csv(truth_dir / "clip_classes.csv");
  const auto col = table.column("class_id");
  for (const auto& row : table.rows) t.clip_classes.push_back(std::stoi(row.at(col)));
  const auto index = io::read_csv(dir / "images" / "index.csv");
  const auto file_col = index.column("file");
  for (const auto& row : index.rows) {
    auto name = fs::path(row.at(file_col)).replace_extension(".pgm");
    t.image_truth.push_back(io::read_label_pgm(truth_dir / name));
  }
  return t;
}

}  // namespace terrasense::synth
