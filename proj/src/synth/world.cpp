#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "terrasense/synthgen.hpp"

namespace terrasense::synth {

namespace {

double unit_hash(std::uint64_t seed, long a, long b, std::uint64_t stream) {
  const std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ULL ^
                                             mix64(static_cast<std::uint64_t>(b) + stream * 0xd1b54a32d192ed03ULL)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/* Bilinear value noise in [-1, 1] on a lattice of spacing `scale`. */
double value_noise(std::uint64_t seed, double x, double y, double scale) {
  const double gx = x / scale;
  const double gy = y / scale;
  const auto ix = static_cast<long>(std::floor(gx));
  const auto iy = static_cast<long>(std::floor(gy));
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double fx = smooth(gx - ix);
  const double fy = smooth(gy - iy);
  auto lattice = [&](long i, long j) { return 2.0 * unit_hash(seed, i, j, 7) - 1.0; };
  const double top = lattice(ix, iy) * (1 - fx) + lattice(ix + 1, iy) * fx;
  const double bottom = lattice(ix, iy + 1) * (1 - fx) + lattice(ix + 1, iy + 1) * fx;
  return top * (1 - fy) + bottom * fy;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

void AudioSignature::validate(double sample_rate_hz) const {
  if (band_centers_hz.size() != band_amplitudes.size()) {
    throw ConfigError("audio signature: band centre and amplitude counts differ");
  }
  for (double f : band_centers_hz) {
    if (!(f > 0.0) || f >= sample_rate_hz / 2.0) {
      throw ConfigError("audio signature: band centre " + std::to_string(f) + " Hz not below Nyquist");
    }
  }
  for (double a : band_amplitudes) {
    if (!(a >= 0.0)) throw ConfigError("audio signature: negative band amplitude");
  }
  if (!(broadband_floor >= 0.0)) throw ConfigError("audio signature: negative broadband floor");
  if (!(speed_gain >= 0.0)) throw ConfigError("audio signature: negative speed gain");
}

void WorldSpec::validate(double sample_rate_hz) const {
  if (num_classes < 1 || num_classes > 250) throw ConfigError("world: num_classes must be in [1, 250]");
  if (!(meters_per_pixel > 0.0)) throw ConfigError("world: meters_per_pixel must be positive");
  if (!(width_m > 0.0) || !(height_m > 0.0)) throw ConfigError("world: width and height must be positive");
  if (std::lround(width_m / meters_per_pixel) < 1 || std::lround(height_m / meters_per_pixel) < 1) {
    throw ConfigError("world: smaller than one pixel");
  }
  if (sites_per_class < 1) throw ConfigError("world: sites_per_class must be >= 1");
  if (static_cast<int>(class_params.size()) != num_classes) {
    throw ConfigError("world: expected " + std::to_string(num_classes) + " class parameter sets, got " +
                      std::to_string(class_params.size()));
  }
  for (const auto& cp : class_params) cp.audio.validate(sample_rate_hz);
  if (illumination_amplitude < 0.0 || illumination_scale_m <= 0.0) throw ConfigError("world: bad illumination field");
}

World::World(WorldSpec spec, int width_px, int height_px, std::vector<std::uint8_t> cells, int retries)
    : spec_(std::move(spec)), width_px_(width_px), height_px_(height_px), cells_(std::move(cells)), retries_(retries) {}

bool World::contains(double x_m, double y_m) const {
  return x_m >= 0.0 && y_m >= 0.0 && x_m < width_px_ * spec_.meters_per_pixel &&
         y_m < height_px_ * spec_.meters_per_pixel;
}

int World::class_at(double x_m, double y_m) const {
  if (!contains(x_m, y_m)) throw InputError("position outside the world");
  const int ix = std::min(width_px_ - 1, static_cast<int>(std::floor(x_m / spec_.meters_per_pixel)));
  const int iy = std::min(height_px_ - 1, static_cast<int>(std::floor(y_m / spec_.meters_per_pixel)));
  return class_at_cell(ix, iy);
}

std::vector<std::size_t> World::class_histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(spec_.num_classes), 0);
  for (auto c : cells_) ++h[c];
  return h;
}

Rgb World::cell_color(long ix, long iy) const {
  if (ix < 0 || iy < 0 || ix >= width_px_ || iy >= height_px_) return kVoidColor;
  const int cls = class_at_cell(static_cast<int>(ix), static_cast<int>(iy));
  const auto& tex = spec_.class_params[cls].visual;
  const double mpp = spec_.meters_per_pixel;
  const double x = (ix + 0.5) * mpp;
  const double y = (iy + 0.5) * mpp;

  const auto* color = &tex.base_color;
  if (tex.tile_size_m > 0.0) {
    const auto tx = static_cast<long>(std::floor(x / tex.tile_size_m));
    const auto ty = static_cast<long>(std::floor(y / tex.tile_size_m));
    if (((tx + ty) & 1L) != 0) color = &tex.alt_color;
  }
  const double shading =
      spec_.illumination_amplitude > 0.0
          ? 1.0 + spec_.illumination_amplitude * value_noise(spec_.seed, x, y, spec_.illumination_scale_m)
          : 1.0;
  const double lum = 2.0 * unit_hash(spec_.seed, ix, iy, 1) - 1.0;
  std::array<std::uint8_t, 3> out{};
  for (int ch = 0; ch < 3; ++ch) {
    const double chroma = 2.0 * unit_hash(spec_.seed, ix, iy, 2 + ch) - 1.0;
    out[ch] = to_byte(((*color)[ch] + tex.noise_amplitude * (0.75 * lum + 0.25 * chroma)) * shading);
  }
  return {out[0], out[1], out[2]};
}

World generate_world(const WorldSpec& spec) {
  spec.validate();
  const int w = static_cast<int>(std::lround(spec.width_m / spec.meters_per_pixel));
  const int h = static_cast<int>(std::lround(spec.height_m / spec.meters_per_pixel));
  const int k = spec.num_classes;
  const std::size_t cells_total = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  constexpr int kMaxRetries = 50;

  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    std::vector<std::uint8_t> cells(cells_total, 0);
    if (k > 1) {
      Rng rng(derive_seed(spec.seed, 100 + static_cast<std::uint64_t>(attempt)));
      const int n_sites = k * spec.sites_per_class;
      std::vector<Eigen::Vector2d> sites(static_cast<std::size_t>(n_sites));
      std::vector<std::uint8_t> site_class(static_cast<std::size_t>(n_sites));
      std::uniform_real_distribution<double> ux(0.0, w);
      std::uniform_real_distribution<double> uy(0.0, h);
      for (int s = 0; s < n_sites; ++s) {
        sites[s] = {ux(rng), uy(rng)};
        site_class[s] = static_cast<std::uint8_t>(s % k);
      }
      std::shuffle(site_class.begin(), site_class.end(), rng);
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          const Eigen::Vector2d p(ix + 0.5, iy + 0.5);
          double best = std::numeric_limits<double>::infinity();
          int best_site = 0;
          for (int s = 0; s < n_sites; ++s) {
            const double d = (sites[s] - p).squaredNorm();
            if (d < best) {
              best = d;
              best_site = s;
            }
          }
          cells[static_cast<std::size_t>(iy) * w + ix] = site_class[best_site];
        }
      }
    }
    World world(spec, w, h, std::move(cells), attempt);
    const auto hist = world.class_histogram();
    const bool balanced_enough = std::all_of(hist.begin(), hist.end(), [&](std::size_t n) {
      return static_cast<double>(n) >= 0.01 * static_cast<double>(cells_total);
    });
    if (balanced_enough) return world;
  }
  throw ConfigError("world: could not place every class on >= 1% of cells");
}

double spectral_separation(const AudioSignature& a, const AudioSignature& b) {
  double best = std::numeric_limits<double>::infinity();
  for (double fa : a.band_centers_hz) {
    for (double fb : b.band_centers_hz) best = std::min(best, std::abs(fa - fb));
  }
  return best;
}

double min_spectral_separation(const WorldSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.class_params.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.class_params.size(); ++j) {
      best = std::min(best, spectral_separation(spec.class_params[i].audio, spec.class_params[j].audio));
    }
  }
  return best;
}

Rgb apply_domain_shift(Rgb c, const DomainShift& shift) {
  const Eigen::Vector3d v(c.r, c.g, c.b);
  const double mean = v.mean();
  const Eigen::Vector3d chroma = v - Eigen::Vector3d::Constant(mean);
  const Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
  const double theta = shift.hue_deg * std::numbers::pi / 180.0;
  const Eigen::Vector3d rotated = chroma * std::cos(theta) + axis.cross(chroma) * std::sin(theta);
  const Eigen::Vector3d out = rotated + Eigen::Vector3d::Constant(mean + shift.brightness);
  return {to_byte(out.x()), to_byte(out.y()), to_byte(out.z())};
}

geometry::Pose snapped_frame_pose(const World& world, const geometry::Pose& pose, double meters_per_pixel) {
  (void)world;
  geometry::Pose frame;
  frame.timestamp_s = pose.timestamp_s;
  frame.position = {std::round(pose.position.x() / meters_per_pixel) * meters_per_pixel,
                    std::round(pose.position.y() / meters_per_pixel) * meters_per_pixel, 0.0};
  return frame;
}

namespace {

/* World cell under the centre of image pixel (row, col). */
template <class F>
void for_each_view_cell(const World& world, const geometry::Pose& pose, int size, double mpp, F&& f) {
  const double world_mpp = world.spec().meters_per_pixel;
  const auto cx = std::lround(pose.position.x() / mpp);
  const auto cy = std::lround(pose.position.y() / mpp);
  const bool aligned = std::abs(mpp - world_mpp) < 1e-15;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      long ix = 0;
      long iy = 0;
      if (aligned) {
        ix = cx + c - size / 2;
        iy = cy + size / 2 - 1 - r;
      } else {
        const double x = (cx + c - size / 2 + 0.5) * mpp;
        const double y = (cy + size / 2 - r - 0.5) * mpp;
        ix = static_cast<long>(std::floor(x / world_mpp));
        iy = static_cast<long>(std::floor(y / world_mpp));
      }
      f(r, c, ix, iy);
    }
  }
}

}  // namespace

RgbImage render_birdseye(const World& world, const geometry::Pose& pose, int image_size_px, double meters_per_pixel) {
  if (image_size_px <= 0) throw InputError("image size must be positive");
  RgbImage img(image_size_px, image_size_px);
  const auto& shift = world.spec().domain_shift;
  for_each_view_cell(world, pose, image_size_px, meters_per_pixel, [&](int r, int c, long ix, long iy) {
    const Rgb color = world.cell_color(ix, iy);
    img.at(r, c) = (shift && !(color == kVoidColor)) ? apply_domain_shift(color, *shift) : color;
  });
  return img;
}

LabelImage render_truth(const World& world, const geometry::Pose& pose, int image_size_px, double meters_per_pixel) {
  LabelImage truth(image_size_px, image_size_px, static_cast<std::int16_t>(kVoid));
  for_each_view_cell(world, pose, image_size_px, meters_per_pixel, [&](int r, int c, long ix, long iy) {
    if (ix >= 0 && iy >= 0 && ix < world.width_px() && iy < world.height_px()) {
      truth.at(r, c) = static_cast<std::int16_t>(world.class_at_cell(static_cast<int>(ix), static_cast<int>(iy)));
    }
  });
  return truth;
}

}  // namespace terrasense::synth
