#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace terrasense::dsp {

/// A fixed-length mono clip; duration_s() is t_w.
struct AudioClip {
  std::vector<double> samples;
  double sample_rate_hz = 44100.0;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

inline constexpr double kDefaultClipSeconds = 0.5;

enum class WindowFn { rectangular, hann };

WindowFn parse_window(const std::string& name);
std::string to_string(WindowFn w);

struct StftParams {
  int window_size = 256;
  int hop = 128;
  WindowFn window = WindowFn::hann;

  /// Throws InputError unless 0 < hop <= window_size <= clip_length.
  void validate(std::size_t clip_length) const;
  int freq_bins() const { return window_size / 2 + 1; }
  /// Trailing partial frames are dropped.
  int frames(std::size_t clip_length) const;
};

/// Periodic window of length n.
std::vector<double> window_coefficients(WindowFn fn, int n);

/// One-sided STFT; entry (k, m) is the windowed DFT bin k of the frame starting at m * hop.
Eigen::MatrixXcd stft(const AudioClip& clip, const StftParams& params);

struct Spectrogram {
  Eigen::MatrixXd values;  // freq_bins x frames, squared magnitude
  StftParams params;
};

Spectrogram spectrogram(const AudioClip& clip, const StftParams& params);

double signal_power(std::span<const double> samples);

/// Pass as snr_db to leave a clip untouched.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds white Gaussian noise with variance signal_power / 10^(snr_db / 10).
AudioClip add_noise(const AudioClip& clip, double snr_db, std::uint64_t seed);

/// Average pooling onto an out_rows x out_cols grid (uneven partitions allowed).
Eigen::MatrixXd average_pool(const Eigen::MatrixXd& m, int out_rows, int out_cols);

/*
 * Encoder input normalization: log(1 + power), average pooled to a fixed
 * grid, then min-max scaled with bounds fitted on a reference dataset.
 * Output is the column-major flattening of the pooled grid.
 */
struct SpectrogramScaler {
  double log_min = 0.0;
  double log_max = 1.0;
  int pooled_rows = 16;
  int pooled_cols = 16;

  static SpectrogramScaler fit(std::span<const Spectrogram> spectrograms, int pooled_rows, int pooled_cols);
  /// Same bounds from grids already produced by pooled_log().
  static SpectrogramScaler fit_pooled(std::span<const Eigen::MatrixXd> pooled, int pooled_rows, int pooled_cols);
  Eigen::MatrixXd pooled_log(const Spectrogram& s) const;
  Eigen::VectorXd transform(const Spectrogram& s) const;
  Eigen::VectorXd transform_pooled(const Eigen::MatrixXd& pooled) const;
  int dimension() const { return pooled_rows * pooled_cols; }
};

/// Affine scaling of the spectrogram to 0..255 for inspection.
void write_spectrogram_pgm(const std::filesystem::path& path, const Spectrogram& s, bool log_scale = true);

}  // namespace terrasense::dsp
