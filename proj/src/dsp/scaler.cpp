#include <algorithm>
#include <cmath>
#include <limits>

#include "terrasense/audio_dsp.hpp"
#include "terrasense/common.hpp"
#include "terrasense/io.hpp"

namespace terrasense::dsp {

Eigen::MatrixXd average_pool(const Eigen::MatrixXd& m, int out_rows, int out_cols) {
  if (out_rows <= 0 || out_cols <= 0) throw InputError("pooled size must be positive");
  if (m.rows() < out_rows || m.cols() < out_cols) {
    throw InputError("cannot pool a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " matrix onto " + std::to_string(out_rows) + "x" + std::to_string(out_cols));
  }
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(out_rows, out_cols);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(out_rows, out_cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const auto pc = static_cast<Eigen::Index>(c * out_cols / m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const auto pr = static_cast<Eigen::Index>(r * out_rows / m.rows());
      sums(pr, pc) += m(r, c);
      counts(pr, pc) += 1.0;
    }
  }
  return sums.cwiseQuotient(counts);
}

SpectrogramScaler SpectrogramScaler::fit(std::span<const Spectrogram> spectrograms, int pooled_rows,
                                         int pooled_cols) {
  SpectrogramScaler s;
  s.pooled_rows = pooled_rows;
  s.pooled_cols = pooled_cols;
  std::vector<Eigen::MatrixXd> pooled;
  pooled.reserve(spectrograms.size());
  for (const auto& spec : spectrograms) pooled.push_back(s.pooled_log(spec));
  return fit_pooled(pooled, pooled_rows, pooled_cols);
}

SpectrogramScaler SpectrogramScaler::fit_pooled(std::span<const Eigen::MatrixXd> pooled, int pooled_rows,
                                                int pooled_cols) {
  if (pooled.empty()) throw InputError("cannot fit a scaler on zero spectrograms");
  SpectrogramScaler s;
  s.pooled_rows = pooled_rows;
  s.pooled_cols = pooled_cols;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pooled) {
    if (p.rows() != pooled_rows || p.cols() != pooled_cols) throw InputError("pooled grid has the wrong shape");
    lo = std::min(lo, p.minCoeff());
    hi = std::max(hi, p.maxCoeff());
  }
  s.log_min = lo;
  s.log_max = hi > lo ? hi : lo + 1.0;
  return s;
}

Eigen::MatrixXd SpectrogramScaler::pooled_log(const Spectrogram& s) const {
  return average_pool(s.values.array().log1p().matrix(), pooled_rows, pooled_cols);
}

Eigen::VectorXd SpectrogramScaler::transform(const Spectrogram& s) const { return transform_pooled(pooled_log(s)); }

Eigen::VectorXd SpectrogramScaler::transform_pooled(const Eigen::MatrixXd& pooled) const {
  const Eigen::MatrixXd scaled = (pooled.array() - log_min) / (log_max - log_min);
  return Eigen::Map<const Eigen::VectorXd>(scaled.data(), scaled.size());
}

void write_spectrogram_pgm(const std::filesystem::path& path, const Spectrogram& s, bool log_scale) {
  Eigen::MatrixXd v = log_scale ? Eigen::MatrixXd(s.values.array().log1p()) : s.values;
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  // Low frequencies at the bottom row.
  Grid<std::uint8_t> img(static_cast<int>(v.cols()), static_cast<int>(v.rows()));
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double x = (v(v.rows() - 1 - r, c) - lo) / span;
      img.at(r, c) = static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
    }
  }
  io::write_pgm(path, img);
}

}  // namespace terrasense::dsp
