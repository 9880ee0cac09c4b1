#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "terrasense/common.hpp"

namespace terrasense::io {

namespace fs = std::filesystem;

struct PcmAudio {
  std::vector<double> samples;  // [-1, 1]
  std::uint32_t sample_rate_hz = 0;
};

/// Mono 16-bit PCM WAV. Samples are clamped to [-1, 1] and rounded to the 1/32767 grid.
void write_wav(const fs::path& path, const std::vector<double>& samples, std::uint32_t sample_rate_hz);
PcmAudio read_wav(const fs::path& path);
/// Value a sample takes after a 16-bit write/read round trip.
double quantize_pcm16(double sample);

void write_ppm(const fs::path& path, const RgbImage& image);
RgbImage read_ppm(const fs::path& path);
void write_pgm(const fs::path& path, const Grid<std::uint8_t>& image);
Grid<std::uint8_t> read_pgm(const fs::path& path);

/// Mask file encoding: 0 = background, 1..K = classes, 255 = void.
Grid<std::uint8_t> encode_labels(const LabelImage& labels);
LabelImage decode_labels(const Grid<std::uint8_t>& encoded);
void write_label_pgm(const fs::path& path, const LabelImage& labels);
LabelImage read_label_pgm(const fs::path& path);

/*
 * Binary float64 matrix: 8-byte magic "TSMAT64\0", uint32 rows, uint32 cols
 * (little endian), then rows*cols doubles in row-major order.
 */
void write_matrix(const fs::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const fs::path& path);

/// Minimal CSV table: first row is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const CsvTable& table);

std::string format_double(double v);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace terrasense::io
