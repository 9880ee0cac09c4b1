#include "terrasense/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace terrasense::io {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open: " + path.string());
  return in;
}

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw InputError("unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof v);
  put_le<std::uint64_t>(out, bits);
}

double get_f64(std::istream& in) {
  const auto bits = get_le<std::uint64_t>(in);
  double v = 0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string read_token(std::istream& in) {
  std::string tok;
  while (true) {
    const int c = in.peek();
    if (c == EOF) break;
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  in >> tok;
  return tok;
}

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const fs::path& path) {
  PnmHeader h;
  h.magic = read_token(in);
  try {
    h.width = std::stoi(read_token(in));
    h.height = std::stoi(read_token(in));
    h.maxval = std::stoi(read_token(in));
  } catch (const std::exception&) {
    throw InputError("malformed PNM header: " + path.string());
  }
  in.get();  // single whitespace before raster
  if (h.maxval != 255) throw InputError("only 8-bit PNM supported: " + path.string());
  return h;
}

}  // namespace

double quantize_pcm16(double sample) {
  const double clamped = std::clamp(sample, -1.0, 1.0);
  return std::round(clamped * 32767.0) / 32767.0;
}

void write_wav(const fs::path& path, const std::vector<double>& samples, std::uint32_t sample_rate_hz) {
  auto out = open_out(path);
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, 1);  // PCM
  put_le<std::uint16_t>(out, 1);  // mono
  put_le<std::uint32_t>(out, sample_rate_hz);
  put_le<std::uint32_t>(out, sample_rate_hz * 2);
  put_le<std::uint16_t>(out, 2);
  put_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  put_le<std::uint32_t>(out, data_bytes);
  for (double s : samples) {
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(v));
  }
}

PcmAudio read_wav(const fs::path& path) {
  auto in = open_in(path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw InputError("not a RIFF file: " + path.string());
  get_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw InputError("not a WAVE file: " + path.string());

  PcmAudio audio;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const auto size = get_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto format = get_le<std::uint16_t>(in);
      const auto channels = get_le<std::uint16_t>(in);
      audio.sample_rate_hz = get_le<std::uint32_t>(in);
      get_le<std::uint32_t>(in);
      get_le<std::uint16_t>(in);
      const auto bits = get_le<std::uint16_t>(in);
      if (format != 1 || channels != 1 || bits != 16) {
        throw InputError("only mono 16-bit PCM WAV supported: " + path.string());
      }
      in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw InputError("WAV data before fmt chunk: " + path.string());
      audio.samples.resize(size / 2);
      for (auto& s : audio.samples) {
        s = static_cast<std::int16_t>(get_le<std::uint16_t>(in)) / 32767.0;
      }
      return audio;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
  throw InputError("WAV without data chunk: " + path.string());
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const auto& px : image.data) {
    const char bytes[3] = {static_cast<char>(px.r), static_cast<char>(px.g), static_cast<char>(px.b)};
    out.write(bytes, 3);
  }
}

RgbImage read_ppm(const fs::path& path) {
  auto in = open_in(path);
  const auto h = read_pnm_header(in, path);
  if (h.magic != "P6") throw InputError("not a binary PPM: " + path.string());
  RgbImage image(h.width, h.height);
  for (auto& px : image.data) {
    unsigned char bytes[3];
    in.read(reinterpret_cast<char*>(bytes), 3);
    if (!in) throw InputError("truncated PPM: " + path.string());
    px = Rgb{bytes[0], bytes[1], bytes[2]};
  }
  return image;
}

void write_pgm(const fs::path& path, const Grid<std::uint8_t>& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
}

Grid<std::uint8_t> read_pgm(const fs::path& path) {
  auto in = open_in(path);
  const auto h = read_pnm_header(in, path);
  if (h.magic != "P5") throw InputError("not a binary PGM: " + path.string());
  Grid<std::uint8_t> image(h.width, h.height);
  in.read(reinterpret_cast<char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (!in) throw InputError("truncated PGM: " + path.string());
  return image;
}

Grid<std::uint8_t> encode_labels(const LabelImage& labels) {
  Grid<std::uint8_t> out(labels.width, labels.height);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int v = labels.data[i];
    if (v == kBackground) {
      out.data[i] = 0;
    } else if (v == kVoid) {
      out.data[i] = 255;
    } else if (v >= 0 && v < 254) {
      out.data[i] = static_cast<std::uint8_t>(v + 1);
    } else {
      throw InputError("label value not encodable: " + std::to_string(v));
    }
  }
  return out;
}

LabelImage decode_labels(const Grid<std::uint8_t>& encoded) {
  LabelImage out(encoded.width, encoded.height);
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const int v = encoded.data[i];
    out.data[i] = static_cast<std::int16_t>(v == 0 ? kBackground : (v == 255 ? kVoid : v - 1));
  }
  return out;
}

void write_label_pgm(const fs::path& path, const LabelImage& labels) { write_pgm(path, encode_labels(labels)); }

LabelImage read_label_pgm(const fs::path& path) { return decode_labels(read_pgm(path)); }

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  out.write("TSMAT64", 8);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
}

Eigen::MatrixXd read_matrix(const fs::path& path) {
  auto in = open_in(path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "TSMAT64", 8) != 0) throw InputError("bad matrix magic: " + path.string());
  const auto rows = get_le<std::uint32_t>(in);
  const auto cols = get_le<std::uint32_t>(in);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(in);
  }
  return m;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("CSV column missing: " + name);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  auto in = open_in(path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) throw InputError("ragged CSV row in " + path.string());
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw InputError("empty CSV: " + path.string());
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  auto out = open_out(path);
  auto put_row = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  };
  put_row(table.header);
  for (const auto& row : table.rows) put_row(row);
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace terrasense::io
