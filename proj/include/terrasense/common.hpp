#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace terrasense {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or spec values (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid operation inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed (CLI exit code 3).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

using Rng = std::mt19937_64;

/* splitmix64 finalizer */
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent sub-stream seed so that consumers never share RNG state.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream * 0x2545f4914f6cdd1dULL + 1));
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Label values shared by masks, weak labels and maps.
inline constexpr int kBackground = -1;
inline constexpr int kVoid = -2;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Marks image pixels that fall outside the world.
inline constexpr Rgb kVoidColor{255, 0, 255};

/// Row-major 2-D raster.
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw InputError("grid dimensions must be non-negative");
  }

  bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < height && col < width; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
  }
  T& at(int row, int col) { return data[index(row, col)]; }
  const T& at(int row, int col) const { return data[index(row, col)]; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using RgbImage = Grid<Rgb>;
/// Class id >= 0, kBackground or kVoid per pixel.
using LabelImage = Grid<std::int16_t>;

}  // namespace terrasense
