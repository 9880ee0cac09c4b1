#include <cstring>
#include <fstream>

#include "terrasense/nn.hpp"

namespace terrasense::nn {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw InputError("truncated checkpoint: " + path.string());
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const Mlp> nets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(nets.size()));
  for (const auto& net : nets) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& layer : net.layers()) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.rows()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.cols()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
      out.write(reinterpret_cast<const char*>(layer.weight.data()),
                static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
  }
  if (!out) throw InputError("failed writing checkpoint: " + path.string());
}

std::vector<Mlp> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InputError("not a checkpoint: " + path.string());
  if (get<std::uint32_t>(in, path) != kVersion) throw InputError("unsupported checkpoint version: " + path.string());
  const auto count = get<std::uint32_t>(in, path);
  std::vector<Mlp> nets;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto layers = get<std::uint32_t>(in, path);
    if (layers == 0 || layers > 64) throw InputError("corrupt checkpoint: " + path.string());
    std::vector<Layer> parsed;
    std::vector<int> dims;
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto rows = get<std::uint32_t>(in, path);
      const auto cols = get<std::uint32_t>(in, path);
      const auto act = get<std::uint8_t>(in, path);
      if (rows == 0 || cols == 0 || rows > (1U << 20) || cols > (1U << 20) || act > 1) {
        throw InputError("corrupt checkpoint: " + path.string());
      }
      if (l == 0) dims.push_back(static_cast<int>(cols));
      else if (static_cast<int>(cols) != dims.back()) throw InputError("inconsistent layer dims: " + path.string());
      dims.push_back(static_cast<int>(rows));
      Layer layer;
      layer.weight.resize(rows, cols);
      layer.bias.resize(rows);
      layer.activation = static_cast<Activation>(act);
      in.read(reinterpret_cast<char*>(layer.weight.data()), static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
      in.read(reinterpret_cast<char*>(layer.bias.data()), static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
      if (!in) throw InputError("truncated checkpoint: " + path.string());
      parsed.push_back(std::move(layer));
    }
    Mlp net(dims, Activation::tanh, Activation::linear);
    net.layers() = std::move(parsed);
    nets.push_back(std::move(net));
  }
  return nets;
}

}  // namespace terrasense::nn
