#include <cmath>

#include "terrasense/geometry.hpp"

namespace terrasense::geometry {

PatchExtraction extract_patches(const WeakLabelImage& weak, std::span<const PathSample> samples, int patch_px) {
  if (patch_px <= 0) throw InputError("patch size must be positive");
  PatchExtraction out;
  const int w = weak.image.width;
  const int h = weak.image.height;
  for (const auto& sample : samples) {
    const int row0 = static_cast<int>(std::floor(sample.pixel.y())) - patch_px / 2;
    const int col0 = static_cast<int>(std::floor(sample.pixel.x())) - patch_px / 2;
    const auto tag = "clip " + std::to_string(sample.clip_index);
    if (row0 < 0 || col0 < 0 || row0 + patch_px > h || col0 + patch_px > w) {
      out.diagnostics.push_back(tag + ": patch leaves the image");
      continue;
    }
    bool inside = true;
    for (int r = row0; r < row0 + patch_px && inside; ++r) {
      for (int c = col0; c < col0 + patch_px; ++c) {
        if (weak.labels.at(r, c) < 0 || weak.image.at(r, c) == kVoidColor) {
          inside = false;
          break;
        }
      }
    }
    if (!inside) {
      out.diagnostics.push_back(tag + ": stroke narrower than patch");
      continue;
    }
    TerrainPatch patch;
    patch.pixels = RgbImage(patch_px, patch_px);
    for (int r = 0; r < patch_px; ++r) {
      for (int c = 0; c < patch_px; ++c) patch.pixels.at(r, c) = weak.image.at(row0 + r, col0 + c);
    }
    patch.center_pose_index = sample.pose_index;
    patch.clip_index = sample.clip_index;
    patch.row0 = row0;
    patch.col0 = col0;
    out.patches.push_back(std::move(patch));
  }
  return out;
}

}  // namespace terrasense::geometry
