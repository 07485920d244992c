#include "spotlight/screen/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace spotlight::screen {

namespace {

// Pixel-center bilinear sample; identity when src and dst sizes match.
float sample_bilinear(const Image& img, double y, double x, int ch) {
  const double fy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const double fx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double wy = fy - y0;
  const double wx = fx - x0;
  const double v = (1 - wy) * ((1 - wx) * img.at(y0, x0, ch) + wx * img.at(y0, x1, ch)) +
                   wy * ((1 - wx) * img.at(y1, x0, ch) + wx * img.at(y1, x1, ch));
  return static_cast<float>(v);
}

}  // namespace

Screenshot preprocess_screenshot(const Image& raw, int target_size, int patch_size) {
  if (raw.height <= 0 || raw.width <= 0) {
    throw DomainError("preprocess_screenshot: zero-area input");
  }
  if (target_size <= 0 || patch_size <= 0 || target_size % patch_size != 0) {
    throw DomainError("preprocess_screenshot: target_size must be a positive multiple of patch_size");
  }
  for (float p : raw.pixels) {
    if (p < 0.0f || p > 1.0f) {
      throw DomainError("preprocess_screenshot: pixel values must lie in [0, 1]");
    }
  }

  const double scale = std::min(static_cast<double>(target_size) / raw.width,
                                static_cast<double>(target_size) / raw.height);
  Screenshot out;
  out.size = target_size;
  out.patch_size = patch_size;
  out.grid_rows = target_size / patch_size;
  out.grid_cols = target_size / patch_size;
  out.content_width = std::min(target_size, static_cast<int>(std::lround(raw.width * scale)));
  out.content_height = std::min(target_size, static_cast<int>(std::lround(raw.height * scale)));
  out.pixels.assign(static_cast<std::size_t>(target_size) * target_size * 3, 0.0f);

  const double inv_sx = static_cast<double>(raw.width) / out.content_width;
  const double inv_sy = static_cast<double>(raw.height) / out.content_height;
  for (int r = 0; r < out.content_height; ++r) {
    const double sy = (r + 0.5) * inv_sy - 0.5;
    for (int c = 0; c < out.content_width; ++c) {
      const double sx = (c + 0.5) * inv_sx - 0.5;
      for (int ch = 0; ch < 3; ++ch) {
        out.pixels[(static_cast<std::size_t>(r) * target_size + c) * 3 + ch] =
            sample_bilinear(raw, sy, sx, ch);
      }
    }
  }

  out.valid_mask.assign(static_cast<std::size_t>(out.grid_rows) * out.grid_cols, 0);
  for (int r = 0; r < out.grid_rows; ++r) {
    for (int c = 0; c < out.grid_cols; ++c) {
      const bool covered = r * patch_size < out.content_height && c * patch_size < out.content_width;
      out.valid_mask[r * out.grid_cols + c] = covered ? 1 : 0;
    }
  }
  return out;
}

}  // namespace spotlight::screen
