#include "mid/data/procedural.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "mid/core/error.hpp"

namespace mid {

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise: random lattice values blended with smoothstep weights.
std::vector<double> value_noise(int h, int w, double cell, RngStream& rng) {
  const int gh = static_cast<int>(std::ceil(h / cell)) + 2;
  const int gw = static_cast<int>(std::ceil(w / cell)) + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
  for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const double fy = y / cell;
    const int iy = static_cast<int>(fy);
    const double ty = smoothstep(fy - iy);
    for (int x = 0; x < w; ++x) {
      const double fx = x / cell;
      const int ix = static_cast<int>(fx);
      const double tx = smoothstep(fx - ix);
      auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
      const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
      const double bot = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
      out[static_cast<std::size_t>(y) * w + x] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

std::array<double, 3> random_color(RngStream& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

void blend(ImageTensor& img, int y, int x, const std::array<double, 3>& color, double opacity) {
  for (int c = 0; c < img.channels(); ++c) {
    const double target = img.channels() == 1 ? (color[0] + color[1] + color[2]) / 3.0 : color[c];
    float& v = img.at(y, x, c);
    v = static_cast<float>(v * (1.0 - opacity) + target * opacity);
  }
}

void draw_shape(ImageTensor& img, RngStream& rng) {
  const int h = img.height();
  const int w = img.width();
  const auto color = random_color(rng, 0.05, 0.95);
  const double opacity = rng.uniform(0.6, 1.0);
  const double cy = rng.uniform(0, h);
  const double cx = rng.uniform(0, w);
  const double ry = rng.uniform(0.08, 0.3) * h;
  const double rx = rng.uniform(0.08, 0.3) * w;
  const bool ellipse = rng.bernoulli(0.5);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = (y - cy) / ry;
      const double dx = (x - cx) / rx;
      const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
      if (inside) blend(img, y, x, color, opacity);
    }
}

void draw_stripes(ImageTensor& img, RngStream& rng) {
  const int h = img.height();
  const int w = img.width();
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 2)));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 2)));
  const int y1 = std::min(h, y0 + h / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 4 + 1))));
  const int x1 = std::min(w, x0 + w / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 4 + 1))));
  const double period = rng.uniform(4.0, 10.0);
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const auto color = random_color(rng, 0.1, 0.9);
  const double amp = rng.uniform(0.3, 0.7);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double t = (x * std::cos(angle) + y * std::sin(angle)) * 2.0 * std::numbers::pi / period;
      blend(img, y, x, color, amp * 0.5 * (1.0 + std::sin(t)));
    }
}

// Rows of small stroke glyphs, loosely resembling printed text.
void draw_text(ImageTensor& img, RngStream& rng) {
  const int h = img.height();
  const int w = img.width();
  const auto ink = random_color(rng, 0.0, 1.0);
  const int glyph_h = 5 + static_cast<int>(rng.below(3));
  const int glyph_w = 3 + static_cast<int>(rng.below(2));
  const int lines = 1 + static_cast<int>(rng.below(3));
  int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, h - lines * (glyph_h + 3)))));
  for (int line = 0; line < lines && y + glyph_h < h; ++line, y += glyph_h + 3) {
    int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 4 + 1)));
    const int end = x + w / 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 2)));
    for (; x + glyph_w < std::min(end, w); x += glyph_w + 2) {
      if (rng.bernoulli(0.15)) continue;  // word gap
      const int strokes = 2 + static_cast<int>(rng.below(3));
      for (int s = 0; s < strokes; ++s) {
        if (rng.bernoulli(0.5)) {
          const int col = x + static_cast<int>(rng.below(static_cast<std::uint64_t>(glyph_w)));
          for (int yy = y; yy < y + glyph_h; ++yy) blend(img, yy, col, ink, 0.9);
        } else {
          const int row = y + static_cast<int>(rng.below(static_cast<std::uint64_t>(glyph_h)));
          for (int xx = x; xx < x + glyph_w; ++xx) blend(img, row, xx, ink, 0.9);
        }
      }
    }
  }
}

}  // namespace

ImageTensor procedural_scene(int height, int width, int channels, RngStream& rng) {
  if (height < 8 || width < 8) throw InvalidArgument("procedural_scene: image must be at least 8x8");
  if (channels != 1 && channels != 3) throw InvalidArgument("procedural_scene: channels must be 1 or 3");
  ImageTensor img(height, width, channels);

  const auto c0 = random_color(rng, 0.15, 0.85);
  const auto c1 = random_color(rng, 0.15, 0.85);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dir_y = std::sin(angle);
  const double dir_x = std::cos(angle);
  const double span = std::abs(dir_y) * height + std::abs(dir_x) * width;
  const double offset = std::min(0.0, dir_y * height) + std::min(0.0, dir_x * width);

  const std::array<double, 3> cells = {width / 2.0, width / 4.0, width / 8.0};
  const std::array<double, 3> amps = {0.15, 0.08, 0.04};
  std::vector<double> texture(static_cast<std::size_t>(height) * width, 0.0);
  for (std::size_t o = 0; o < cells.size(); ++o) {
    const auto layer = value_noise(height, width, std::max(2.0, cells[o]), rng);
    for (std::size_t i = 0; i < texture.size(); ++i) texture[i] += amps[o] * layer[i];
  }
  const auto tint = random_color(rng, 0.5, 1.0);

  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double t = (y * dir_y + x * dir_x - offset) / span;
      const double tex = texture[static_cast<std::size_t>(y) * width + x];
      for (int c = 0; c < channels; ++c) {
        const int k = channels == 1 ? 0 : c;
        const double base = channels == 1 ? ((c0[0] + c0[1] + c0[2]) * (1 - t) + (c1[0] + c1[1] + c1[2]) * t) / 3.0
                                          : c0[k] * (1 - t) + c1[k] * t;
        img.at(y, x, c) = static_cast<float>(base + tex * (channels == 1 ? 1.0 : tint[k]));
      }
    }

  const int shapes = 2 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) draw_shape(img, rng);
  if (rng.bernoulli(0.35)) draw_stripes(img, rng);
  if (rng.bernoulli(0.5)) draw_text(img, rng);

  for (float& v : img.data()) v = std::clamp(v, 0.02f, 0.98f);
  return img;
}

ImageCorpus procedural_corpus(int count, int size, int channels, RngStream& rng) {
  if (count < 1) throw InvalidArgument("procedural_corpus: count must be >= 1");
  ImageCorpus corpus;
  corpus.role = CorpusRole::Clean;
  for (int i = 0; i < count; ++i) {
    RngStream scene_rng = rng.derive("scene", static_cast<std::uint64_t>(i));
    char id[32];
    std::snprintf(id, sizeof id, "scene-%04d", i);
    corpus.scenes.push_back({id, procedural_scene(size, size, channels, scene_rng)});
  }
  corpus.provenance = {{"source", "procedural"}, {"count", count}, {"size", size}, {"channels", channels}};
  return corpus;
}

}  // namespace mid
