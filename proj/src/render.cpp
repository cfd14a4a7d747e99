#include "orsp/render.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace orsp {

namespace {

constexpr int kCell = 8;  // background mosaic cell size in px

void appendf(std::string& out, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  out += buf;
}

struct Palette {
  // base hue per family, lightness shifted by pack index
  const char* const* fills;
  int count;
};

constexpr const char* kGtFills[] = {"#2c5f9e", "#3a77c2", "#4f8fd9",
                                    "#6aa6e8", "#88bcf2", "#a9cff7"};
constexpr const char* kPredFills[] = {"#b3361c", "#cc4a22", "#e05f2e",
                                      "#ef7840", "#f79457", "#fbb072"};

void draw_scanpath(std::string& out, const Scanpath& sp, const char* const* fills,
                   int n_fills, const char* cls) {
  // arrows first so circles sit on top
  double prev_x = -1.0, prev_y = -1.0;
  for (const auto& pack : sp.packs) {
    for (const auto& f : pack) {
      const double x = f.x * kImageWidth;
      const double y = f.y * kImageHeight;
      if (prev_x >= 0.0)
        appendf(out,
                "  <line class=\"%s-arrow\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" "
                "y2=\"%.2f\" stroke=\"%s\" stroke-width=\"1.2\" "
                "marker-end=\"url(#arrow-%s)\" opacity=\"0.8\"/>\n",
                cls, prev_x, prev_y, x, y, fills[0], cls);
      prev_x = x;
      prev_y = y;
    }
  }
  int order = 0;
  for (std::size_t j = 0; j < sp.packs.size(); ++j) {
    const char* fill = fills[j % static_cast<std::size_t>(n_fills)];
    for (const auto& f : sp.packs[j]) {
      ++order;
      const double x = f.x * kImageWidth;
      const double y = f.y * kImageHeight;
      appendf(out,
              "  <circle class=\"%s-fix\" cx=\"%.2f\" cy=\"%.2f\" r=\"9\" "
              "fill=\"%s\" stroke=\"#ffffff\" stroke-width=\"1.5\"/>\n",
              cls, x, y, fill);
      appendf(out,
              "  <text class=\"%s-label\" x=\"%.2f\" y=\"%.2f\" "
              "text-anchor=\"middle\" dominant-baseline=\"central\" "
              "font-size=\"9\" font-family=\"sans-serif\" "
              "fill=\"#ffffff\">%d</text>\n",
              cls, x, y, order);
    }
  }
}

}  // namespace

std::string render_svg(const Trial& trial, const Scanpath& pred,
                       const Scanpath& gt) {
  std::string out;
  out.reserve(1 << 20);
  appendf(out,
          "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" "
          "height=\"%d\" viewBox=\"0 0 %d %d\">\n",
          kImageWidth, kImageHeight, kImageWidth, kImageHeight);
  out +=
      "  <defs>\n"
      "    <marker id=\"arrow-gt\" markerWidth=\"6\" markerHeight=\"6\" "
      "refX=\"5\" refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" "
      "fill=\"#2c5f9e\"/></marker>\n"
      "    <marker id=\"arrow-pred\" markerWidth=\"6\" markerHeight=\"6\" "
      "refX=\"5\" refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" "
      "fill=\"#b3361c\"/></marker>\n"
      "  </defs>\n";

  // raster background as a cell mosaic; avoids an image codec
  const ImageRaster& img = trial.image;
  for (int cy = 0; cy < kImageHeight; cy += kCell) {
    for (int cx = 0; cx < kImageWidth; cx += kCell) {
      const int ch = std::min(kCell, kImageHeight - cy);
      const int cw = std::min(kCell, kImageWidth - cx);
      long acc[3] = {0, 0, 0};
      for (int y = cy; y < cy + ch; ++y)
        for (int x = cx; x < cx + cw; ++x) {
          const std::size_t base =
              (static_cast<std::size_t>(y) * kImageWidth + x) * 3;
          acc[0] += img.rgb[base];
          acc[1] += img.rgb[base + 1];
          acc[2] += img.rgb[base + 2];
        }
      const int n = ch * cw;
      appendf(out,
              "  <rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" "
              "fill=\"#%02x%02x%02x\"/>\n",
              cx, cy, cw, ch, static_cast<int>(acc[0] / n),
              static_cast<int>(acc[1] / n), static_cast<int>(acc[2] / n));
    }
  }

  if (trial.target_box) {
    const Box& b = *trial.target_box;
    appendf(out,
            "  <rect class=\"target\" x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" "
            "height=\"%.2f\" fill=\"none\" stroke=\"#ffffff\" "
            "stroke-width=\"2\" stroke-dasharray=\"6,3\"/>\n",
            b.x0 * kImageWidth, b.y0 * kImageHeight,
            (b.x1 - b.x0) * kImageWidth, (b.y1 - b.y0) * kImageHeight);
  }

  draw_scanpath(out, gt, kGtFills, 6, "gt");
  draw_scanpath(out, pred, kPredFills, 6, "pred");
  out += "</svg>\n";
  return out;
}

void render_svg_file(const Trial& trial, const Scanpath& pred,
                     const Scanpath& gt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("render_svg_file: cannot open " + path);
  const std::string svg = render_svg(trial, pred, gt);
  out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
  if (!out) throw std::runtime_error("render_svg_file: write failed: " + path);
}

}  // namespace orsp
