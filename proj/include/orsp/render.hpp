#pragma once

#include <string>

#include "orsp/types.hpp"

namespace orsp {

/// SVG of one trial: the raster as a mosaic background (8 px cells), the
/// target box outlined, ground-truth fixations as numbered circles in a
/// blue family and predictions in an orange-red family, hue shifting per
/// pack, with arrows in temporal order. Byte-deterministic for identical
/// inputs.
std::string render_svg(const Trial& trial, const Scanpath& pred,
                       const Scanpath& gt);

void render_svg_file(const Trial& trial, const Scanpath& pred,
                     const Scanpath& gt, const std::string& path);

}  // namespace orsp
