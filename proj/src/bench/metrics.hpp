#pragma once

#include "core/types.hpp"

namespace sg {

// Intersection over union; both-empty counts as 1.0.
double miou(const Mask2D& pred, const Mask2D& gt);

// Boundary IoU: each mask is reduced to its boundary band
// band(M) = M \ erode(M, square of radius band_px) and the IoU of the two
// bands is returned (1.0 when both bands are empty). band_px <= 0 picks the
// default band of round(0.02 * image diagonal).
double mbiou(const Mask2D& pred, const Mask2D& gt, int band_px = 0);

int default_boundary_band_px(int width, int height);

// Erosion with a (2r+1)^2 square structuring element; pixels outside the
// image count as background.
Mask2D erode(const Mask2D& mask, int radius);

} // namespace sg
