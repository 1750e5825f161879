#include "bench/metrics.hpp"

#include <cmath>

namespace sg {

namespace {

    void check_shapes(const Mask2D& a, const Mask2D& b) {
        if (!a.same_shape(b)) {
            throw DimensionError("mask shapes differ: " + std::to_string(a.width) + "x" +
                                 std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                 "x" + std::to_string(b.height));
        }
    }

    double iou_of(const Mask2D& a, const Mask2D& b) {
        long inter = 0;
        long uni = 0;
        for (size_t i = 0; i < a.bits.size(); ++i) {
            const bool pa = a.bits[i] != 0;
            const bool pb = b.bits[i] != 0;
            inter += (pa && pb) ? 1 : 0;
            uni += (pa || pb) ? 1 : 0;
        }
        if (uni == 0) {
            return 1.0;
        }
        return static_cast<double>(inter) / static_cast<double>(uni);
    }

} // namespace

double miou(const Mask2D& pred, const Mask2D& gt) {
    check_shapes(pred, gt);
    return iou_of(pred, gt);
}

int default_boundary_band_px(int width, int height) {
    const double diag = std::sqrt(static_cast<double>(width) * width +
                                  static_cast<double>(height) * height);
    return std::max(1, static_cast<int>(std::lround(0.02 * diag)));
}

Mask2D erode(const Mask2D& mask, int radius) {
    if (radius <= 0) {
        return mask;
    }
    Mask2D out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) {
                continue;
            }
            bool keep = true;
            for (int dy = -radius; keep && dy <= radius; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= mask.height) {
                    keep = false;
                    break;
                }
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= mask.width || !mask.at(xx, yy)) {
                        keep = false;
                        break;
                    }
                }
            }
            out.set(x, y, keep ? 1 : 0);
        }
    }
    return out;
}

namespace {

    Mask2D boundary_band(const Mask2D& mask, int radius) {
        const Mask2D eroded = erode(mask, radius);
        Mask2D band(mask.width, mask.height);
        for (size_t i = 0; i < mask.bits.size(); ++i) {
            band.bits[i] = (mask.bits[i] && !eroded.bits[i]) ? 1 : 0;
        }
        return band;
    }

} // namespace

double mbiou(const Mask2D& pred, const Mask2D& gt, int band_px) {
    check_shapes(pred, gt);
    const int band = band_px > 0 ? band_px : default_boundary_band_px(pred.width, pred.height);
    return iou_of(boundary_band(pred, band), boundary_band(gt, band));
}

} // namespace sg
