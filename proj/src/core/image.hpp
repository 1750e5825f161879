#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace sg {

// Float RGB image, values in [0,1], row-major H*W*3.
struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ImageRGB() = default;
    ImageRGB(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0f) {}

    float* pixel(int x, int y) { return data.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const float* pixel(int x, int y) const {
        return data.data() + (static_cast<size_t>(y) * width + x) * 3;
    }

    std::vector<uint8_t> to_rgb8() const {
        std::vector<uint8_t> out(data.size());
        for (size_t i = 0; i < data.size(); ++i) {
            out[i] = static_cast<uint8_t>(std::clamp(data[i], 0.0f, 1.0f) * 255.0f + 0.5f);
        }
        return out;
    }
};

} // namespace sg
