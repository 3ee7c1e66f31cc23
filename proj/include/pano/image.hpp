#pragma once

#include <vector>

#include "pano/tensor.hpp"

namespace pano {

// Equirectangular (or plain planar) RGB image, CHW layout, values in [0,1].
// Full panoramas satisfy w == 2*h; column 0 and column w-1 are wrap-adjacent.
struct ErpImage {
    int h = 0;
    int w = 0;
    std::vector<double> v;  // 3*h*w, planar CHW

    ErpImage() = default;
    ErpImage(int height, int width, double fill = 0.0);
    // clamps every value into [0,1]
    static ErpImage from_data(int height, int width, std::vector<double> data);

    double& at(int c, int y, int x) {
        return v[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
    double at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
    bool same_dims(const ErpImage& o) const { return h == o.h && w == o.w; }
    bool is_panorama() const { return w == 2 * h && h > 0; }
};

ErpImage clamp01(ErpImage img);

Tensor image_to_tensor(const ErpImage& img);           // (1,3,H,W)
ErpImage tensor_to_image(const Tensor& t, int batch = 0);  // clamped to [0,1]

// Separable resampling. wrap_x treats the width axis as cyclic (panoramas);
// the height axis always clamps.
ErpImage resize_bilinear(const ErpImage& img, int oh, int ow, bool wrap_x);
ErpImage resize_bicubic(const ErpImage& img, int oh, int ow, bool wrap_x);

// x wraps when wrap_x; y is clamped to valid rows
ErpImage crop(const ErpImage& img, int y0, int x0, int ch, int cw, bool wrap_x);

// variance of the 4-neighbour Laplacian, a plain high-frequency-energy probe
double laplacian_variance(const ErpImage& img);

double max_abs_diff(const ErpImage& a, const ErpImage& b);

}  // namespace pano
