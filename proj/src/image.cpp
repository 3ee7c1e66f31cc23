#include "pano/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pano {

ErpImage::ErpImage(int height, int width, double fill) : h(height), w(width) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("ErpImage: non-positive dims");
    v.assign(static_cast<std::size_t>(3) * height * width, fill);
}

ErpImage ErpImage::from_data(int height, int width, std::vector<double> data) {
    if (data.size() != static_cast<std::size_t>(3) * height * width)
        throw std::invalid_argument("ErpImage::from_data: size mismatch");
    ErpImage img;
    img.h = height;
    img.w = width;
    img.v = std::move(data);
    for (double& x : img.v) x = std::clamp(x, 0.0, 1.0);
    return img;
}

ErpImage clamp01(ErpImage img) {
    for (double& x : img.v) x = std::clamp(x, 0.0, 1.0);
    return img;
}

Tensor image_to_tensor(const ErpImage& img) {
    Tensor t({1, 3, img.h, img.w});
    t.v = img.v;
    return t;
}

ErpImage tensor_to_image(const Tensor& t, int batch) {
    if (t.rank() != 4 || t.dim(1) != 3) throw std::invalid_argument("tensor_to_image: expects (N,3,H,W)");
    ErpImage img(t.dim(2), t.dim(3));
    const std::size_t n = img.v.size();
    const double* src = &t.v[static_cast<std::size_t>(batch) * n];
    for (std::size_t i = 0; i < n; ++i) img.v[i] = std::clamp(src[i], 0.0, 1.0);
    return img;
}

namespace {

inline int wrap_i(int x, int n) { return ((x % n) + n) % n; }
inline int clamp_i(int x, int n) { return std::clamp(x, 0, n - 1); }

// Catmull-Rom (a = -0.5)
inline double cubic_w(double x) {
    x = std::fabs(x);
    if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
    if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
    return 0.0;
}

template <typename SampleRow>
ErpImage resample(const ErpImage& img, int oh, int ow, bool wrap_x, SampleRow&& sample) {
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("resize: non-positive output dims");
    ErpImage out(oh, ow);
    const double sy = static_cast<double>(img.h) / oh;
    const double sx = static_cast<double>(img.w) / ow;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double fy = (y + 0.5) * sy - 0.5;
                const double fx = (x + 0.5) * sx - 0.5;
                out.at(c, y, x) = std::clamp(sample(img, c, fy, fx, wrap_x), 0.0, 1.0);
            }
    return out;
}

double sample_bilinear(const ErpImage& img, int c, double fy, double fx, bool wrap_x) {
    const int y0 = static_cast<int>(std::floor(fy));
    const int x0 = static_cast<int>(std::floor(fx));
    const double dy = fy - y0, dx = fx - x0;
    double acc = 0.0;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const int yy = clamp_i(y0 + j, img.h);
            const int xx = wrap_x ? wrap_i(x0 + i, img.w) : clamp_i(x0 + i, img.w);
            const double wgt = (j ? dy : 1.0 - dy) * (i ? dx : 1.0 - dx);
            acc += wgt * img.at(c, yy, xx);
        }
    return acc;
}

double sample_bicubic(const ErpImage& img, int c, double fy, double fx, bool wrap_x) {
    const int y0 = static_cast<int>(std::floor(fy));
    const int x0 = static_cast<int>(std::floor(fx));
    const double dy = fy - y0, dx = fx - x0;
    double acc = 0.0;
    for (int j = -1; j <= 2; ++j) {
        const double wy = cubic_w(j - dy);
        if (wy == 0.0) continue;
        const int yy = clamp_i(y0 + j, img.h);
        for (int i = -1; i <= 2; ++i) {
            const double wx = cubic_w(i - dx);
            if (wx == 0.0) continue;
            const int xx = wrap_x ? wrap_i(x0 + i, img.w) : clamp_i(x0 + i, img.w);
            acc += wy * wx * img.at(c, yy, xx);
        }
    }
    return acc;
}

}  // namespace

ErpImage resize_bilinear(const ErpImage& img, int oh, int ow, bool wrap_x) {
    return resample(img, oh, ow, wrap_x,
                    [](const ErpImage& im, int c, double fy, double fx, bool wx) {
                        return sample_bilinear(im, c, fy, fx, wx);
                    });
}

ErpImage resize_bicubic(const ErpImage& img, int oh, int ow, bool wrap_x) {
    return resample(img, oh, ow, wrap_x,
                    [](const ErpImage& im, int c, double fy, double fx, bool wx) {
                        return sample_bicubic(im, c, fy, fx, wx);
                    });
}

ErpImage crop(const ErpImage& img, int y0, int x0, int ch, int cw, bool wrap_x) {
    if (ch <= 0 || cw <= 0) throw std::invalid_argument("crop: non-positive dims");
    if (y0 < 0 || y0 + ch > img.h) throw std::invalid_argument("crop: row range out of bounds");
    if (!wrap_x && (x0 < 0 || x0 + cw > img.w))
        throw std::invalid_argument("crop: column range out of bounds");
    ErpImage out(ch, cw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                out.at(c, y, x) = img.at(c, y0 + y, wrap_x ? wrap_i(x0 + x, img.w) : x0 + x);
    return out;
}

double laplacian_variance(const ErpImage& img) {
    if (img.h < 3 || img.w < 3) return 0.0;
    double sum = 0.0, sum2 = 0.0;
    std::int64_t n = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 1; y < img.h - 1; ++y)
            for (int x = 1; x < img.w - 1; ++x) {
                const double l = img.at(c, y - 1, x) + img.at(c, y + 1, x) + img.at(c, y, x - 1) +
                                 img.at(c, y, x + 1) - 4.0 * img.at(c, y, x);
                sum += l;
                sum2 += l * l;
                ++n;
            }
    const double m = sum / n;
    return sum2 / n - m * m;
}

double max_abs_diff(const ErpImage& a, const ErpImage& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("max_abs_diff: dims differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace pano
