#include "pano/erp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pano {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline int wrap_i(int x, int n) { return ((x % n) + n) % n; }
inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

struct Vec3 {
    double x, y, z;
};

inline Vec3 norm3(Vec3 a) {
    const double n = std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z);
    return {a.x / n, a.y / n, a.z / n};
}

inline double dot3(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// yaw 0, pitch 0 faces +z; +x is yaw +90deg; +y is up
inline Vec3 dir_from_angles(double yaw, double pitch) {
    const double cp = std::cos(pitch);
    return {cp * std::sin(yaw), std::sin(pitch), cp * std::cos(yaw)};
}

// pixel-center angles of the ERP grid
inline double yaw_of_col(int u, int w) { return 2.0 * kPi * (u + 0.5) / w - kPi; }
inline double pitch_of_row(int v, int h) { return kPi / 2.0 - kPi * (v + 0.5) / h; }

double sample_erp_bilinear(const ErpImage& img, int c, double yaw, double pitch) {
    const double uf = (yaw + kPi) / (2.0 * kPi) * img.w - 0.5;
    const double vf = (kPi / 2.0 - pitch) / kPi * img.h - 0.5;
    const int u0 = static_cast<int>(std::floor(uf));
    const int v0 = static_cast<int>(std::floor(vf));
    const double du = uf - u0, dv = vf - v0;
    double acc = 0.0;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const int uu = wrap_i(u0 + i, img.w);
            const int vv = std::clamp(v0 + j, 0, img.h - 1);
            acc += (j ? dv : 1.0 - dv) * (i ? du : 1.0 - du) * img.at(c, vv, uu);
        }
    return acc;
}

}  // namespace

double LatitudeWeights::total() const {
    double s = 0.0;
    for (double x : w) s += x;
    return s;
}

LatitudeWeights make_latitude_weights(int rows) {
    if (rows < 1) throw std::invalid_argument("make_latitude_weights: rows must be >= 1");
    LatitudeWeights lw;
    lw.w.resize(static_cast<std::size_t>(rows));
    for (int v = 0; v < rows; ++v)
        lw.w[static_cast<std::size_t>(v)] = std::cos((v - rows / 2.0 + 0.5) * kPi / rows);
    return lw;
}

namespace {

double weighted_mse(const ErpImage& a, const ErpImage& b, const std::vector<std::uint8_t>* mask) {
    const LatitudeWeights lw = make_latitude_weights(a.h);
    double num = 0.0, den = 0.0;
    for (int y = 0; y < a.h; ++y) {
        const double wgt = lw.w[static_cast<std::size_t>(y)];
        for (int x = 0; x < a.w; ++x) {
            if (mask && !(*mask)[static_cast<std::size_t>(y) * a.w + x]) continue;
            for (int c = 0; c < 3; ++c) {
                const double d = a.at(c, y, x) - b.at(c, y, x);
                num += wgt * d * d;
            }
            den += 3.0 * wgt;
        }
    }
    if (den == 0.0) throw std::invalid_argument("ws_psnr: empty evaluation region");
    return num / den;
}

}  // namespace

double ws_psnr(const ErpImage& a, const ErpImage& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("ws_psnr: dimension mismatch");
    const double mse = weighted_mse(a, b, nullptr);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ws_psnr_masked(const ErpImage& a, const ErpImage& b, const std::vector<std::uint8_t>& mask_known) {
    if (!a.same_dims(b)) throw std::invalid_argument("ws_psnr: dimension mismatch");
    if (mask_known.size() != static_cast<std::size_t>(a.h) * a.w)
        throw std::invalid_argument("ws_psnr_masked: mask size mismatch");
    const double mse = weighted_mse(a, b, &mask_known);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

FovSpec FovSpec::angular(double lon, double lat, double yaw) {
    FovSpec s;
    s.kind = Kind::angular;
    s.lon_deg = lon;
    s.lat_deg = lat;
    s.yaw_deg = yaw;
    return s;
}

FovSpec FovSpec::perspective(double fov, double yaw, double pitch) {
    FovSpec s;
    s.kind = Kind::perspective;
    s.fov_deg = fov;
    s.yaw_deg = yaw;
    s.pitch_deg = pitch;
    return s;
}

std::string FovSpec::to_string() const {
    std::ostringstream os;
    if (kind == Kind::angular)
        os << "angular:" << lon_deg << "x" << lat_deg << "@" << yaw_deg;
    else
        os << "perspective:" << fov_deg << "@" << yaw_deg << "," << pitch_deg;
    return os.str();
}

FovSpec FovSpec::parse(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("FovSpec::parse: bad spec " + s);
    const std::string kind = s.substr(0, colon);
    const std::string rest = s.substr(colon + 1);
    FovSpec out;
    if (kind == "angular") {
        const auto x = rest.find('x');
        const auto at = rest.find('@');
        if (x == std::string::npos) throw std::invalid_argument("FovSpec::parse: bad spec " + s);
        out.kind = Kind::angular;
        out.lon_deg = std::stod(rest.substr(0, x));
        out.lat_deg = std::stod(rest.substr(x + 1, at == std::string::npos ? std::string::npos : at - x - 1));
        out.yaw_deg = at == std::string::npos ? 0.0 : std::stod(rest.substr(at + 1));
    } else if (kind == "perspective") {
        const auto at = rest.find('@');
        out.kind = Kind::perspective;
        out.fov_deg = std::stod(rest.substr(0, at));
        out.yaw_deg = 0.0;
        out.pitch_deg = 0.0;
        if (at != std::string::npos) {
            const std::string tail = rest.substr(at + 1);
            const auto comma = tail.find(',');
            out.yaw_deg = std::stod(tail.substr(0, comma));
            if (comma != std::string::npos) out.pitch_deg = std::stod(tail.substr(comma + 1));
        }
    } else {
        throw std::invalid_argument("FovSpec::parse: unknown kind in " + s);
    }
    return out;
}

std::int64_t FovMask::known_count() const {
    std::int64_t n = 0;
    for (std::uint8_t k : known) n += k;
    return n;
}

FovMask make_fov_mask(const FovSpec& spec, int h, int w) {
    if (h < 1 || w < 1) throw std::invalid_argument("make_fov_mask: bad dims");
    FovMask m;
    m.h = h;
    m.w = w;
    m.spec = spec;
    m.known.assign(static_cast<std::size_t>(h) * w, 0);

    if (spec.kind == FovSpec::Kind::angular) {
        if (spec.lon_deg <= 0.0 || spec.lon_deg > 360.0 || spec.lat_deg <= 0.0 || spec.lat_deg > 180.0)
            throw std::invalid_argument("make_fov_mask: angular spec out of range");
        const int cols = round_half_up(w * spec.lon_deg / 360.0);
        const int rows = round_half_up(h * spec.lat_deg / 180.0);
        if (cols == 0 || rows == 0) throw std::invalid_argument("make_fov_mask: zero-area mask");
        const int row0 = round_half_up((h - rows) / 2.0);
        const int col0 = round_half_up((w - cols) / 2.0) + round_half_up(spec.yaw_deg / 360.0 * w);
        for (int y = row0; y < row0 + rows; ++y)
            for (int x = col0; x < col0 + cols; ++x)
                m.known[static_cast<std::size_t>(y) * w + wrap_i(x, w)] = 1;
    } else {
        if (spec.fov_deg <= 0.0 || spec.fov_deg >= 180.0)
            throw std::invalid_argument("make_fov_mask: perspective fov out of range");
        const double yaw = spec.yaw_deg * kPi / 180.0;
        const double pitch = spec.pitch_deg * kPi / 180.0;
        const Vec3 f = dir_from_angles(yaw, pitch);
        const Vec3 r = dir_from_angles(yaw + kPi / 2.0, 0.0);
        const Vec3 up = dir_from_angles(yaw, pitch + kPi / 2.0);
        const double half = std::tan(spec.fov_deg / 2.0 * kPi / 180.0);
        std::int64_t count = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const Vec3 d = dir_from_angles(yaw_of_col(x, w), pitch_of_row(y, h));
                const double z = dot3(d, f);
                if (z <= 0.0) continue;
                if (std::fabs(dot3(d, r)) <= half * z && std::fabs(dot3(d, up)) <= half * z) {
                    m.known[static_cast<std::size_t>(y) * w + x] = 1;
                    ++count;
                }
            }
        if (count == 0) throw std::invalid_argument("make_fov_mask: zero-area mask");
    }
    return m;
}

std::vector<std::uint8_t> downsample_mask_all(const FovMask& mask, int th, int tw) {
    if (mask.h % th != 0 || mask.w % tw != 0)
        throw std::invalid_argument("downsample_mask_all: dims not divisible");
    const int py = mask.h / th, px = mask.w / tw;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(th) * tw, 0);
    for (int ty = 0; ty < th; ++ty)
        for (int tx = 0; tx < tw; ++tx) {
            bool all = true;
            for (int y = ty * py; all && y < (ty + 1) * py; ++y)
                for (int x = tx * px; x < (tx + 1) * px; ++x)
                    if (!mask.at(y, x)) {
                        all = false;
                        break;
                    }
            out[static_cast<std::size_t>(ty) * tw + tx] = all ? 1 : 0;
        }
    return out;
}

ErpImage apply_mask_gray(const ErpImage& img, const FovMask& mask, double gray) {
    if (img.h != mask.h || img.w != mask.w)
        throw std::invalid_argument("apply_mask_gray: dimension mismatch");
    ErpImage out = img;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            if (!mask.at(y, x))
                for (int c = 0; c < 3; ++c) out.at(c, y, x) = gray;
    return out;
}

ErpImage rotate_horizontal(const ErpImage& img, int shift_pixels) {
    ErpImage out(img.h, img.w);
    const int s = wrap_i(shift_pixels, img.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, wrap_i(x - s, img.w));
    return out;
}

std::vector<const ErpImage*> CubemapFaces::lateral_faces() const {
    return {&faces[0], &faces[1], &faces[2], &faces[3]};
}

namespace {

// face-local (a,b) in [-1,1]^2 to world direction; b grows downward
Vec3 face_dir(CubeFace f, double a, double b) {
    switch (f) {
        case CubeFace::front: return norm3({a, -b, 1.0});
        case CubeFace::right: return norm3({1.0, -b, -a});
        case CubeFace::back: return norm3({-a, -b, -1.0});
        case CubeFace::left: return norm3({-1.0, -b, a});
        case CubeFace::top: return norm3({a, 1.0, b});
        case CubeFace::bottom: return norm3({a, -1.0, -b});
    }
    throw std::logic_error("face_dir: bad face");
}

}  // namespace

CubemapFaces erp_to_cubemap(const ErpImage& img, int face_size) {
    if (!img.is_panorama()) throw std::invalid_argument("erp_to_cubemap: needs W = 2H");
    if (face_size < 1) throw std::invalid_argument("erp_to_cubemap: face_size must be >= 1");
    CubemapFaces out;
    out.face_size = face_size;
    for (int fi = 0; fi < 6; ++fi) {
        ErpImage face(face_size, face_size);
        for (int j = 0; j < face_size; ++j)
            for (int i = 0; i < face_size; ++i) {
                const double a = 2.0 * (i + 0.5) / face_size - 1.0;
                const double b = 2.0 * (j + 0.5) / face_size - 1.0;
                const Vec3 d = face_dir(static_cast<CubeFace>(fi), a, b);
                const double yaw = std::atan2(d.x, d.z);
                const double pitch = std::asin(std::clamp(d.y, -1.0, 1.0));
                for (int c = 0; c < 3; ++c)
                    face.at(c, j, i) = std::clamp(sample_erp_bilinear(img, c, yaw, pitch), 0.0, 1.0);
            }
        out.faces[static_cast<std::size_t>(fi)] = std::move(face);
    }
    return out;
}

ErpImage cubemap_to_erp(const CubemapFaces& cm, int h) {
    if (cm.face_size < 1) throw std::invalid_argument("cubemap_to_erp: empty cubemap");
    if (h < 1) throw std::invalid_argument("cubemap_to_erp: bad height");
    const int w = 2 * h;
    const int s = cm.face_size;
    ErpImage out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec3 d = dir_from_angles(yaw_of_col(x, w), pitch_of_row(y, h));
            const double ax = std::fabs(d.x), ay = std::fabs(d.y), az = std::fabs(d.z);
            CubeFace f;
            double a, b;
            if (az >= ax && az >= ay) {
                if (d.z > 0.0) {
                    f = CubeFace::front;
                    a = d.x / d.z;
                    b = -d.y / d.z;
                } else {
                    f = CubeFace::back;
                    a = d.x / d.z;
                    b = d.y / d.z;
                }
            } else if (ax >= ay) {
                if (d.x > 0.0) {
                    f = CubeFace::right;
                    a = -d.z / d.x;
                    b = -d.y / d.x;
                } else {
                    f = CubeFace::left;
                    a = -d.z / d.x;
                    b = d.y / d.x;
                }
            } else {
                if (d.y > 0.0) {
                    f = CubeFace::top;
                    a = d.x / d.y;
                    b = d.z / d.y;
                } else {
                    f = CubeFace::bottom;
                    a = -d.x / d.y;
                    b = d.z / d.y;
                }
            }
            const ErpImage& face = cm.face(f);
            const double fi = (a + 1.0) / 2.0 * s - 0.5;
            const double fj = (b + 1.0) / 2.0 * s - 0.5;
            const int i0 = static_cast<int>(std::floor(fi));
            const int j0 = static_cast<int>(std::floor(fj));
            const double di = fi - i0, dj = fj - j0;
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int jj = 0; jj < 2; ++jj)
                    for (int ii = 0; ii < 2; ++ii) {
                        const int ci = std::clamp(i0 + ii, 0, s - 1);
                        const int cj = std::clamp(j0 + jj, 0, s - 1);
                        acc += (jj ? dj : 1.0 - dj) * (ii ? di : 1.0 - di) * face.at(c, cj, ci);
                    }
                out.at(c, y, x) = std::clamp(acc, 0.0, 1.0);
            }
        }
    return out;
}

ErpImage erp_to_perspective(const ErpImage& img, double yaw_deg, double pitch_deg, double fov_deg,
                            int out_w, int out_h) {
    if (fov_deg <= 0.0 || fov_deg >= 180.0)
        throw std::invalid_argument("erp_to_perspective: fov must be in (0,180)");
    if (out_w < 1 || out_h < 1) throw std::invalid_argument("erp_to_perspective: bad output dims");
    const double yaw = yaw_deg * kPi / 180.0;
    const double pitch = pitch_deg * kPi / 180.0;
    const Vec3 f = dir_from_angles(yaw, pitch);
    const Vec3 r = dir_from_angles(yaw + kPi / 2.0, 0.0);
    const Vec3 up = dir_from_angles(yaw, pitch + kPi / 2.0);
    const double half_w = std::tan(fov_deg / 2.0 * kPi / 180.0);
    const double half_h = half_w * out_h / out_w;
    ErpImage out(out_h, out_w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double a = (2.0 * (x + 0.5) / out_w - 1.0) * half_w;
            const double b = (2.0 * (y + 0.5) / out_h - 1.0) * half_h;
            const Vec3 d = norm3({f.x + a * r.x - b * up.x, f.y + a * r.y - b * up.y,
                                  f.z + a * r.z - b * up.z});
            const double py = std::atan2(d.x, d.z);
            const double pp = std::asin(std::clamp(d.y, -1.0, 1.0));
            for (int c = 0; c < 3; ++c)
                out.at(c, y, x) = std::clamp(sample_erp_bilinear(img, c, py, pp), 0.0, 1.0);
        }
    return out;
}

}  // namespace pano
