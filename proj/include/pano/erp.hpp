#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pano/image.hpp"

namespace pano {

// Per-row spherical area weights for an equirectangular image of H rows:
// w(v) = cos((v - H/2 + 1/2) * pi / H). Symmetric, positive, maximal at the
// central row(s).
struct LatitudeWeights {
    std::vector<double> w;
    double total() const;
};

LatitudeWeights make_latitude_weights(int rows);

// Latitude-weighted PSNR in dB; +infinity for identical images.
double ws_psnr(const ErpImage& a, const ErpImage& b);
// Same, restricted to pixels where mask_known is true (row-major H*W bools).
double ws_psnr_masked(const ErpImage& a, const ErpImage& b, const std::vector<std::uint8_t>& mask_known);

// Field-of-view specification for the known region of a panorama.
struct FovSpec {
    enum class Kind { angular, perspective };
    Kind kind = Kind::angular;
    // angular: centered block of lon_deg x lat_deg, shifted by yaw_deg
    double lon_deg = 180.0;
    double lat_deg = 90.0;
    double yaw_deg = 0.0;
    // perspective: square pinhole frustum of fov_deg at (yaw_deg, pitch_deg)
    double fov_deg = 90.0;
    double pitch_deg = 0.0;

    static FovSpec angular(double lon, double lat, double yaw = 0.0);
    static FovSpec perspective(double fov, double yaw = 0.0, double pitch = 0.0);
    std::string to_string() const;
    static FovSpec parse(const std::string& s);
};

struct FovMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> known;  // row-major, 1 = known
    FovSpec spec;

    bool at(int y, int x) const { return known[static_cast<std::size_t>(y) * w + x] != 0; }
    std::int64_t known_count() const;
    bool all_known() const { return known_count() == static_cast<std::int64_t>(known.size()); }
};

// Angular specs mark a centered block of round(W*lon/360) columns by
// round(H*lat/180) rows (round half up), cyclically shifted by yaw.
// Perspective specs mark the exact ERP footprint of the pinhole frustum.
FovMask make_fov_mask(const FovSpec& spec, int h, int w);

// Downsample a pixel mask to a token mask: a cell is known iff every pixel of
// its patch is known.
std::vector<std::uint8_t> downsample_mask_all(const FovMask& mask, int th, int tw);

// Unknown pixels become the gray value on all channels; known pixels copy
// bit-exactly.
ErpImage apply_mask_gray(const ErpImage& img, const FovMask& mask, double gray = 0.5);

// Cyclic column shift; shift > 0 moves content toward larger x. Lossless.
ErpImage rotate_horizontal(const ErpImage& img, int shift_pixels);

enum class CubeFace { front = 0, right = 1, back = 2, left = 3, top = 4, bottom = 5 };

// Six face_size x face_size faces, each spanning a 90-degree frustum.
// Orientation: +z is yaw 0 at the equator (front), +x is yaw 90 (right),
// +y is up. Face pixel (row j, col i) maps to directions documented in
// erp.cpp; lateral faces (front/right/back/left) carry the FID protocol.
struct CubemapFaces {
    int face_size = 0;
    std::array<ErpImage, 6> faces;

    const ErpImage& face(CubeFace f) const { return faces[static_cast<std::size_t>(f)]; }
    std::vector<const ErpImage*> lateral_faces() const;  // drop top and bottom
};

CubemapFaces erp_to_cubemap(const ErpImage& img, int face_size);
ErpImage cubemap_to_erp(const CubemapFaces& faces, int h);

// Pinhole reprojection; fov_deg is the horizontal field of view in (0,180).
ErpImage erp_to_perspective(const ErpImage& img, double yaw_deg, double pitch_deg, double fov_deg,
                            int out_w, int out_h);

}  // namespace pano
