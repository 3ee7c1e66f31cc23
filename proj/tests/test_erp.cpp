#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>

#include "pano/erp.hpp"
#include "pano/image_io.hpp"
#include "pano/rng.hpp"

using namespace pano;

namespace {

ErpImage random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    ErpImage img(h, w);
    for (double& x : img.v) x = rng.uniform01();
    return img;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TEST_CASE("latitude weights match the direct formula") {
    CHECK_THROWS_AS(make_latitude_weights(0), std::invalid_argument);

    const LatitudeWeights w1 = make_latitude_weights(1);
    CHECK(w1.w.size() == 1);
    CHECK(w1.w[0] == doctest::Approx(1.0).epsilon(1e-12));

    const LatitudeWeights w4 = make_latitude_weights(4);
    CHECK(w4.w[0] == doctest::Approx(0.38268).epsilon(1e-4));
    CHECK(w4.w[1] == doctest::Approx(0.92388).epsilon(1e-4));
    CHECK(w4.w[2] == doctest::Approx(0.92388).epsilon(1e-4));
    CHECK(w4.w[3] == doctest::Approx(0.38268).epsilon(1e-4));

    // symmetry, positivity, maximal at the center, and agreement with the
    // independent cos-latitude formulation
    for (int h : {1, 2, 3, 4, 5, 16, 17, 64, 127, 128, 512}) {
        const LatitudeWeights lw = make_latitude_weights(h);
        double mx = 0.0;
        for (int v = 0; v < h; ++v) {
            CHECK(lw.w[v] == lw.w[h - 1 - v]);
            CHECK(lw.w[v] > 0.0);
            mx = std::max(mx, lw.w[v]);
            const double lat = kPi * (v + 0.5) / h - kPi / 2.0;
            CHECK(std::fabs(lw.w[v] - std::cos(lat)) < 1e-12);
        }
        CHECK(mx == doctest::Approx(lw.w[h / 2]).epsilon(1e-12));
    }
}

TEST_CASE("ws_psnr examples and invariances") {
    const ErpImage a = random_image(16, 32, 1);
    CHECK(std::isinf(ws_psnr(a, a)));

    // uniform error: the weights normalize out exactly
    ErpImage u1(8, 16, 0.3), u2(8, 16, 0.4);
    CHECK(ws_psnr(u1, u2) == doctest::Approx(20.0).epsilon(1e-9));

    // symmetric in its arguments
    const ErpImage c = random_image(16, 32, 2);
    CHECK(ws_psnr(a, c) == doctest::Approx(ws_psnr(c, a)).epsilon(1e-12));

    // top-row error is penalized less than the same error in a middle row
    ErpImage base(8, 16, 0.5), top = base, mid = base;
    for (int x = 0; x < 16; ++x) {
        top.at(0, 0, x) = 0.7;
        mid.at(0, 4, x) = 0.7;
    }
    CHECK(ws_psnr(base, top) > ws_psnr(base, mid));

    // invariant under joint horizontal rotation
    CHECK(ws_psnr(rotate_horizontal(a, 5), rotate_horizontal(c, 5)) ==
          doctest::Approx(ws_psnr(a, c)).epsilon(1e-12));

    ErpImage wrong(8, 8, 0.0);
    CHECK_THROWS_AS(ws_psnr(a, wrong), std::invalid_argument);
}

TEST_CASE("fov masks: angular examples") {
    const FovMask full = make_fov_mask(FovSpec::angular(360.0, 180.0), 32, 64);
    CHECK(full.all_known());

    const FovMask half = make_fov_mask(FovSpec::angular(180.0, 90.0), 64, 128);
    CHECK(half.known_count() == 64 * 32);
    for (int y = 16; y < 48; ++y)
        for (int x = 32; x < 96; ++x) CHECK(half.at(y, x));
    CHECK(!half.at(15, 64));
    CHECK(!half.at(32, 31));

    const FovMask quarter = make_fov_mask(FovSpec::angular(90.0, 90.0), 64, 128);
    CHECK(static_cast<double>(quarter.known_count()) / (64 * 128) == doctest::Approx(0.125));

    CHECK_THROWS_AS(make_fov_mask(FovSpec::angular(0.0, 90.0), 64, 128), std::invalid_argument);
    CHECK_THROWS_AS(make_fov_mask(FovSpec::angular(0.4, 0.4), 64, 128), std::invalid_argument);

    // yaw offset wraps the block across the seam
    const FovMask shifted = make_fov_mask(FovSpec::angular(180.0, 90.0, 180.0), 64, 128);
    CHECK(shifted.known_count() == 64 * 32);
    CHECK(shifted.at(32, 0));
    CHECK(shifted.at(32, 127));
    CHECK(!shifted.at(32, 64));
}

TEST_CASE("fov masks: perspective frustum footprint") {
    const FovMask m = make_fov_mask(FovSpec::perspective(90.0), 64, 128);
    // contains the center, bounded by the 90-degree angular box
    CHECK(m.at(32, 64));
    const FovMask box = make_fov_mask(FovSpec::angular(90.0, 90.0), 64, 128);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 128; ++x)
            if (m.at(y, x)) CHECK(box.at(y, x));
    CHECK(m.known_count() < box.known_count());
    CHECK(m.known_count() > 0);
    CHECK_THROWS_AS(make_fov_mask(FovSpec::perspective(180.0), 64, 128), std::invalid_argument);
}

TEST_CASE("apply_mask_gray") {
    const ErpImage img = random_image(16, 32, 3);
    const FovMask full = make_fov_mask(FovSpec::angular(360.0, 180.0), 16, 32);
    CHECK(max_abs_diff(apply_mask_gray(img, full), img) == 0.0);

    FovMask none = full;
    std::fill(none.known.begin(), none.known.end(), 0);
    const ErpImage gray = apply_mask_gray(img, none);
    for (double v : gray.v) CHECK(v == 0.5);

    const FovMask half = make_fov_mask(FovSpec::angular(180.0, 180.0), 16, 32);
    const ErpImage mixed = apply_mask_gray(img, half);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) {
                if (half.at(y, x))
                    CHECK(mixed.at(c, y, x) == img.at(c, y, x));
                else
                    CHECK(mixed.at(c, y, x) == 0.5);
            }
}

TEST_CASE("rotate_horizontal is cyclic and lossless") {
    const ErpImage img = random_image(8, 16, 4);
    CHECK(max_abs_diff(rotate_horizontal(img, 16), img) == 0.0);
    CHECK(max_abs_diff(rotate_horizontal(rotate_horizontal(img, 5), 11), img) == 0.0);
    CHECK(max_abs_diff(rotate_horizontal(img, -3), rotate_horizontal(img, 13)) == 0.0);
    // content moves toward larger x
    const ErpImage r = rotate_horizontal(img, 2);
    CHECK(r.at(0, 3, 5) == img.at(0, 3, 3));
}

TEST_CASE("cubemap: constant panorama, center ray, and round trip") {
    ErpImage flat(32, 64);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 64; ++x) {
            flat.at(0, y, x) = 0.25;
            flat.at(1, y, x) = 0.5;
            flat.at(2, y, x) = 0.75;
        }
    const CubemapFaces cm = erp_to_cubemap(flat, 16);
    for (int f = 0; f < 6; ++f)
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                CHECK(cm.faces[f].at(0, j, i) == doctest::Approx(0.25));
                CHECK(cm.faces[f].at(2, j, i) == doctest::Approx(0.75));
            }
    CHECK(cm.lateral_faces().size() == 4);
    CHECK_THROWS_AS(erp_to_cubemap(flat, 0), std::invalid_argument);

    // the front-face center ray hits yaw 0, pitch 0: the equator center
    ErpImage marked(64, 128, 0.0);
    for (int y = 31; y <= 32; ++y)
        for (int x = 63; x <= 64; ++x) marked.at(1, y, x) = 1.0;
    const CubemapFaces cm2 = erp_to_cubemap(marked, 33);  // odd size: exact center pixel
    CHECK(cm2.face(CubeFace::front).at(1, 16, 16) == doctest::Approx(1.0).epsilon(1e-9));

    // round trip PSNR floor (pinned from a reference run at H=128, face=H)
    const ErpImage pano = [&] {
        ErpImage p(128, 256);
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 256; ++x) {
                p.at(0, y, x) = 0.5 + 0.4 * std::sin(2.0 * kPi * x / 256.0);
                p.at(1, y, x) = static_cast<double>(y) / 127.0;
                p.at(2, y, x) = 0.5 + 0.3 * std::cos(4.0 * kPi * x / 256.0) * std::sin(kPi * y / 127.0);
            }
        return p;
    }();
    const ErpImage back = cubemap_to_erp(erp_to_cubemap(pano, 128), 128);
    CHECK(ws_psnr(pano, back) > 30.0);
}

TEST_CASE("cubemap lateral faces permute under 90-degree rotation") {
    const ErpImage img = random_image(32, 64, 5);
    const CubemapFaces a = erp_to_cubemap(img, 16);
    const CubemapFaces b = erp_to_cubemap(rotate_horizontal(img, 16), 16);  // +90 degrees
    // rotating the panorama by +90deg moves old front content to old right
    CHECK(max_abs_diff(b.face(CubeFace::right), a.face(CubeFace::front)) < 1e-6);
    CHECK(max_abs_diff(b.face(CubeFace::back), a.face(CubeFace::right)) < 1e-6);
    CHECK(max_abs_diff(b.face(CubeFace::left), a.face(CubeFace::back)) < 1e-6);
    CHECK(max_abs_diff(b.face(CubeFace::front), a.face(CubeFace::left)) < 1e-6);
}

TEST_CASE("perspective projection") {
    // constant panorama -> constant output
    ErpImage flat(32, 64, 0.6);
    const ErpImage p = erp_to_perspective(flat, 10.0, 5.0, 90.0, 24, 18);
    for (double v : p.v) CHECK(v == doctest::Approx(0.6));

    // yaw shift equals horizontal rotation of the source
    const ErpImage img = random_image(64, 128, 6);
    const double dyaw = 45.0;  // 16 pixels at W = 128
    const ErpImage a = erp_to_perspective(img, dyaw, 0.0, 70.0, 32, 32);
    const ErpImage b = erp_to_perspective(rotate_horizontal(img, -16), 0.0, 0.0, 70.0, 32, 32);
    CHECK(max_abs_diff(a, b) < 1e-6);

    // a 90-degree view from the red front hemisphere stays fully red
    ErpImage hemi(64, 128);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 128; ++x) {
            const bool front = x >= 32 && x < 96;
            hemi.at(0, y, x) = front ? 1.0 : 0.0;
            hemi.at(2, y, x) = front ? 0.0 : 1.0;
        }
    const ErpImage view = erp_to_perspective(hemi, 0.0, 0.0, 90.0, 32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(view.at(0, y, x) == doctest::Approx(1.0));
            CHECK(view.at(2, y, x) == doctest::Approx(0.0));
        }

    CHECK_THROWS_AS(erp_to_perspective(img, 0.0, 0.0, 0.0, 8, 8), std::invalid_argument);
    CHECK_THROWS_AS(erp_to_perspective(img, 0.0, 0.0, 180.0, 8, 8), std::invalid_argument);
}

TEST_CASE("mask, gray, rotate are exact on random property samples") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const int h = 8 * rng.uniform_int(1, 3);
        const ErpImage img = random_image(h, 2 * h, seed * 101);
        const double lon = rng.uniform(30.0, 360.0);
        const double lat = rng.uniform(30.0, 180.0);
        const double yaw = rng.uniform(-180.0, 180.0);
        const FovMask m = make_fov_mask(FovSpec::angular(lon, lat, yaw), h, 2 * h);
        const ErpImage g = apply_mask_gray(img, m);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < 2 * h; ++x)
                for (int c = 0; c < 3; ++c)
                    CHECK(g.at(c, y, x) == (m.at(y, x) ? img.at(c, y, x) : 0.5));
        const int s = rng.uniform_int(0, 4 * h);
        CHECK(max_abs_diff(rotate_horizontal(rotate_horizontal(img, s), 2 * h - (s % (2 * h))), img) ==
              0.0);
    }
}

TEST_CASE("image io round trips") {
    Rng rng(9);
    ErpImage img(8, 16);
    // quantization-exact values
    for (double& x : img.v) x = rng.uniform_int(0, 255) / 255.0;
    save_png(img, "io_test.png");
    CHECK(max_abs_diff(load_png("io_test.png"), img) < 1e-12);
    save_ppm(img, "io_test.ppm");
    CHECK(max_abs_diff(load_ppm("io_test.ppm"), img) < 1e-12);
    std::remove("io_test.png");
    std::remove("io_test.ppm");

    std::map<std::string, std::string> kv{{"spec", "angular:180x90@0"}, {"yaw", "12.5"}};
    save_sidecar("io_test.txt", kv);
    CHECK(load_sidecar("io_test.txt") == kv);
    std::remove("io_test.txt");

    // fov spec round trip
    const FovSpec s1 = FovSpec::angular(123.0, 45.0, -30.0);
    const FovSpec s2 = FovSpec::parse(s1.to_string());
    CHECK(s2.lon_deg == doctest::Approx(123.0));
    CHECK(s2.lat_deg == doctest::Approx(45.0));
    CHECK(s2.yaw_deg == doctest::Approx(-30.0));
    const FovSpec p1 = FovSpec::perspective(70.0, 15.0, -5.0);
    const FovSpec p2 = FovSpec::parse(p1.to_string());
    CHECK(p2.fov_deg == doctest::Approx(70.0));
    CHECK(p2.pitch_deg == doctest::Approx(-5.0));
}
