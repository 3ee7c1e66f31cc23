#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pano/erp.hpp"
#include "pano/metrics.hpp"
#include "pano/rng.hpp"

using namespace pano;
namespace ad = pano::ad;

namespace {

ErpImage random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    ErpImage img(h, w);
    for (double& x : img.v) x = rng.uniform01();
    return img;
}

Tensor random_tensor(const std::vector<int>& shape, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Tensor t(shape);
    for (double& x : t.v) x = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("feature extractor: frozen, seed-pinned, layer dims") {
    const ErpImage img = random_image(64, 128, 1);
    const FeaturePyramid p1 = FeatureExtractor::instance().extract(img);
    REQUIRE(p1.layers.size() == 3);
    CHECK(p1.layers[0].dim(1) == 64);
    CHECK(p1.layers[0].dim(2) == 128);
    CHECK(p1.layers[1].dim(1) == 32);
    CHECK(p1.layers[1].dim(2) == 64);
    CHECK(p1.layers[2].dim(1) == 16);
    CHECK(p1.layers[2].dim(2) == 32);
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(p1.channel_weights[l].size() == static_cast<std::size_t>(p1.layers[l].dim(0)));
        for (double w : p1.channel_weights[l])
            CHECK(w == doctest::Approx(1.0 / std::sqrt(static_cast<double>(p1.layers[l].dim(0)))));
    }

    // identical inputs give identical pyramids, across repeated extraction
    const FeaturePyramid p2 = FeatureExtractor::instance().extract(img);
    for (std::size_t l = 0; l < 3; ++l) CHECK(p1.layers[l].v == p2.layers[l].v);

    ErpImage odd(30, 60, 0.5);
    CHECK_THROWS_AS(FeatureExtractor::instance().extract(odd), std::invalid_argument);
}

TEST_CASE("perceptual loss: zero, symmetry, closed form") {
    const ErpImage a = random_image(16, 32, 2);
    const ErpImage b = random_image(16, 32, 3);
    CHECK(perceptual_loss(a, a) == 0.0);
    CHECK(perceptual_loss(a, b) == doctest::Approx(perceptual_loss(b, a)).epsilon(1e-12));
    CHECK(perceptual_loss(a, b) > 0.0);

    // single-layer identity pyramid with uniform difference d: loss = C d^2
    // with unit channel weights folded as 1/sqrt(C) the per-position term is
    // mean_c d^2 = d^2, so the total equals d^2
    const int c = 4;
    Tensor fa({1, c, 3, 5}, 0.0), fb({1, c, 3, 5}, 0.25);
    ad::NoGrad ng;
    const double loss =
        perceptual_from_pyramids({ad::constant(fa)}, {ad::constant(fb)})->val.item();
    CHECK(loss == doctest::Approx(0.25 * 0.25).epsilon(1e-12));
}

TEST_CASE("ws perceptual loss: zero, degenerate equality, latitude ordering") {
    const ErpImage a = random_image(16, 32, 4);
    const ErpImage b = random_image(16, 32, 5);
    CHECK(ws_perceptual_loss(a, a) == 0.0);
    CHECK(ws_perceptual_loss(a, b) > 0.0);

    // H_l = 1: the single latitude weight is cos(0) = 1 and the normalizer
    // collapses to W_l, so both losses agree exactly
    ad::NoGrad ng;
    Tensor fa = random_tensor({1, 3, 1, 7}, 6);
    Tensor fb = random_tensor({1, 3, 1, 7}, 7);
    const double pl = perceptual_from_pyramids({ad::constant(fa)}, {ad::constant(fb)})->val.item();
    const double wl =
        ws_perceptual_from_pyramids({ad::constant(fa)}, {ad::constant(fb)})->val.item();
    CHECK(wl == pl);

    // forcing unit row weights recovers the plain loss at general H_l
    Tensor ga = random_tensor({1, 2, 6, 10}, 8);
    Tensor gb = random_tensor({1, 2, 6, 10}, 9);
    const std::vector<std::vector<double>> unit_rows{{std::vector<double>(6, 1.0)}};
    const double plain =
        perceptual_from_pyramids({ad::constant(ga)}, {ad::constant(gb)})->val.item();
    const double forced = ws_perceptual_from_pyramids({ad::constant(ga)}, {ad::constant(gb)},
                                                      &unit_rows)
                              ->val.item();
    CHECK(forced == doctest::Approx(plain).epsilon(1e-12));

    // error near the poles scores lower than the same error at the center
    ErpImage base(16, 32, 0.5), top = base, mid = base;
    for (int x = 0; x < 32; ++x)
        for (int c = 0; c < 3; ++c) {
            top.at(c, 0, x) = 0.9;
            top.at(c, 1, x) = 0.9;
            mid.at(c, 7, x) = 0.9;
            mid.at(c, 8, x) = 0.9;
        }
    CHECK(ws_perceptual_loss(base, top) < ws_perceptual_loss(base, mid));
}

TEST_CASE("ws perceptual loss differentiates") {
    ad::Var a = ad::make_var(random_tensor({1, 3, 8, 16}, 10, 0.2), true);
    ad::Var b = ad::constant(random_tensor({1, 3, 8, 16}, 11, 0.2));
    auto f = [&](const std::vector<ad::Var>& in) { return ws_perceptual_loss(in[0], b); };
    CHECK(ad::grad_check("ws_perceptual", f, {a}) < 1e-4);
}

TEST_CASE("ws_l1 loss: examples") {
    const ErpImage a = random_image(8, 16, 12);
    CHECK(ws_l1_loss(a, a) == 0.0);

    ErpImage u1(8, 16, 0.3), u2(8, 16, 0.4);
    CHECK(ws_l1_loss(u1, u2) == doctest::Approx(0.1).epsilon(1e-9));

    ErpImage base(16, 32, 0.5), top = base, mid = base;
    for (int x = 0; x < 32; ++x) {
        top.at(0, 0, x) = 0.8;
        mid.at(0, 8, x) = 0.8;
    }
    CHECK(ws_l1_loss(base, top) < ws_l1_loss(base, mid));
}

TEST_CASE("frechet distance: closed forms and errors") {
    // identical stats
    FeatureStats s = FeatureStats::from_moments({0.5, -0.2}, {1.0, 0.1, 0.1, 2.0});
    CHECK(frechet_distance(s, s) == doctest::Approx(0.0).epsilon(1e-8));

    // 1-D closed form (mu1-mu2)^2 + (s1-s2)^2
    FeatureStats a = FeatureStats::from_moments({0.0}, {1.0});
    FeatureStats b = FeatureStats::from_moments({1.0}, {1.0});
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-10));
    FeatureStats c = FeatureStats::from_moments({0.0}, {4.0});
    CHECK(frechet_distance(a, c) == doctest::Approx(1.0).epsilon(1e-10));

    // symmetry
    CHECK(frechet_distance(a, c) == doctest::Approx(frechet_distance(c, a)).epsilon(1e-12));

    // randomized 1-D agreement with the closed form
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const double m1 = rng.normal(), m2 = rng.normal();
        const double v1 = 0.1 + rng.uniform01() * 3.0, v2 = 0.1 + rng.uniform01() * 3.0;
        FeatureStats x = FeatureStats::from_moments({m1}, {v1});
        FeatureStats y = FeatureStats::from_moments({m2}, {v2});
        const double expect = (m1 - m2) * (m1 - m2) +
                              (std::sqrt(v1) - std::sqrt(v2)) * (std::sqrt(v1) - std::sqrt(v2));
        CHECK(std::fabs(frechet_distance(x, y) - expect) < 1e-10);
    }

    FeatureStats wrong_dim = FeatureStats::from_moments({0.0, 0.0}, {1.0, 0.0, 0.0, 1.0});
    CHECK_THROWS_AS(frechet_distance(a, wrong_dim), std::invalid_argument);
    FeatureStats neg = FeatureStats::from_moments({0.0}, {-0.5});
    CHECK_THROWS_AS(frechet_distance(a, neg), std::invalid_argument);
}

TEST_CASE("feature accumulator matches direct moments") {
    Rng rng(17);
    FeatureAccumulator acc(3);
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> x{rng.normal(), rng.normal() * 2.0, rng.uniform01()};
        xs.push_back(x);
        acc.add(x);
    }
    const FeatureStats s = acc.finalize();
    CHECK(s.count == 40);
    for (int d = 0; d < 3; ++d) {
        double mu = 0.0;
        for (const auto& x : xs) mu += x[d];
        mu /= 40.0;
        CHECK(s.mu[d] == doctest::Approx(mu).epsilon(1e-10));
    }
    // covariance is symmetric PSD within tolerance
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(s.cov[i * 3 + j] == doctest::Approx(s.cov[j * 3 + i]));

    FeatureAccumulator tiny(2);
    tiny.add({0.0, 0.0});
    CHECK_THROWS_AS(tiny.finalize(), std::invalid_argument);
}

TEST_CASE("diversity score") {
    const ErpImage a = random_image(16, 32, 20);
    const ErpImage b = random_image(16, 32, 21);
    const ErpImage c = random_image(16, 32, 22);

    CHECK(diversity_score({a, a, a}) == 0.0);
    CHECK(diversity_score({a, b}) == doctest::Approx(perceptual_loss(a, b)).epsilon(1e-12));
    CHECK(diversity_score({a, b, c}) == doctest::Approx(diversity_score({c, a, b})).epsilon(1e-12));
    CHECK_THROWS_AS(diversity_score({a}), std::invalid_argument);
}

TEST_CASE("seam discontinuity") {
    ErpImage flat(8, 16, 0.37);
    CHECK(seam_discontinuity(flat) == doctest::Approx(0.0));

    // left column 0, right column 1, interior 0: seam term 1 minus the
    // single interior edge 1/(W-1)
    ErpImage step(8, 16, 0.0);
    for (int y = 0; y < 8; ++y)
        for (int c = 0; c < 3; ++c) step.at(c, y, 15) = 1.0;
    CHECK(seam_discontinuity(step) == doctest::Approx(1.0 - 1.0 / 15.0).epsilon(1e-12));

    // rotation moves the seam elsewhere
    const ErpImage rot = rotate_horizontal(step, 8);
    CHECK(seam_discontinuity(rot) < seam_discontinuity(step));

    ErpImage one_col(4, 1, 0.0);
    CHECK_THROWS_AS(seam_discontinuity(one_col), std::invalid_argument);
}
