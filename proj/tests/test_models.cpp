#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pano/models.hpp"
#include "pano/rng.hpp"
#include "pano/synth.hpp"

using namespace pano;
namespace ad = pano::ad;

namespace {

std::vector<ErpImage> constant_panoramas(int h) {
    std::vector<ErpImage> out;
    const double colors[4][3] = {{0.2, 0.3, 0.8}, {0.8, 0.2, 0.2}, {0.3, 0.7, 0.3}, {0.7, 0.7, 0.2}};
    for (const auto& c : colors) {
        ErpImage img(h, 2 * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < 2 * h; ++x)
                for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = c[ch];
        out.push_back(std::move(img));
    }
    return out;
}

VqganConfig tiny_vqgan_cfg() {
    VqganConfig c;
    c.ch1 = 8;
    c.ch2 = 12;
    c.ch3 = 16;
    c.codebook_entries = 16;
    c.codebook_dim = 8;
    return c;
}

double l1_error(const ErpImage& a, const ErpImage& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) acc += std::fabs(a.v[i] - b.v[i]);
    return acc / a.v.size();
}

}  // namespace

TEST_CASE("encoder/decoder dimension contract") {
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 1);
    for (int h : {16, 24, 32}) {
        ErpImage img(h, 2 * h, 0.4);
        const Tensor f = encode_features(m, img);
        CHECK(f.dim(0) == 8);
        CHECK(f.dim(1) == h / 8);
        CHECK(f.dim(2) == 2 * h / 8);
        const TokenGrid g = encode_to_grid(m, img);
        CHECK(g.h == h / 8);
        CHECK(g.w == 2 * h / 8);
        const ErpImage back = decode_grid(m, g);
        CHECK(back.h == h);
        CHECK(back.w == 2 * h);
    }
    ErpImage odd(20, 40, 0.5);
    CHECK_THROWS_AS(encode_features(m, odd), std::invalid_argument);
}

TEST_CASE("loss assembly equals the weighted sum of its terms") {
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 2);
    Discriminator d = make_discriminator(3);
    Rng rng(4);
    Tensor input({2, 3, 16, 32});
    for (double& x : input.v) x = rng.uniform01();
    Tensor target = input;

    LossWeights w;
    w.gan = 0.37;
    w.l1 = 1.3;
    w.vq = 0.71;
    w.ws_perc = 0.9;
    const GeneratorLossTerms terms = vqgan_generator_loss(m, d, ad::constant(input),
                                                          ad::constant(target), w,
                                                          PerceptualMode::ws_perceptual);
    const double expect = w.gan * terms.gan + w.l1 * terms.l1 + w.vq * terms.vq + w.ws_perc * terms.perc;
    CHECK(std::fabs(terms.total->val.item() - expect) < 1e-10);
    CHECK(terms.gan_weight == w.gan);

    // plain-perceptual and ws-l1 arms assemble with their own weight
    LossWeights w2 = w;
    w2.perc = 0.45;
    const GeneratorLossTerms t2 = vqgan_generator_loss(m, d, ad::constant(input),
                                                       ad::constant(target), w2,
                                                       PerceptualMode::plain_perceptual);
    CHECK(std::fabs(t2.total->val.item() -
                    (w2.gan * t2.gan + w2.l1 * t2.l1 + w2.vq * t2.vq + w2.perc * t2.perc)) < 1e-10);
}

TEST_CASE("adaptive gan weight is the gradient-norm ratio") {
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 5);
    Discriminator d = make_discriminator(6);
    Rng rng(7);
    Tensor input({1, 3, 16, 32});
    for (double& x : input.v) x = rng.uniform01();
    LossWeights w;
    w.adaptive_gan = true;
    const GeneratorLossTerms terms = vqgan_generator_loss(m, d, ad::constant(input),
                                                          ad::constant(input), w,
                                                          PerceptualMode::ws_perceptual);
    CHECK(terms.gan_weight > 0.0);
    CHECK(terms.gan_weight != w.gan);
}

TEST_CASE("every trainable parameter receives gradient on one batch") {
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 8);
    Discriminator d = make_discriminator(9);
    Rng rng(10);
    Tensor input({2, 3, 16, 32});
    for (double& x : input.v) x = rng.uniform01();
    Tensor target({2, 3, 16, 32});
    for (double& x : target.v) x = rng.uniform01();

    LossWeights w;
    m.params.zero_grads();
    d.params.zero_grads();
    const GeneratorLossTerms terms = vqgan_generator_loss(m, d, ad::constant(input),
                                                          ad::constant(target), w,
                                                          PerceptualMode::ws_perceptual);
    ad::backward(terms.total);
    for (const auto& [name, p] : m.params.all()) {
        p->ensure_grad();
        double norm = 0.0;
        for (double g : p->grad.v) norm += std::fabs(g);
        CHECK_MESSAGE(norm > 0.0, "dead parameter: ", name);
    }

    // discriminator parameters through its own loss
    d.params.zero_grads();
    ad::Var fake = ad::constant(target);
    ad::Var dloss = ad::add(ad::mean(ad::softplus(ad::neg(discriminate(d, ad::constant(input))))),
                            ad::mean(ad::softplus(discriminate(d, fake))));
    ad::backward(dloss);
    for (const auto& [name, p] : d.params.all()) {
        p->ensure_grad();
        double norm = 0.0;
        for (double g : p->grad.v) norm += std::fabs(g);
        CHECK_MESSAGE(norm > 0.0, "dead parameter: ", name);
    }
}

TEST_CASE("discriminator output is patch-level") {
    Discriminator d = make_discriminator(11);
    ad::NoGrad ng;
    ad::Var logits = discriminate(d, ad::constant(Tensor({1, 3, 32, 64}, 0.5)));
    CHECK(logits->val.dim(1) == 1);
    CHECK(logits->val.dim(2) > 1);  // a map, not a single scalar
    CHECK(logits->val.dim(3) > 1);
}

TEST_CASE("train_vqgan: reconstruction floor on constant panoramas") {
    std::vector<ErpImage> data = constant_panoramas(16);
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 12);
    Discriminator d = make_discriminator(13);
    LossWeights w;
    w.gan = 0.0;
    w.vq = 0.0;
    VqganTrainConfig cfg;
    cfg.steps = 500;
    cfg.batch = 2;
    cfg.seed = 14;
    cfg.adam.lr = 2e-3;
    cfg.rotate_augment = false;
    const TrainCurve curve = train_vqgan(m, d, data, w, cfg);
    CHECK(curve.final_loss < curve.initial_loss);
    double err = 0.0;
    for (const ErpImage& img : data) err += l1_error(reconstruct(m, img), img);
    CHECK(err / data.size() < 0.05);
}

TEST_CASE("train_vqgan: fixed seed reproduces the checkpoint bit for bit") {
    auto run = [] {
        std::vector<ErpImage> data = constant_panoramas(16);
        AutoencoderModel m = make_vqgan(VqganVariant::masked_input, tiny_vqgan_cfg(), 21);
        Discriminator d = make_discriminator(22);
        LossWeights w;
        VqganTrainConfig cfg;
        cfg.steps = 12;
        cfg.batch = 2;
        cfg.seed = 23;
        train_vqgan(m, d, data, w, cfg);
        return m.params.snapshot();
    };
    const auto a = run();
    const auto b = run();
    for (const auto& [name, t] : a) CHECK(t.v == b.at(name).v);
}

TEST_CASE("train_vqgan: empty dataset and zero steps") {
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 24);
    Discriminator d = make_discriminator(25);
    LossWeights w;
    VqganTrainConfig cfg;
    CHECK_THROWS_AS(train_vqgan(m, d, {}, w, cfg), std::invalid_argument);

    const auto before = m.params.snapshot();
    cfg.steps = 0;
    train_vqgan(m, d, constant_panoramas(16), w, cfg);
    for (const auto& [name, t] : m.params.snapshot()) CHECK(t.v == before.at(name).v);
}

TEST_CASE("make_adjust_training_pair: degenerate pipeline and hints") {
    Rng rng(31);
    ErpImage gt(16, 32);
    for (double& x : gt.v) x = rng.uniform01();

    // identity reconstruction stub, jitter off, scale 1: input == target
    JitterConfig nojit;
    nojit.enabled = false;
    ScaleConfig noscale;
    noscale.factors = {1};
    HintConfig hint;
    const ReconFn identity = [](const ErpImage& img) { return img; };
    const AdjustPair p = make_adjust_training_pair(gt, identity, nojit, noscale, hint, 7);
    CHECK(max_abs_diff(p.input, p.target) == 0.0);
    CHECK(max_abs_diff(p.target, gt) == 0.0);

    // hint pixels equal gt even when the reconstruction degrades everything
    const ReconFn darken = [](const ErpImage& img) {
        ErpImage out = img;
        for (double& x : out.v) x *= 0.3;
        return out;
    };
    JitterConfig jit;
    ScaleConfig scales;  // {1,2}
    const AdjustPair p2 = make_adjust_training_pair(gt, darken, jit, scales, hint, 8);
    std::int64_t hint_count = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 32; ++x)
            if (p2.hint_known[static_cast<std::size_t>(y) * 32 + x]) {
                ++hint_count;
                for (int c = 0; c < 3; ++c) CHECK(p2.input.at(c, y, x) == gt.at(c, y, x));
            }
    const double frac = static_cast<double>(hint_count) / (16.0 * 32.0);
    CHECK(frac >= 0.2);
    CHECK(frac <= 0.6);

    // deterministic per seed
    const AdjustPair p3 = make_adjust_training_pair(gt, darken, jit, scales, hint, 8);
    CHECK(p2.input.v == p3.input.v);
    CHECK(p2.hint_known == p3.hint_known);

    // the scale-2 branch is measurably blurrier than the target
    ScaleConfig two;
    two.factors = {2};
    HintConfig nohint;
    nohint.area_lo = nohint.area_hi = 0.0;
    ErpImage textured(16, 32);
    Rng trng(33);
    for (double& x : textured.v) x = trng.uniform01();
    AdjustPair p4 = make_adjust_training_pair(textured, identity, nojit, two, nohint, 9);
    CHECK(laplacian_variance(p4.input) < laplacian_variance(p4.target));
}

TEST_CASE("adjust: recomposition, resolution transfer, padding") {
    AdjustModel m = make_adjust_model(41);
    Rng rng(42);
    ErpImage completed(16, 32), original(16, 32);
    for (double& x : completed.v) x = rng.uniform01();
    for (double& x : original.v) x = rng.uniform01();

    // all-known mask: output equals the original exactly
    const FovMask all = make_fov_mask(FovSpec::angular(360.0, 180.0), 16, 32);
    CHECK(max_abs_diff(adjust(m, completed, original, all), original) == 0.0);

    // known region is bit-preserved under a partial mask
    const FovMask half = make_fov_mask(FovSpec::angular(180.0, 90.0), 16, 32);
    const ErpImage out = adjust(m, completed, original, half);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 32; ++x)
            if (half.at(y, x))
                for (int c = 0; c < 3; ++c) CHECK(out.at(c, y, x) == original.at(c, y, x));

    // fully convolutional: double resolution without retraining
    ErpImage big_c(32, 64, 0.5), big_o(32, 64, 0.6);
    const FovMask big_m = make_fov_mask(FovSpec::angular(180.0, 90.0), 32, 64);
    const ErpImage big_out = adjust(m, big_c, big_o, big_m);
    CHECK(big_out.h == 32);
    CHECK(big_out.w == 64);

    // dims not divisible by the stride go through reflect-pad and crop back
    ErpImage odd_c(18, 34, 0.5), odd_o(18, 34, 0.3);
    FovMask odd_m = make_fov_mask(FovSpec::angular(180.0, 90.0), 18, 34);
    const ErpImage odd_out = adjust(m, odd_c, odd_o, odd_m);
    CHECK(odd_out.h == 18);
    CHECK(odd_out.w == 34);

    ErpImage mismatched(16, 30, 0.0);
    CHECK_THROWS_AS(adjust(m, completed, mismatched, half), std::invalid_argument);
}

TEST_CASE("train_adjustment: direction, determinism, zero steps") {
    // synthetic pair generator: the input is a color-shifted target and the
    // hint column carries the truth
    auto pair_gen = [](std::uint64_t index) {
        Rng rng(1000 + index);
        ErpImage target(16, 32);
        for (double& x : target.v) x = rng.uniform01() * 0.5 + 0.25;
        ErpImage input = target;
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 32; ++x) {
                input.at(0, y, x) = std::min(1.0, input.at(0, y, x) + 0.15);
                input.at(2, y, x) = std::max(0.0, input.at(2, y, x) - 0.15);
            }
        AdjustPair p;
        p.hint_known.assign(16 * 32, 0);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 8; ++x) {
                p.hint_known[static_cast<std::size_t>(y) * 32 + x] = 1;
                for (int c = 0; c < 3; ++c) input.at(c, y, x) = target.at(c, y, x);
            }
        p.input = input;
        p.target = target;
        return p;
    };

    AdjustModel m = make_adjust_model(51);
    Discriminator d = make_discriminator(52);
    LossWeights w;
    w.gan = 0.0;
    AdjustTrainConfig cfg;
    cfg.steps = 0;
    const auto before = m.params.snapshot();
    train_adjustment(m, d, pair_gen, w, cfg);
    for (const auto& [name, t] : m.params.snapshot()) CHECK(t.v == before.at(name).v);

    cfg.steps = 150;
    cfg.batch = 2;
    cfg.seed = 53;
    cfg.adam.lr = 2e-3;
    const TrainCurve curve = train_adjustment(m, d, pair_gen, w, cfg);
    CHECK(curve.final_loss < curve.initial_loss);

    // held-out pairs: the trained net moves the input toward the target
    double raw = 0.0, adj = 0.0;
    for (std::uint64_t i = 900; i < 910; ++i) {
        const AdjustPair p = pair_gen(i);
        const ErpImage out = adjust_raw(m, p.input, apply_mask_gray(p.target, [&] {
                                            FovMask fm;
                                            fm.h = 16;
                                            fm.w = 32;
                                            fm.known = p.hint_known;
                                            fm.spec = FovSpec::angular(90.0, 180.0, -135.0);
                                            return fm;
                                        }()),
                                        p.hint_known);
        raw += l1_error(p.input, p.target);
        adj += l1_error(out, p.target);
    }
    CHECK(adj < raw);

    // determinism
    auto run = [&] {
        AdjustModel mm = make_adjust_model(51);
        Discriminator dd = make_discriminator(52);
        AdjustTrainConfig c2 = cfg;
        c2.steps = 10;
        train_adjustment(mm, dd, pair_gen, w, c2);
        return mm.params.snapshot();
    };
    const auto s1 = run();
    const auto s2 = run();
    for (const auto& [name, t] : s1) CHECK(t.v == s2.at(name).v);
}

TEST_CASE("train_vqgan divergence guard") {
    std::vector<ErpImage> data = constant_panoramas(16);
    AutoencoderModel m = make_vqgan(VqganVariant::full_image, tiny_vqgan_cfg(), 61);
    Discriminator d = make_discriminator(62);
    LossWeights w;
    VqganTrainConfig cfg;
    cfg.steps = 400;
    cfg.seed = 63;
    cfg.adam.lr = 40.0;  // guaranteed blow-up
    cfg.divergence_factor = 10.0;
    CHECK_THROWS_WITH_AS(train_vqgan(m, d, data, w, cfg), doctest::Contains("diverged"),
                         std::runtime_error);
}
