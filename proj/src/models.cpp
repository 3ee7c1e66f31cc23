#include "pano/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pano/rng.hpp"

namespace pano {

// ---------------------------------------------------------------------------
// vqgan
// ---------------------------------------------------------------------------

AutoencoderModel make_vqgan(VqganVariant variant, const VqganConfig& cfg, std::uint64_t seed) {
    AutoencoderModel m;
    m.variant = variant;
    m.cfg = cfg;
    Rng rng(seed);
    auto conv = [&](const std::string& name, int oc, int ic) {
        m.params.add(name + ".w", init_conv(oc, ic, 3, 3, rng));
        m.params.add(name + ".b", init_zeros({oc}));
    };
    conv("enc.c1", cfg.ch1, 3);
    conv("enc.c2", cfg.ch2, cfg.ch1);
    conv("enc.c3", cfg.ch3, cfg.ch2);
    conv("enc.out", cfg.codebook_dim, cfg.ch3);
    conv("dec.in", cfg.ch3, cfg.codebook_dim);
    conv("dec.c1", cfg.ch2, cfg.ch3);
    conv("dec.c2", cfg.ch1, cfg.ch2);
    conv("dec.c3", cfg.ch1, cfg.ch1);
    conv("dec.out", 3, cfg.ch1);
    ad::Var embed = m.params.add(
        "codebook", init_normal({cfg.codebook_entries, cfg.codebook_dim},
                                1.0 / std::sqrt(static_cast<double>(cfg.codebook_dim)), rng));
    m.cb = make_codebook(cfg.codebook_entries, cfg.codebook_dim, embed);
    return m;
}

namespace {

ad::Var conv_layer(const ParameterSet& ps, const std::string& name, const ad::Var& x, int stride,
                   ad::PadMode pad) {
    return ad::conv2d(x, ps.get(name + ".w"), ps.get(name + ".b"), stride, 1, pad);
}

}  // namespace

ad::Var vqgan_encode(const AutoencoderModel& m, const ad::Var& img) {
    const Tensor& t = img->val;
    if (t.rank() != 4 || t.dim(1) != 3) throw std::invalid_argument("vqgan_encode: expects (N,3,H,W)");
    if (t.dim(2) % 8 != 0 || t.dim(3) % 8 != 0)
        throw std::invalid_argument("vqgan_encode: dims must be divisible by 8, got " +
                                    shape_str(t.shape));
    ad::Var x = ad::silu(conv_layer(m.params, "enc.c1", img, 2, ad::PadMode::zero));
    x = ad::silu(conv_layer(m.params, "enc.c2", x, 2, ad::PadMode::zero));
    x = ad::silu(conv_layer(m.params, "enc.c3", x, 2, ad::PadMode::zero));
    return conv_layer(m.params, "enc.out", x, 1, ad::PadMode::zero);
}

ad::Var vqgan_decode(const AutoencoderModel& m, const ad::Var& feats, ad::PadMode pad) {
    const Tensor& t = feats->val;
    if (t.rank() != 4 || t.dim(1) != m.cfg.codebook_dim)
        throw std::invalid_argument("vqgan_decode: feature shape mismatch");
    ad::Var x = ad::silu(conv_layer(m.params, "dec.in", feats, 1, pad));
    x = ad::silu(conv_layer(m.params, "dec.c1", ad::upsample2x(x), 1, pad));
    x = ad::silu(conv_layer(m.params, "dec.c2", ad::upsample2x(x), 1, pad));
    x = ad::silu(conv_layer(m.params, "dec.c3", ad::upsample2x(x), 1, pad));
    return conv_layer(m.params, "dec.out", x, 1, pad);
}

Tensor encode_features(const AutoencoderModel& m, const ErpImage& img) {
    ad::NoGrad ng;
    ad::Var f = vqgan_encode(m, ad::constant(image_to_tensor(img)));
    Tensor out({f->val.dim(1), f->val.dim(2), f->val.dim(3)});
    out.v = f->val.v;
    return out;
}

TokenGrid encode_to_grid(const AutoencoderModel& m, const ErpImage& img) {
    return quantize_plain(encode_features(m, img), m.cb);
}

ErpImage decode_grid(const AutoencoderModel& m, const TokenGrid& grid, ad::PadMode pad) {
    ad::NoGrad ng;
    Tensor feats = dequantize(grid, m.cb);
    Tensor batched({1, feats.dim(0), feats.dim(1), feats.dim(2)});
    batched.v = feats.v;
    return tensor_to_image(vqgan_decode(m, ad::constant(std::move(batched)), pad)->val);
}

ErpImage reconstruct(const AutoencoderModel& m, const ErpImage& img, ad::PadMode pad) {
    return decode_grid(m, encode_to_grid(m, img), pad);
}

// ---------------------------------------------------------------------------
// discriminator
// ---------------------------------------------------------------------------

Discriminator make_discriminator(std::uint64_t seed) {
    Discriminator d;
    Rng rng(seed);
    d.params.add("d.c1.w", init_conv(12, 3, 3, 3, rng));
    d.params.add("d.c1.b", init_zeros({12}));
    d.params.add("d.c2.w", init_conv(20, 12, 3, 3, rng));
    d.params.add("d.c2.b", init_zeros({20}));
    d.params.add("d.out.w", init_conv(1, 20, 3, 3, rng));
    d.params.add("d.out.b", init_zeros({1}));
    return d;
}

ad::Var discriminate(const Discriminator& d, const ad::Var& img) {
    ad::Var x = ad::silu(conv_layer(d.params, "d.c1", img, 2, ad::PadMode::zero));
    x = ad::silu(conv_layer(d.params, "d.c2", x, 2, ad::PadMode::zero));
    return conv_layer(d.params, "d.out", x, 1, ad::PadMode::zero);
}

// ---------------------------------------------------------------------------
// adjustment net
// ---------------------------------------------------------------------------

AdjustModel make_adjust_model(std::uint64_t seed, bool use_mask_channel) {
    AdjustModel m;
    m.use_mask_channel = use_mask_channel;
    Rng rng(seed);
    const int in_ch = use_mask_channel ? 7 : 6;
    auto conv = [&](const std::string& name, int oc, int ic) {
        m.params.add(name + ".w", init_conv(oc, ic, 3, 3, rng));
        m.params.add(name + ".b", init_zeros({oc}));
    };
    conv("adj.e1", 16, in_ch);
    conv("adj.e2", 24, 16);
    conv("adj.e3", 32, 24);
    conv("adj.d2", 24, 32 + 24);
    conv("adj.d1", 16, 24 + 16);
    conv("adj.out", 3, 16);
    return m;
}

namespace {

// U-net forward; returns completed + learned correction
ad::Var adjust_forward(const AdjustModel& m, const ad::Var& input, const ad::Var& completed) {
    const ParameterSet& ps = m.params;
    ad::Var e1 = ad::silu(conv_layer(ps, "adj.e1", input, 1, ad::PadMode::zero));
    ad::Var e2 = ad::silu(conv_layer(ps, "adj.e2", e1, 2, ad::PadMode::zero));
    ad::Var e3 = ad::silu(conv_layer(ps, "adj.e3", e2, 2, ad::PadMode::zero));
    ad::Var d2 = ad::silu(conv_layer(ps, "adj.d2", ad::concat_ch({ad::upsample2x(e3), e2}), 1,
                                     ad::PadMode::zero));
    ad::Var d1 = ad::silu(conv_layer(ps, "adj.d1", ad::concat_ch({ad::upsample2x(d2), e1}), 1,
                                     ad::PadMode::zero));
    return ad::add(conv_layer(ps, "adj.out", d1, 1, ad::PadMode::zero), completed);
}

Tensor mask_channel_tensor(const std::vector<std::uint8_t>& known, int h, int w) {
    Tensor t({1, 1, h, w});
    for (std::size_t i = 0; i < known.size(); ++i) t.v[i] = known[i] ? 1.0 : 0.0;
    return t;
}

ErpImage pad_reflect_to_multiple(const ErpImage& img, int mult, int& orig_h, int& orig_w) {
    orig_h = img.h;
    orig_w = img.w;
    const int ph = (mult - img.h % mult) % mult;
    const int pw = (mult - img.w % mult) % mult;
    if (ph == 0 && pw == 0) return img;
    ErpImage out(img.h + ph, img.w + pw);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                const int sy = y < img.h ? y : 2 * img.h - 2 - y;
                const int sx = x < img.w ? x : 2 * img.w - 2 - x;
                out.at(c, y, x) = img.at(c, sy, sx);
            }
    return out;
}

}  // namespace

ErpImage adjust_raw(const AdjustModel& m, const ErpImage& completed, const ErpImage& original,
                    const std::vector<std::uint8_t>& known) {
    if (!completed.same_dims(original))
        throw std::invalid_argument("adjust: completed/original dimension mismatch");
    if (known.size() != static_cast<std::size_t>(completed.h) * completed.w)
        throw std::invalid_argument("adjust: mask size mismatch");
    ad::NoGrad ng;

    int oh = 0, ow = 0;
    ErpImage comp_p = pad_reflect_to_multiple(completed, AdjustModel::down_factor, oh, ow);
    int dummy_h = 0, dummy_w = 0;
    ErpImage orig_p = pad_reflect_to_multiple(original, AdjustModel::down_factor, dummy_h, dummy_w);
    std::vector<std::uint8_t> known_p;
    if (comp_p.h == completed.h && comp_p.w == completed.w) {
        known_p = known;
    } else {
        known_p.assign(static_cast<std::size_t>(comp_p.h) * comp_p.w, 0);
        for (int y = 0; y < comp_p.h; ++y)
            for (int x = 0; x < comp_p.w; ++x) {
                const int sy = y < completed.h ? y : 2 * completed.h - 2 - y;
                const int sx = x < completed.w ? x : 2 * completed.w - 2 - x;
                known_p[static_cast<std::size_t>(y) * comp_p.w + x] =
                    known[static_cast<std::size_t>(sy) * completed.w + sx];
            }
    }

    ad::Var comp_v = ad::constant(image_to_tensor(comp_p));
    std::vector<ad::Var> channels{comp_v, ad::constant(image_to_tensor(orig_p))};
    if (m.use_mask_channel)
        channels.push_back(ad::constant(mask_channel_tensor(known_p, comp_p.h, comp_p.w)));
    ErpImage out_p = tensor_to_image(adjust_forward(m, ad::concat_ch(channels), comp_v)->val);
    if (out_p.h == oh && out_p.w == ow) return out_p;
    return crop(out_p, 0, 0, oh, ow, false);
}

ErpImage adjust(const AdjustModel& m, const ErpImage& completed_upscaled,
                const ErpImage& original_input, const FovMask& mask) {
    if (completed_upscaled.h != mask.h || completed_upscaled.w != mask.w)
        throw std::invalid_argument("adjust: mask dimension mismatch");
    ErpImage out = adjust_raw(m, completed_upscaled, original_input, mask.known);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            if (mask.at(y, x))
                for (int c = 0; c < 3; ++c) out.at(c, y, x) = original_input.at(c, y, x);
    return out;
}

// ---------------------------------------------------------------------------
// gan losses
// ---------------------------------------------------------------------------

namespace {

// non-saturating generator objective: mean softplus(-D(fake))
ad::Var gan_generator_term(const Discriminator& d, const ad::Var& fake) {
    return ad::mean(ad::softplus(ad::neg(discriminate(d, fake))));
}

ad::Var gan_discriminator_loss(const Discriminator& d, const ad::Var& real, const ad::Var& fake_detached) {
    ad::Var real_term = ad::mean(ad::softplus(ad::neg(discriminate(d, real))));
    ad::Var fake_term = ad::mean(ad::softplus(discriminate(d, fake_detached)));
    return ad::add(real_term, fake_term);
}

double grad_norm(const ad::Var& p) {
    double acc = 0.0;
    for (double g : p->grad.v) acc += g * g;
    return std::sqrt(acc);
}

ad::Var perceptual_term(PerceptualMode mode, const ad::Var& recon, const ad::Var& target) {
    switch (mode) {
        case PerceptualMode::ws_perceptual: return ws_perceptual_loss(recon, target);
        case PerceptualMode::plain_perceptual: return perceptual_loss(recon, target);
        case PerceptualMode::ws_l1: return ws_l1_loss(recon, target);
    }
    throw std::logic_error("perceptual_term: bad mode");
}

}  // namespace

GeneratorLossTerms vqgan_generator_loss(AutoencoderModel& m, const Discriminator& d,
                                        const ad::Var& input, const ad::Var& target,
                                        const LossWeights& weights, PerceptualMode mode) {
    ad::Var feats = vqgan_encode(m, input);
    QuantizeResult q = quantize(feats, m.cb);
    ad::Var recon = vqgan_decode(m, q.quantized);

    ad::Var l1 = ad::mean(ad::abs(ad::sub(recon, target)));
    ad::Var perc = perceptual_term(mode, recon, target);
    ad::Var gan = gan_generator_term(d, recon);

    GeneratorLossTerms terms;
    terms.l1 = l1->val.item();
    terms.vq = q.vq_loss->val.item();
    terms.perc = perc->val.item();
    terms.gan = gan->val.item();

    double gan_w = weights.gan;
    if (weights.adaptive_gan && gan_w > 0.0) {
        // gradient-norm ratio at the decoder output weight
        ad::Var last = m.params.get("dec.out.w");
        ad::Var rec_part = ad::add(ad::scale(l1, weights.l1),
                                   ad::scale(perc, mode == PerceptualMode::ws_perceptual
                                                       ? weights.ws_perc
                                                       : weights.perc));
        last->zero_grad();
        ad::backward(rec_part);
        const double rec_norm = grad_norm(last);
        last->zero_grad();
        ad::backward(gan);
        const double gan_norm = grad_norm(last);
        last->zero_grad();
        gan_w = weights.gan * std::clamp(rec_norm / (gan_norm + 1e-8), 0.0, 1e4);
    }
    terms.gan_weight = gan_w;

    const double perc_w =
        mode == PerceptualMode::ws_perceptual ? weights.ws_perc : weights.perc;
    terms.total = ad::add(
        ad::add(ad::scale(gan, gan_w), ad::scale(l1, weights.l1)),
        ad::add(ad::scale(q.vq_loss, weights.vq), ad::scale(perc, perc_w)));
    return terms;
}

// ---------------------------------------------------------------------------
// vqgan training
// ---------------------------------------------------------------------------

TrainCurve train_vqgan(AutoencoderModel& m, Discriminator& d, const std::vector<ErpImage>& dataset,
                       const LossWeights& weights, const VqganTrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train_vqgan: empty dataset");
    TrainCurve curve;
    if (cfg.steps == 0) return curve;
    Rng rng(cfg.seed);
    const int h = dataset[0].h, w = dataset[0].w;

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();
    const int steps_per_epoch =
        std::max(1, static_cast<int>((dataset.size() + cfg.batch - 1) / static_cast<std::size_t>(cfg.batch)));
    m.cb.reset_usage();

    Tensor last_feats;  // encoder features of the latest batch, for reseeding

    for (int step = 0; step < cfg.steps; ++step) {
        // assemble the batch: rotation augmentation, then gray masking for the
        // masked-input variant (which reconstructs the masked image itself)
        Tensor input({cfg.batch, 3, h, w});
        Tensor target({cfg.batch, 3, h, w});
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            ErpImage img = dataset[order[cursor++]];
            if (cfg.rotate_augment) img = rotate_horizontal(img, rng.uniform_int(0, w - 1));
            ErpImage in_img = img;
            if (m.variant == VqganVariant::masked_input) {
                const double lon = rng.uniform(cfg.mask_lon_min, cfg.mask_lon_max);
                const double lat = rng.uniform(cfg.mask_lat_min, cfg.mask_lat_max);
                in_img = apply_mask_gray(img, make_fov_mask(FovSpec::angular(lon, lat), h, w), cfg.gray);
            }
            ErpImage tgt_img = m.variant == VqganVariant::masked_input ? in_img : img;
            std::copy(in_img.v.begin(), in_img.v.end(),
                      input.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(b) * 3 * h * w));
            std::copy(tgt_img.v.begin(), tgt_img.v.end(),
                      target.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(b) * 3 * h * w));
        }
        ad::Var input_v = ad::constant(input);
        ad::Var target_v = ad::constant(target);

        // generator step
        m.params.zero_grads();
        d.params.zero_grads();
        GeneratorLossTerms terms = vqgan_generator_loss(m, d, input_v, target_v, weights, cfg.perc_mode);
        const double loss = terms.total->val.item();
        if (step == 0) curve.initial_loss = loss;
        curve.loss.push_back(loss);
        if (!std::isfinite(loss) || loss > curve.initial_loss * cfg.divergence_factor) {
            std::ostringstream os;
            os << "train_vqgan: diverged at step " << step << " (loss " << loss << ", initial "
               << curve.initial_loss << ")";
            throw std::runtime_error(os.str());
        }
        ad::backward(terms.total);
        m.params.adam_step(cfg.adam);

        // discriminator step on the detached reconstruction of the updated
        // generator; this forward also refreshes the reseeding feature pool
        Tensor recon_val;
        {
            ad::NoGrad ng;
            ad::Var feats = vqgan_encode(m, input_v);
            QuantizeResult q = quantize(feats, m.cb);
            last_feats = feats->val;
            if (weights.gan > 0.0) recon_val = vqgan_decode(m, q.quantized)->val;
        }
        if (weights.gan > 0.0) {
            d.params.zero_grads();
            ad::Var dloss = gan_discriminator_loss(d, target_v, ad::constant(std::move(recon_val)));
            ad::backward(dloss);
            d.params.adam_step(cfg.adam);
        }

        // dead-entry reseeding at epoch boundaries
        if (cfg.dead_entry_reseed && (step + 1) % steps_per_epoch == 0) {
            const int nz = m.cfg.codebook_dim;
            const int fh = last_feats.dim(2), fw = last_feats.dim(3);
            for (int e = 0; e < m.cb.entries(); ++e) {
                if (m.cb.usage[static_cast<std::size_t>(e)] > 0) continue;
                const int b = rng.uniform_int(0, last_feats.dim(0) - 1);
                const int y = rng.uniform_int(0, fh - 1);
                const int x = rng.uniform_int(0, fw - 1);
                for (int c = 0; c < nz; ++c) m.cb.embed->val.at(e, c) = last_feats.at(b, c, y, x);
            }
            m.cb.reset_usage();
        }
    }
    curve.final_loss = curve.loss.back();
    return curve;
}

// ---------------------------------------------------------------------------
// adjustment-net data synthesis and training
// ---------------------------------------------------------------------------

AdjustPair make_adjust_training_pair(const ErpImage& gt, const ReconFn& recon,
                                     const JitterConfig& jitter, const ScaleConfig& scale,
                                     const HintConfig& hint, std::uint64_t seed) {
    Rng rng(seed);
    ErpImage work = gt;

    if (jitter.enabled) {
        for (int c = 0; c < 3; ++c) {
            const double gain = rng.uniform(jitter.gain_lo, jitter.gain_hi);
            const double offset = rng.uniform(jitter.offset_lo, jitter.offset_hi);
            for (int y = 0; y < work.h; ++y)
                for (int x = 0; x < work.w; ++x)
                    work.at(c, y, x) = std::clamp(work.at(c, y, x) * gain + offset, 0.0, 1.0);
        }
    }

    int factor = 1;
    if (!scale.factors.empty())
        factor = scale.factors[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(scale.factors.size()) - 1))];
    if (factor < 1 || work.h % factor != 0 || work.w % factor != 0)
        throw std::invalid_argument("make_adjust_training_pair: crop not divisible by scale factor");
    if (factor > 1) work = resize_bicubic(work, work.h / factor, work.w / factor, false);

    work = recon(work);

    if (factor > 1) work = resize_bicubic(work, gt.h, gt.w, false);
    if (!work.same_dims(gt))
        throw std::invalid_argument("make_adjust_training_pair: reconstruction changed dims");

    AdjustPair pair;
    pair.target = gt;
    pair.hint_known.assign(static_cast<std::size_t>(gt.h) * gt.w, 0);
    const double frac = rng.uniform(hint.area_lo, hint.area_hi);
    const int rh = std::max(1, static_cast<int>(std::lround(gt.h * std::sqrt(frac))));
    const int rw = std::max(1, static_cast<int>(std::lround(gt.w * std::sqrt(frac))));
    const int y0 = rng.uniform_int(0, gt.h - rh);
    const int x0 = rng.uniform_int(0, gt.w - rw);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) {
            pair.hint_known[static_cast<std::size_t>(y) * gt.w + x] = 1;
            for (int c = 0; c < 3; ++c) work.at(c, y, x) = gt.at(c, y, x);
        }
    pair.input = std::move(work);
    return pair;
}

TrainCurve train_adjustment(AdjustModel& m, Discriminator& d, const PairGen& pairs,
                            const LossWeights& weights, const AdjustTrainConfig& cfg) {
    TrainCurve curve;
    if (cfg.steps == 0) return curve;
    std::uint64_t pair_index = 0;

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<AdjustPair> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b) batch.push_back(pairs(pair_index++));
        const int h = batch[0].input.h, w = batch[0].input.w;

        Tensor completed({cfg.batch, 3, h, w});
        Tensor original({cfg.batch, 3, h, w});
        Tensor maskch({cfg.batch, 1, h, w});
        Tensor target({cfg.batch, 3, h, w});
        for (int b = 0; b < cfg.batch; ++b) {
            const AdjustPair& p = batch[static_cast<std::size_t>(b)];
            if (p.input.h != h || p.input.w != w)
                throw std::invalid_argument("train_adjustment: inconsistent pair dims");
            const std::size_t off3 = static_cast<std::size_t>(b) * 3 * h * w;
            std::copy(p.input.v.begin(), p.input.v.end(), completed.v.begin() + static_cast<std::ptrdiff_t>(off3));
            std::copy(p.target.v.begin(), p.target.v.end(), target.v.begin() + static_cast<std::ptrdiff_t>(off3));
            // the original-input channel carries the hint region only
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const bool k = p.hint_known[static_cast<std::size_t>(y) * w + x] != 0;
                    maskch.v[(static_cast<std::size_t>(b) * h + y) * w + x] = k ? 1.0 : 0.0;
                    for (int c = 0; c < 3; ++c)
                        original.v[off3 + (static_cast<std::size_t>(c) * h + y) * w + x] =
                            k ? p.target.at(c, y, x) : 0.5;
                }
        }

        ad::Var comp_v = ad::constant(completed);
        std::vector<ad::Var> channels{comp_v, ad::constant(original)};
        if (m.use_mask_channel) channels.push_back(ad::constant(maskch));
        ad::Var target_v = ad::constant(target);

        m.params.zero_grads();
        d.params.zero_grads();
        ad::Var out = adjust_forward(m, ad::concat_ch(channels), comp_v);
        ad::Var l1 = ad::mean(ad::abs(ad::sub(out, target_v)));
        ad::Var perc = perceptual_loss(out, target_v);
        ad::Var gan = gan_generator_term(d, out);
        ad::Var total = ad::add(ad::add(ad::scale(gan, weights.gan), ad::scale(l1, weights.l1)),
                                ad::scale(perc, weights.perc));
        const double loss = total->val.item();
        if (step == 0) curve.initial_loss = loss;
        curve.loss.push_back(loss);
        if (!std::isfinite(loss) || loss > curve.initial_loss * cfg.divergence_factor) {
            std::ostringstream os;
            os << "train_adjustment: diverged at step " << step << " (loss " << loss << ", initial "
               << curve.initial_loss << ")";
            throw std::runtime_error(os.str());
        }
        ad::backward(total);
        m.params.adam_step(cfg.adam);

        if (weights.gan > 0.0) {
            d.params.zero_grads();
            ad::Var dloss = gan_discriminator_loss(d, target_v, ad::constant(out->val));
            ad::backward(dloss);
            d.params.adam_step(cfg.adam);
        }
    }
    curve.final_loss = curve.loss.back();
    return curve;
}

}  // namespace pano
