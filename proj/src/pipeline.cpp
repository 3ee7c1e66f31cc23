#include "pano/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pano/checkpoint.hpp"
#include "pano/metrics.hpp"

namespace pano {

namespace fs = std::filesystem;

namespace {

// stage-specific sub-seeds derived from the master seed
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stage) {
    std::uint64_t x = seed + stage * 0x9e3779b97f4a7c15ull;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

VqganConfig vqgan_config_of(const ModelConfig& cfg) {
    VqganConfig vc;
    vc.ch1 = cfg.ch1;
    vc.ch2 = cfg.ch2;
    vc.ch3 = cfg.ch3;
    vc.codebook_entries = cfg.codebook_entries;
    vc.codebook_dim = cfg.codebook_dim;
    return vc;
}

AdamConfig adam_of(const ModelConfig& cfg) {
    AdamConfig a;
    a.lr = cfg.lr;
    a.beta1 = cfg.beta1;
    a.beta2 = cfg.beta2;
    a.eps = cfg.adam_eps;
    return a;
}

LossWeights weights_of(const ModelConfig& cfg) {
    LossWeights w;
    w.gan = cfg.lambda_gan;
    w.l1 = cfg.lambda_l1;
    w.vq = cfg.lambda_vq;
    w.ws_perc = cfg.lambda_ws_perc;
    w.perc = cfg.lambda_perc;
    w.adaptive_gan = cfg.adaptive_gan;
    return w;
}

std::string fmt_metric(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

}  // namespace

PipelineBundle make_bundle(const ModelConfig& cfg) {
    PipelineBundle b;
    b.cfg = cfg;
    b.vq1 = make_vqgan(VqganVariant::masked_input, vqgan_config_of(cfg), sub_seed(cfg.seed, 1));
    b.vq2 = make_vqgan(VqganVariant::full_image, vqgan_config_of(cfg), sub_seed(cfg.seed, 2));
    SceneModelConfig sc;
    sc.vocab = cfg.codebook_entries;
    sc.dim = cfg.tf_dim;
    sc.heads = cfg.tf_heads;
    sc.blocks = cfg.tf_blocks;
    sc.context = cfg.tf_context;
    b.tf = make_scene_model(sc, sub_seed(cfg.seed, 3));
    b.adj = make_adjust_model(sub_seed(cfg.seed, 4));
    return b;
}

void save_bundle(const PipelineBundle& b, const std::string& dir) {
    fs::create_directories(dir);
    save_config(b.cfg, (fs::path(dir) / "config.cfg").string());
    save_checkpoint((fs::path(dir) / "vqgan1.ckpt").string(), b.vq1.params.snapshot());
    save_checkpoint((fs::path(dir) / "vqgan2.ckpt").string(), b.vq2.params.snapshot());
    save_checkpoint((fs::path(dir) / "transformer.ckpt").string(), b.tf.params.snapshot());
    save_checkpoint((fs::path(dir) / "adjust.ckpt").string(), b.adj.params.snapshot());
}

PipelineBundle load_bundle(const std::string& dir) {
    PipelineBundle b = make_bundle(load_config((fs::path(dir) / "config.cfg").string()));
    b.vq1.params.load(load_checkpoint((fs::path(dir) / "vqgan1.ckpt").string()));
    b.vq2.params.load(load_checkpoint((fs::path(dir) / "vqgan2.ckpt").string()));
    b.tf.params.load(load_checkpoint((fs::path(dir) / "transformer.ckpt").string()));
    b.adj.params.load(load_checkpoint((fs::path(dir) / "adjust.ckpt").string()));
    return b;
}

std::uint64_t bundle_hash(const std::string& dir) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char* name : {"vqgan1.ckpt", "vqgan2.ckpt", "transformer.ckpt", "adjust.ckpt"}) {
        const std::uint64_t fh = file_hash((fs::path(dir) / name).string());
        h ^= fh;
        h *= 0x100000001b3ull;
    }
    return h;
}

TrainCurve train_vqgan1_stage(PipelineBundle& b, const std::vector<ErpImage>& data) {
    Discriminator d = make_discriminator(sub_seed(b.cfg.seed, 11));
    VqganTrainConfig tc;
    tc.steps = b.cfg.vqgan_steps;
    tc.batch = b.cfg.batch;
    tc.adam = adam_of(b.cfg);
    tc.seed = sub_seed(b.cfg.seed, 12);
    tc.gray = b.cfg.gray;
    return train_vqgan(b.vq1, d, data, weights_of(b.cfg), tc);
}

TrainCurve train_vqgan2_stage(PipelineBundle& b, const std::vector<ErpImage>& data,
                              PerceptualMode mode) {
    Discriminator d = make_discriminator(sub_seed(b.cfg.seed, 21));
    VqganTrainConfig tc;
    tc.steps = b.cfg.vqgan_steps;
    tc.batch = b.cfg.batch;
    tc.adam = adam_of(b.cfg);
    tc.seed = sub_seed(b.cfg.seed, 22);
    tc.perc_mode = mode;
    tc.gray = b.cfg.gray;
    return train_vqgan(b.vq2, d, data, weights_of(b.cfg), tc);
}

std::vector<TokenSequence> build_transformer_dataset(const PipelineBundle& b,
                                                     const std::vector<ErpImage>& images,
                                                     int pairs_per_image, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TokenSequence> out;
    out.reserve(images.size() * static_cast<std::size_t>(pairs_per_image));
    for (const ErpImage& base : images) {
        for (int p = 0; p < pairs_per_image; ++p) {
            ErpImage img = random_rotation(base, rng);
            const double lon = rng.uniform(120.0, 300.0);
            const double lat = rng.uniform(60.0, 150.0);
            const FovMask mask = make_fov_mask(FovSpec::angular(lon, lat), img.h, img.w);
            const ErpImage masked = apply_mask_gray(img, mask, b.cfg.gray);
            const TokenGrid cond_grid = encode_to_grid(b.vq1, masked);
            const TokenGrid target_grid = encode_to_grid(b.vq2, img);
            TokenMask tmask;
            tmask.h = cond_grid.h;
            tmask.w = cond_grid.w;
            tmask.known = downsample_mask_all(mask, cond_grid.h, cond_grid.w);
            TokenSequence seq = grid_to_sequence(cond_grid, tmask);
            // targets come from the full-image encoder at the unknown cells
            for (std::size_t i = 0; i < seq.target.size(); ++i)
                seq.target[i] = target_grid.idx[static_cast<std::size_t>(seq.target_pos[i])];
            if (!seq.target.empty()) out.push_back(std::move(seq));
        }
    }
    if (out.empty()) throw std::runtime_error("build_transformer_dataset: no usable pairs");
    return out;
}

TrainStats train_transformer_stage(PipelineBundle& b, const std::vector<ErpImage>& data) {
    const std::vector<TokenSequence> ds =
        build_transformer_dataset(b, data, 2, sub_seed(b.cfg.seed, 31));
    TransformerTrainConfig tc;
    tc.steps = b.cfg.transformer_steps;
    tc.batch = b.cfg.batch;
    tc.adam = adam_of(b.cfg);
    tc.seed = sub_seed(b.cfg.seed, 32);
    return train_transformer(b.tf, ds, tc);
}

TrainCurve train_adjust_stage(PipelineBundle& b, const std::vector<ErpImage>& data) {
    Discriminator d = make_discriminator(sub_seed(b.cfg.seed, 41));
    const std::uint64_t pair_seed = sub_seed(b.cfg.seed, 42);
    const int crop_h = b.cfg.train_h / 2;
    const int crop_w = b.cfg.train_w / 2;
    const AutoencoderModel* vq2 = &b.vq2;
    ReconFn recon = [vq2](const ErpImage& img) { return reconstruct(*vq2, img); };
    const std::vector<ErpImage>* images = &data;
    PairGen gen = [=](std::uint64_t index) {
        Rng rng(sub_seed(pair_seed, index));
        const ErpImage& src = (*images)[static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<int>(images->size()) - 1))];
        const int y0 = rng.uniform_int(0, src.h - crop_h);
        const int x0 = rng.uniform_int(0, src.w - 1);
        const ErpImage gt = crop(src, y0, x0, crop_h, crop_w, true);
        JitterConfig jc;
        ScaleConfig sc;
        HintConfig hc;
        return make_adjust_training_pair(gt, recon, jc, sc, hc, rng.next_u64());
    };
    AdjustTrainConfig tc;
    tc.steps = b.cfg.adjust_steps;
    tc.batch = b.cfg.batch;
    tc.adam = adam_of(b.cfg);
    tc.seed = sub_seed(b.cfg.seed, 43);
    LossWeights w = weights_of(b.cfg);
    return train_adjustment(b.adj, d, gen, w, tc);
}

// ---------------------------------------------------------------------------
// completion (the end-to-end inference composition)
// ---------------------------------------------------------------------------

std::vector<CompleteResult> complete(const PipelineBundle& b, const ErpImage& input,
                                     const FovMask& mask, int n_samples,
                                     const SamplerConfig& sampler, ad::PadMode decode_pad,
                                     const StageObserver& observer) {
    if (!input.is_panorama())
        throw std::invalid_argument("complete: input must satisfy W = 2H");
    if (input.h < b.cfg.train_h / 2)
        throw std::invalid_argument("complete: input smaller than half the training resolution");
    if (mask.h != input.h || mask.w != input.w)
        throw std::invalid_argument("complete: mask dims must match the input");
    if (n_samples < 1) throw std::invalid_argument("complete: n_samples must be >= 1");

    auto observe = [&](const char* stage, std::initializer_list<int> dims) {
        if (observer) observer(stage, std::vector<int>(dims));
    };
    observe("input", {3, input.h, input.w});

    const ErpImage gray_full = apply_mask_gray(input, mask, b.cfg.gray);
    observe("gray_full", {3, gray_full.h, gray_full.w});

    const bool needs_resize = input.h != b.cfg.train_h || input.w != b.cfg.train_w;
    const ErpImage downsized =
        needs_resize ? resize_bicubic(gray_full, b.cfg.train_h, b.cfg.train_w, true) : gray_full;
    observe("downsized", {3, downsized.h, downsized.w});

    const FovMask train_mask = make_fov_mask(mask.spec, b.cfg.train_h, b.cfg.train_w);
    const ErpImage gray_train = apply_mask_gray(downsized, train_mask, b.cfg.gray);
    observe("gray_train", {3, gray_train.h, gray_train.w});

    const Tensor feats = encode_features(b.vq1, gray_train);
    observe("encoded", {feats.dim(0), feats.dim(1), feats.dim(2)});

    const TokenGrid cond_grid = quantize_plain(feats, b.vq1.cb);
    observe("quantized", {cond_grid.h, cond_grid.w});

    TokenMask tmask;
    tmask.h = cond_grid.h;
    tmask.w = cond_grid.w;
    tmask.known = downsample_mask_all(train_mask, cond_grid.h, cond_grid.w);

    TokenGrid seeded(cond_grid.h, cond_grid.w, b.tf.unknown_token());
    for (int y = 0; y < cond_grid.h; ++y)
        for (int x = 0; x < cond_grid.w; ++x)
            if (tmask.at(y, x)) seeded.at(y, x) = cond_grid.at(y, x);

    std::vector<CompleteResult> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        SamplerConfig scfg = sampler;
        scfg.seed = sampler.seed + static_cast<std::uint64_t>(s) * 1000003ull;
        TokenGrid sampled = scfg.schedule == SamplerConfig::Schedule::circular
                                ? sample_circular(b.tf, seeded, scfg)
                                : sample_raster(b.tf, seeded, scfg);
        observe("sampled", {sampled.h, sampled.w});

        ErpImage decoded = decode_grid(b.vq2, sampled, decode_pad);
        observe("decoded", {3, decoded.h, decoded.w});

        ErpImage upscaled =
            needs_resize ? resize_bicubic(decoded, input.h, input.w, true) : decoded;
        observe("upscaled", {3, upscaled.h, upscaled.w});

        ErpImage final_img = adjust(b.adj, upscaled, input, mask);
        observe("adjusted", {3, final_img.h, final_img.w});

        CompleteResult r;
        r.image = std::move(final_img);
        r.tokens = std::move(sampled);
        r.decoded = std::move(decoded);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

ErpImage central_generated_region(const ErpImage& img) {
    const ErpImage rolled = rotate_horizontal(img, img.w / 2);
    return crop(rolled, img.h / 4, img.w / 4, img.h / 2, img.w / 2, false);
}

ErpImage central_band(const ErpImage& img) {
    return crop(img, img.h / 4, 0, img.h / 2, img.w, false);
}

EvalReport evaluate(const PipelineBundle& b, const std::vector<ErpImage>& testset,
                    const EvalProtocol& protocol) {
    if (testset.empty()) throw std::invalid_argument("evaluate: empty test set");
    EvalReport rep;
    rep.n_images = static_cast<int>(testset.size());
    rep.n_samples = protocol.diversity_samples;
    rep.center_region_only = protocol.center_region_only;

    const int feat_dim = FeatureExtractor::instance().deepest_channels();
    FeatureAccumulator real_acc(feat_dim), gen_acc(feat_dim);

    auto add_image_features = [&](FeatureAccumulator& acc, const ErpImage& img) {
        if (protocol.center_region_only) {
            acc.add(FeatureExtractor::instance().pooled_features(central_generated_region(img)));
        } else {
            const CubemapFaces cm = erp_to_cubemap(img, protocol.fid_face_size);
            for (const ErpImage* face : cm.lateral_faces())
                acc.add(FeatureExtractor::instance().pooled_features(*face));
        }
    };

    double psnr_acc = 0.0, seam_acc = 0.0, div_acc = 0.0;
    bool psnr_inf = false;
    int seam_count = 0;

    for (std::size_t i = 0; i < testset.size(); ++i) {
        const ErpImage& gt = testset[i];
        const FovMask mask = make_fov_mask(protocol.mask_spec, gt.h, gt.w);
        SamplerConfig scfg = protocol.sampler;
        scfg.seed = protocol.sampler.seed + i * 7919ull;
        const std::vector<CompleteResult> samples =
            complete(b, gt, mask, protocol.diversity_samples, scfg, protocol.decode_pad);

        add_image_features(real_acc, gt);
        std::vector<ErpImage> sample_imgs;
        for (const CompleteResult& r : samples) {
            add_image_features(gen_acc, r.image);
            const ErpImage& seam_target = protocol.center_region_only ? r.decoded : r.image;
            seam_acc += seam_discontinuity(seam_target);
            ++seam_count;
            sample_imgs.push_back(r.image);
        }

        EvalReport::PerImage pi;
        pi.index = static_cast<int>(i);
        pi.ws_psnr_known = ws_psnr_masked(samples[0].image, gt, mask.known);
        pi.seam = seam_discontinuity(protocol.center_region_only ? samples[0].decoded
                                                                 : samples[0].image);
        pi.diversity = sample_imgs.size() >= 2 ? diversity_score(sample_imgs) : 0.0;
        rep.per_image.push_back(pi);

        if (std::isinf(pi.ws_psnr_known))
            psnr_inf = true;
        else
            psnr_acc += pi.ws_psnr_known;
        div_acc += pi.diversity;
    }

    rep.fid = frechet_distance(real_acc.finalize(), gen_acc.finalize());
    rep.mean_ws_psnr_known =
        psnr_inf ? std::numeric_limits<double>::infinity() : psnr_acc / rep.n_images;
    rep.mean_seam = seam_acc / seam_count;
    rep.diversity = div_acc / rep.n_images;
    return rep;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "n_images = " << n_images << "\n";
    os << "n_samples = " << n_samples << "\n";
    os << "center_region_only = " << (center_region_only ? 1 : 0) << "\n";
    os << "fid = " << fmt_metric(fid) << "\n";
    os << "mean_ws_psnr_known = " << fmt_metric(mean_ws_psnr_known) << "\n";
    os << "mean_seam = " << fmt_metric(mean_seam) << "\n";
    os << "diversity = " << fmt_metric(diversity) << "\n";
    return os.str();
}

std::string EvalReport::to_ndjson() const {
    std::ostringstream os;
    for (const PerImage& p : per_image)
        os << "{\"image\":" << p.index << ",\"ws_psnr_known\":\"" << fmt_metric(p.ws_psnr_known)
           << "\",\"seam\":" << fmt_metric(p.seam) << ",\"diversity\":" << fmt_metric(p.diversity)
           << "}\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

double sign_test_p_value(int wins, int n) {
    if (n <= 0) return 1.0;
    auto log_choose = [](int nn, int kk) {
        return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0);
    };
    double p = 0.0;
    for (int k = wins; k <= n; ++k) p += std::exp(log_choose(n, k) - n * std::log(2.0));
    return std::min(1.0, p);
}

bool AblationReport::seam_direction_ok() const {
    if (sampling.empty()) return false;
    for (const SamplingSeed& s : sampling)
        if (!(s.seam_circular_inference < s.seam_raster)) return false;
    return sign_test_p < 0.05 && checkpoint_hash_equal;
}

bool AblationReport::loss_direction_ok() const {
    if (losses.empty()) return false;
    double perc = 0.0, wsl1 = 0.0, wsperc = 0.0;
    for (const LossSeed& l : losses) {
        perc += l.central_err_perc;
        wsl1 += l.central_err_ws_l1;
        wsperc += l.central_err_ws_perc;
    }
    return wsperc < perc && wsperc < wsl1;
}

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os << "# sampling schedules (seam discontinuity of decoded completions)\n";
    for (const SamplingSeed& s : sampling) {
        os << "seed " << s.seed << ": raster = " << fmt_metric(s.seam_raster)
           << ", circular_padding = " << fmt_metric(s.seam_circular_padding)
           << ", circular_inference = " << fmt_metric(s.seam_circular_inference) << ", wins "
           << s.circular_wins << "/" << s.pairs << "\n";
    }
    if (!sampling.empty()) {
        os << "sign_test_p = " << fmt_metric(sign_test_p) << "\n";
        os << "checkpoint_hash_equal = " << (checkpoint_hash_equal ? 1 : 0) << "\n";
        os << "verdict_seam_direction = " << (seam_direction_ok() ? "pass" : "fail") << "\n";
    }
    os << "# training losses (central-band perceptual reconstruction error)\n";
    for (const LossSeed& l : losses) {
        os << "seed " << l.seed << ": perceptual = " << fmt_metric(l.central_err_perc)
           << ", ws_l1 = " << fmt_metric(l.central_err_ws_l1)
           << ", ws_perceptual = " << fmt_metric(l.central_err_ws_perc) << "\n";
    }
    if (!losses.empty())
        os << "verdict_loss_direction = " << (loss_direction_ok() ? "pass" : "fail") << "\n";
    return os.str();
}

AblationReport run_ablation(const AblationConfig& cfg) {
    AblationReport rep;
    fs::create_directories(cfg.work_dir);

    if (cfg.run_sampling_arms) {
        int pooled_wins = 0, pooled_pairs = 0;
        for (int si = 0; si < cfg.n_seeds; ++si) {
            const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(si);
            ModelConfig mc = cfg.cfg;
            mc.seed = seed;
            PipelineBundle bundle = make_bundle(mc);
            const std::vector<SceneSample> train_scenes =
                synth_dataset(mc.dataset_size, mc.train_h, seed * 131ull);
            std::vector<ErpImage> train;
            for (const SceneSample& s : train_scenes) train.push_back(s.image);
            train_vqgan1_stage(bundle, train);
            train_vqgan2_stage(bundle, train);
            train_transformer_stage(bundle, train);

            const std::string dir =
                (fs::path(cfg.work_dir) / ("sampling_seed" + std::to_string(seed))).string();
            save_bundle(bundle, dir);

            AblationReport::SamplingSeed rec;
            rec.seed = seed;
            // each arm reloads the same checkpoint; only inference differs
            PipelineBundle arm_raster = load_bundle(dir);
            rec.arm_hash_raster = bundle_hash(dir);
            PipelineBundle arm_circpad = load_bundle(dir);
            rec.arm_hash_circpad = bundle_hash(dir);
            PipelineBundle arm_circinf = load_bundle(dir);
            rec.arm_hash_circinf = bundle_hash(dir);
            if (!(rec.arm_hash_raster == rec.arm_hash_circpad &&
                  rec.arm_hash_circpad == rec.arm_hash_circinf))
                rep.checkpoint_hash_equal = false;

            double sums[3] = {0.0, 0.0, 0.0};
            rec.circular_wins = 0;
            rec.pairs = cfg.n_samples;
            for (int k = 0; k < cfg.n_samples; ++k) {
                const SceneSpec spec = random_scene_spec(seed * 977ull + 9000ull + k);
                const ErpImage gt = render_scene(spec, mc.train_h);
                const FovMask mask = make_fov_mask(FovSpec::angular(180.0, 90.0), gt.h, gt.w);
                SamplerConfig scfg;
                scfg.temperature = mc.temperature;
                scfg.top_k = mc.top_k;
                scfg.w_p = mc.w_p;
                scfg.seed = seed * 65537ull + static_cast<std::uint64_t>(k);

                scfg.schedule = SamplerConfig::Schedule::raster;
                const double seam_r = seam_discontinuity(
                    complete(arm_raster, gt, mask, 1, scfg, ad::PadMode::zero)[0].decoded);
                const double seam_cp = seam_discontinuity(
                    complete(arm_circpad, gt, mask, 1, scfg, ad::PadMode::circular_width)[0]
                        .decoded);
                scfg.schedule = SamplerConfig::Schedule::circular;
                const double seam_ci = seam_discontinuity(
                    complete(arm_circinf, gt, mask, 1, scfg, ad::PadMode::zero)[0].decoded);

                sums[0] += seam_r;
                sums[1] += seam_cp;
                sums[2] += seam_ci;
                if (seam_ci < seam_r) rec.circular_wins++;
            }
            rec.seam_raster = sums[0] / cfg.n_samples;
            rec.seam_circular_padding = sums[1] / cfg.n_samples;
            rec.seam_circular_inference = sums[2] / cfg.n_samples;
            pooled_wins += rec.circular_wins;
            pooled_pairs += rec.pairs;
            rep.sampling.push_back(rec);
        }
        rep.sign_test_p = sign_test_p_value(pooled_wins, pooled_pairs);
    }

    if (cfg.run_loss_arms) {
        for (int si = 0; si < cfg.n_seeds; ++si) {
            const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(si);
            ModelConfig mc = cfg.cfg;
            mc.seed = seed;
            const std::vector<SceneSample> train_scenes =
                synth_dataset(mc.dataset_size, mc.train_h, seed * 131ull);
            std::vector<ErpImage> train;
            for (const SceneSample& s : train_scenes) train.push_back(s.image);

            AblationReport::LossSeed rec;
            rec.seed = seed;
            const PerceptualMode modes[3] = {PerceptualMode::plain_perceptual,
                                             PerceptualMode::ws_l1,
                                             PerceptualMode::ws_perceptual};
            double errs[3] = {0.0, 0.0, 0.0};
            for (int arm = 0; arm < 3; ++arm) {
                PipelineBundle bundle = make_bundle(mc);
                train_vqgan2_stage(bundle, train, modes[arm]);
                double acc = 0.0;
                for (int k = 0; k < cfg.loss_eval_images; ++k) {
                    const ErpImage gt =
                        render_scene(random_scene_spec(seed * 577ull + 4000ull + k), mc.train_h);
                    const ErpImage recon = reconstruct(bundle.vq2, gt);
                    acc += perceptual_loss(central_band(recon), central_band(gt));
                }
                errs[arm] = acc / cfg.loss_eval_images;
            }
            rec.central_err_perc = errs[0];
            rec.central_err_ws_l1 = errs[1];
            rec.central_err_ws_perc = errs[2];
            rep.losses.push_back(rec);
        }
    }
    return rep;
}

}  // namespace pano
