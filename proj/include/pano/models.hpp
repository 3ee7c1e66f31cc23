#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pano/erp.hpp"
#include "pano/image.hpp"
#include "pano/metrics.hpp"
#include "pano/nn.hpp"
#include "pano/vq.hpp"

namespace pano {

// ---------------------------------------------------------------------------
// networks
// ---------------------------------------------------------------------------

enum class VqganVariant { masked_input, full_image };

struct VqganConfig {
    int ch1 = 12;
    int ch2 = 20;
    int ch3 = 28;
    int codebook_entries = 64;
    int codebook_dim = 16;
};

// Strided conv encoder (x8 downsampling) and mirrored nearest-neighbour
// upsampling decoder around a vector-quantization bottleneck.
struct AutoencoderModel {
    VqganVariant variant = VqganVariant::full_image;
    VqganConfig cfg;
    ParameterSet params;
    Codebook cb;  // embed tensor lives in params as "codebook"
};

AutoencoderModel make_vqgan(VqganVariant variant, const VqganConfig& cfg, std::uint64_t seed);

ad::Var vqgan_encode(const AutoencoderModel& m, const ad::Var& img);  // (N,3,H,W)->(N,nz,H/8,W/8)
ad::Var vqgan_decode(const AutoencoderModel& m, const ad::Var& feats,
                     ad::PadMode pad = ad::PadMode::zero);

// inference conveniences (no tape)
Tensor encode_features(const AutoencoderModel& m, const ErpImage& img);  // (nz,h,w)
TokenGrid encode_to_grid(const AutoencoderModel& m, const ErpImage& img);
ErpImage decode_grid(const AutoencoderModel& m, const TokenGrid& grid,
                     ad::PadMode pad = ad::PadMode::zero);
ErpImage reconstruct(const AutoencoderModel& m, const ErpImage& img,
                     ad::PadMode pad = ad::PadMode::zero);

// Patch discriminator: strided conv stack to a logit map whose receptive
// field is far smaller than the image.
struct Discriminator {
    ParameterSet params;
};

Discriminator make_discriminator(std::uint64_t seed);
ad::Var discriminate(const Discriminator& d, const ad::Var& img);

// U-shaped refiner with skip connections. Input channels: completed image,
// original input image, and (optionally) the known-region mask.
struct AdjustModel {
    ParameterSet params;
    bool use_mask_channel = true;
    static constexpr int down_factor = 4;
};

AdjustModel make_adjust_model(std::uint64_t seed, bool use_mask_channel = true);

// Applies the network and then re-composites known pixels from the original
// input (hard constraint). Works at any resolution; dims not divisible by
// the network stride are reflect-padded and cropped back.
ErpImage adjust(const AdjustModel& m, const ErpImage& completed_upscaled,
                const ErpImage& original_input, const FovMask& mask);

// network application without the recomposition step
ErpImage adjust_raw(const AdjustModel& m, const ErpImage& completed, const ErpImage& original,
                    const std::vector<std::uint8_t>& known);

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct LossWeights {
    double gan = 0.1;
    double l1 = 1.0;
    double vq = 1.0;
    double ws_perc = 1.0;
    double perc = 1.0;
    // replaces the fixed gan weight by the gradient-norm ratio at the
    // decoder's output layer
    bool adaptive_gan = false;
};

enum class PerceptualMode { ws_perceptual, plain_perceptual, ws_l1 };

struct VqganTrainConfig {
    int steps = 300;
    int batch = 2;
    AdamConfig adam;
    std::uint64_t seed = 0;
    PerceptualMode perc_mode = PerceptualMode::ws_perceptual;
    double divergence_factor = 10.0;
    bool dead_entry_reseed = true;
    // masked-input variant: random angular masks in these ranges
    double mask_lon_min = 120.0, mask_lon_max = 300.0;
    double mask_lat_min = 60.0, mask_lat_max = 150.0;
    double gray = 0.5;
    bool rotate_augment = true;
};

struct GeneratorLossTerms {
    ad::Var total;
    double gan = 0.0, l1 = 0.0, vq = 0.0, perc = 0.0;
    double gan_weight = 0.0;  // effective weight (equals weights.gan unless adaptive)
};

// One generator-side loss assembly on an explicit batch; exposed so the
// weighted-sum bookkeeping is testable in isolation.
GeneratorLossTerms vqgan_generator_loss(AutoencoderModel& m, const Discriminator& d,
                                        const ad::Var& input, const ad::Var& target,
                                        const LossWeights& weights, PerceptualMode mode);

struct TrainCurve {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss;
};

TrainCurve train_vqgan(AutoencoderModel& m, Discriminator& d, const std::vector<ErpImage>& dataset,
                       const LossWeights& weights, const VqganTrainConfig& cfg);

// ---------------------------------------------------------------------------
// adjustment-net data synthesis and training
// ---------------------------------------------------------------------------

struct JitterConfig {
    bool enabled = true;
    double gain_lo = 0.8, gain_hi = 1.2;
    double offset_lo = -0.1, offset_hi = 0.1;
};

struct ScaleConfig {
    std::vector<int> factors = {1, 2};
};

struct HintConfig {
    double area_lo = 0.25, area_hi = 0.50;
};

struct AdjustPair {
    ErpImage input;   // degraded reconstruction with the hint region composited in
    ErpImage target;  // the ground-truth crop
    std::vector<std::uint8_t> hint_known;  // H*W, 1 inside the hint rectangle
};

using ReconFn = std::function<ErpImage(const ErpImage&)>;

// target = gt; input = recon(downscale(jitter(gt))) upscaled back (bicubic)
// with a random gt rectangle composited in. Deterministic per seed.
AdjustPair make_adjust_training_pair(const ErpImage& gt, const ReconFn& recon,
                                     const JitterConfig& jitter, const ScaleConfig& scale,
                                     const HintConfig& hint, std::uint64_t seed);

struct AdjustTrainConfig {
    int steps = 200;
    int batch = 2;
    AdamConfig adam;
    std::uint64_t seed = 0;
    double divergence_factor = 10.0;
};

using PairGen = std::function<AdjustPair(std::uint64_t index)>;

TrainCurve train_adjustment(AdjustModel& m, Discriminator& d, const PairGen& pairs,
                            const LossWeights& weights, const AdjustTrainConfig& cfg);

}  // namespace pano
