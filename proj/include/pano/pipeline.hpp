#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pano/config.hpp"
#include "pano/erp.hpp"
#include "pano/models.hpp"
#include "pano/synth.hpp"
#include "pano/transformer.hpp"

namespace pano {

// All trained components plus the configuration they were built with.
struct PipelineBundle {
    ModelConfig cfg;
    AutoencoderModel vq1;  // masked-input encoder side
    AutoencoderModel vq2;  // full-image autoencoder
    SceneModel tf;
    AdjustModel adj;
};

PipelineBundle make_bundle(const ModelConfig& cfg);
void save_bundle(const PipelineBundle& b, const std::string& dir);
PipelineBundle load_bundle(const std::string& dir);
// combined FNV hash of every checkpoint file in a bundle directory
std::uint64_t bundle_hash(const std::string& dir);

// stage-wise training; sub-seeds derive from cfg.seed
TrainCurve train_vqgan1_stage(PipelineBundle& b, const std::vector<ErpImage>& data);
TrainCurve train_vqgan2_stage(PipelineBundle& b, const std::vector<ErpImage>& data,
                              PerceptualMode mode = PerceptualMode::ws_perceptual);
TrainStats train_transformer_stage(PipelineBundle& b, const std::vector<ErpImage>& data);
TrainCurve train_adjust_stage(PipelineBundle& b, const std::vector<ErpImage>& data);

// condition/target pairs for the scene model: conditions come from the
// masked-input encoder, targets from the full-image encoder
std::vector<TokenSequence> build_transformer_dataset(const PipelineBundle& b,
                                                     const std::vector<ErpImage>& images,
                                                     int pairs_per_image, std::uint64_t seed);

using StageObserver = std::function<void(const std::string& stage, const std::vector<int>& dims)>;

struct CompleteResult {
    ErpImage image;
    TokenGrid tokens;      // sampled token grid (original width)
    ErpImage decoded;      // decoder output at training resolution, before upscale
};

// Full completion: gray-fill, downsize, encode, sample, decode, upscale,
// adjust. Output dims equal input dims and known pixels equal the input.
std::vector<CompleteResult> complete(const PipelineBundle& b, const ErpImage& input,
                                     const FovMask& mask, int n_samples,
                                     const SamplerConfig& sampler,
                                     ad::PadMode decode_pad = ad::PadMode::zero,
                                     const StageObserver& observer = nullptr);

struct EvalProtocol {
    FovSpec mask_spec = FovSpec::angular(180.0, 90.0);
    int diversity_samples = 5;
    bool center_region_only = false;  // restrict metrics to the central generated region
    int fid_face_size = 32;
    SamplerConfig sampler;
    ad::PadMode decode_pad = ad::PadMode::zero;
};

struct EvalReport {
    int n_images = 0;
    int n_samples = 0;
    bool center_region_only = false;
    double fid = 0.0;
    double mean_ws_psnr_known = 0.0;  // +inf when known regions are bit-exact
    double mean_seam = 0.0;
    double diversity = 0.0;
    struct PerImage {
        int index = 0;
        double ws_psnr_known = 0.0;
        double seam = 0.0;
        double diversity = 0.0;
    };
    std::vector<PerImage> per_image;

    std::string to_text() const;
    std::string to_ndjson() const;
};

EvalReport evaluate(const PipelineBundle& b, const std::vector<ErpImage>& testset,
                    const EvalProtocol& protocol);

// ---------------------------------------------------------------------------
// ablations
// ---------------------------------------------------------------------------

struct AblationConfig {
    ModelConfig cfg;
    int n_seeds = 3;
    int n_samples = 50;       // paired samples per seed for the schedule arms
    int loss_eval_images = 12;
    std::uint64_t base_seed = 100;
    std::string work_dir = "ablation_work";
    bool run_sampling_arms = true;
    bool run_loss_arms = true;
};

struct AblationReport {
    struct SamplingSeed {
        std::uint64_t seed = 0;
        double seam_raster = 0.0;
        double seam_circular_padding = 0.0;
        double seam_circular_inference = 0.0;
        int circular_wins = 0;  // paired comparisons won by circular inference
        int pairs = 0;
        std::uint64_t arm_hash_raster = 0, arm_hash_circpad = 0, arm_hash_circinf = 0;
    };
    std::vector<SamplingSeed> sampling;
    double sign_test_p = 1.0;  // pooled one-sided sign test, circular < raster
    bool checkpoint_hash_equal = true;

    struct LossSeed {
        std::uint64_t seed = 0;
        double central_err_perc = 0.0;
        double central_err_ws_l1 = 0.0;
        double central_err_ws_perc = 0.0;
    };
    std::vector<LossSeed> losses;

    bool seam_direction_ok() const;
    bool loss_direction_ok() const;
    std::string to_text() const;
};

AblationReport run_ablation(const AblationConfig& cfg);

// exact one-sided binomial sign test under p = 1/2
double sign_test_p_value(int wins, int n);

// roll by half a turn and crop the central half: the generated region of a
// 180x90-masked panorama, seam at the crop center
ErpImage central_generated_region(const ErpImage& img);

// middle 50% of rows
ErpImage central_band(const ErpImage& img);

}  // namespace pano
