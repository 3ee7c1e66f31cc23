#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace pano {

// Every dimension, loss weight, and sampling parameter of the pipeline.
// Serialized as plain-text "key = value" lines; unknown keys are rejected.
struct ModelConfig {
    int version = 1;

    // training image size and token grid (training resolution / 8)
    int train_h = 64;
    int train_w = 128;
    int tokens_h = 8;
    int tokens_w = 16;

    // autoencoder widths and codebook
    int ch1 = 12, ch2 = 20, ch3 = 28;
    int codebook_entries = 64;
    int codebook_dim = 16;

    // scene transformer
    int tf_dim = 128;
    int tf_heads = 4;
    int tf_blocks = 4;
    int tf_context = 256;

    // sampling
    double temperature = 1.0;
    int top_k = 32;
    int w_p = 2;  // circular overlap width in tokens

    // loss weights
    double lambda_gan = 0.1;
    double lambda_l1 = 1.0;
    double lambda_vq = 1.0;
    double lambda_ws_perc = 1.0;
    double lambda_perc = 1.0;
    bool adaptive_gan = false;

    // optimizer
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    // per-stage step budgets
    int vqgan_steps = 300;
    int transformer_steps = 400;
    int adjust_steps = 200;
    int batch = 2;

    // data
    int dataset_size = 48;
    double gray = 0.5;
    std::uint64_t seed = 1;

    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
};

void save_config(const ModelConfig& cfg, const std::string& path);
ModelConfig load_config(const std::string& path);

// bare key-value layer used by config and report files
std::map<std::string, std::string> parse_kv_text(const std::string& text);

}  // namespace pano
