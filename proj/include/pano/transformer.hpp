#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pano/nn.hpp"
#include "pano/vq.hpp"

namespace pano {

struct SceneModelConfig {
    int vocab = 64;    // codebook entries; the reserved marker is index vocab
    int dim = 128;
    int heads = 4;
    int blocks = 4;
    int context = 256;
};

// Autoregressive model over token sequences [start, c..., s...]. The reserved
// token (id == vocab) marks unknown grid cells and doubles as the start token.
struct SceneModel {
    SceneModelConfig cfg;
    ParameterSet params;
    std::vector<BlockParams> blocks;
    ad::Var tok_emb, pos_emb, lnf_g, lnf_b, head_w, head_b;

    int unknown_token() const { return cfg.vocab; }
};

SceneModel make_scene_model(const SceneModelConfig& cfg, std::uint64_t seed);

// Full-sequence forward; tokens must include the start token. (T, vocab).
ad::Var scene_logits(const SceneModel& m, const std::vector<int>& tokens);

// Logits for position |c|+|s_partial| of the sequence. Throws when the
// sequence would exceed the context length (samplers window instead).
std::vector<double> next_token_logits(const SceneModel& m, const TokenSequence& prefix);

// Mean negative log-likelihood over the target positions only.
double transformer_nll(const SceneModel& m, const TokenSequence& seq);
ad::Var transformer_nll_var(const SceneModel& m, const TokenSequence& seq);

struct SamplerConfig {
    double temperature = 1.0;
    int top_k = 32;
    std::uint64_t seed = 0;
    int w_p = 2;  // overlap width in tokens for the circular schedule
    enum class Schedule { raster, circular };
    Schedule schedule = Schedule::raster;
    enum class Replace { both_ends, tail_only };
    Replace replace = Replace::both_ends;
    bool record_trace = false;
};

struct TraceEntry {
    int grid_pos = 0;  // raster index into the sampled grid (extended for circular)
    int chosen = 0;
    double entropy = 0.0;
};
std::string trace_to_ndjson(const std::vector<TraceEntry>& trace);

struct SampleDetail {
    std::vector<TraceEntry> trace;
    // circular schedule bookkeeping: raw estimates before replacement and the
    // extended grid after replacement
    TokenGrid extended_estimates;
    TokenGrid extended_final;
};

// Row-major sampling of the unknown cells; known cells are never modified.
// When the flattened sequence would overflow the context, conditioning is
// windowed to the most recent context-length tokens.
TokenGrid sample_raster(const SceneModel& m, const TokenGrid& grid, const SamplerConfig& cfg,
                        SampleDetail* detail = nullptr);

// Circular schedule: the grid is widened by w_p duplicated columns on both
// sides, sampled in raster order, and after each row the end columns of the
// original width are replaced by their overlap re-estimates; the result is
// cropped back to the original width.
TokenGrid sample_circular(const SceneModel& m, const TokenGrid& grid, const SamplerConfig& cfg,
                          SampleDetail* detail = nullptr);

// Incremental decoder state; produces logits identical to scene_logits bit
// for bit (same per-position arithmetic order).
class SceneEvaluator {
  public:
    explicit SceneEvaluator(const SceneModel& m);
    void reset();
    // appends a token and returns the logits predicting the next position
    std::vector<double> push(int token);
    int length() const { return static_cast<int>(stream_.size()); }
    const std::vector<int>& stream() const { return stream_; }
    // drops everything from position len on; false when the cache cannot be
    // truncated in place (the stream has already been windowed)
    bool truncate(int len);

  private:
    std::vector<double> eval_position(int token, int pos);

    const SceneModel& m_;
    std::vector<int> stream_;                   // full token stream (unwindowed)
    std::vector<std::vector<double>> kcache_;   // per block, (t * dim)
    std::vector<std::vector<double>> vcache_;
    int cached_ = 0;
};

struct TransformerTrainConfig {
    int steps = 400;
    int batch = 2;
    AdamConfig adam;
    std::uint64_t seed = 0;
    double divergence_factor = 10.0;
};

struct TrainStats {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_curve;
};

// Teacher-forced NLL minimization with Adam. Aborts with diagnostics if the
// loss exceeds divergence_factor times the initial loss.
TrainStats train_transformer(SceneModel& m, const std::vector<TokenSequence>& dataset,
                             const TransformerTrainConfig& cfg);

}  // namespace pano
