#pragma once

#include <cstdint>
#include <vector>

#include "pano/autodiff.hpp"

namespace pano {

// K x n_z embedding table with per-entry usage counters. The entries live in
// an autodiff parameter so the codebook term of the VQ loss can train them.
struct Codebook {
    ad::Var embed;                    // (K, n_z)
    std::vector<std::int64_t> usage;  // assignments since the last reset

    int entries() const { return embed->val.dim(0); }
    int dim() const { return embed->val.dim(1); }
    void reset_usage() { usage.assign(static_cast<std::size_t>(entries()), 0); }
};

Codebook make_codebook(int entries, int dim, ad::Var embed);

// h x w grid of indices in [0, K). Sampling grids additionally use the value
// K as the reserved unknown marker.
struct TokenGrid {
    int h = 0;
    int w = 0;
    std::vector<int> idx;

    TokenGrid() = default;
    TokenGrid(int height, int width, int fill = 0);
    int& at(int y, int x) { return idx[static_cast<std::size_t>(y) * w + x]; }
    int at(int y, int x) const { return idx[static_cast<std::size_t>(y) * w + x]; }
    bool operator==(const TokenGrid& o) const { return h == o.h && w == o.w && idx == o.idx; }
};

struct TokenMask {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> known;

    TokenMask() = default;
    TokenMask(int height, int width, bool fill = false);
    bool at(int y, int x) const { return known[static_cast<std::size_t>(y) * w + x] != 0; }
    void set(int y, int x, bool k) { known[static_cast<std::size_t>(y) * w + x] = k ? 1 : 0; }
};

// Raster flattening of a grid: condition tokens c (known cells) followed by
// target tokens s (unknown cells), with positions kept for the way back.
struct TokenSequence {
    std::vector<int> cond;
    std::vector<int> target;
    std::vector<int> cond_pos;    // raster index of each condition token
    std::vector<int> target_pos;  // raster index of each target token
    int grid_h = 0;
    int grid_w = 0;
};

struct QuantizeResult {
    ad::Var quantized;             // same shape as the input features
    std::vector<TokenGrid> grids;  // one per batch item
    ad::Var vq_loss;               // codebook_loss + beta * commitment_loss
    ad::Var codebook_loss;         // ||sg[z_e] - e||^2, trains the codebook
    ad::Var commitment_loss;       // ||z_e - sg[e]||^2, the differentiable path
};

// Nearest-neighbour assignment (squared Euclidean, lowest index wins ties)
// with the straight-through gradient: d(quantized)/d(features) is identity.
// vq_loss = mean||sg[z_e]-e||^2 + beta * mean||z_e-sg[e]||^2.
QuantizeResult quantize(const ad::Var& features, Codebook& cb, double beta = 0.25);

// assignment only, for inference paths
TokenGrid quantize_plain(const Tensor& features, const Codebook& cb);

Tensor dequantize(const TokenGrid& grid, const Codebook& cb);  // (n_z, h, w)

TokenSequence grid_to_sequence(const TokenGrid& grid, const TokenMask& known);
TokenGrid sequence_to_grid(const TokenSequence& seq);

}  // namespace pano
