#pragma once

#include <vector>

#include "pano/autodiff.hpp"
#include "pano/image.hpp"
#include "pano/nn.hpp"

namespace pano {

// Multi-scale feature stack of one image: layer l holds a (C_l,H_l,W_l)
// map with H_l strictly decreasing, plus a non-negative per-channel weight
// vector (uniform 1/sqrt(C_l)).
struct FeaturePyramid {
    std::vector<Tensor> layers;
    std::vector<std::vector<double>> channel_weights;
};

// Small frozen convolutional stack (3 layers, stride 1/2/2), weights pinned
// to a fixed seed at first use. Activations are tanh-squashed and unit-
// normalized across channels per spatial position.
class FeatureExtractor {
  public:
    static const FeatureExtractor& instance();

    // image dims must be divisible by 4
    std::vector<ad::Var> pyramid_vars(const ad::Var& img_nchw) const;
    FeaturePyramid extract(const ErpImage& img) const;

    int num_layers() const { return 3; }
    int deepest_channels() const { return deep_ch_; }
    // global average of the deepest normalized layer; the FID-analog feature
    std::vector<double> pooled_features(const ErpImage& img) const;

  private:
    FeatureExtractor();
    std::vector<ad::Var> weights_;
    std::vector<ad::Var> biases_;
    int deep_ch_ = 0;
};

// Loss cores over already-extracted pyramids (layers shaped (N,C,H,W) with
// uniform 1/sqrt(C) channel weights). Tests inject hand-built pyramids here.
ad::Var perceptual_from_pyramids(const std::vector<ad::Var>& pa, const std::vector<ad::Var>& pb);
// row_weights_override, when given, replaces the latitude weights per layer
ad::Var ws_perceptual_from_pyramids(const std::vector<ad::Var>& pa, const std::vector<ad::Var>& pb,
                                    const std::vector<std::vector<double>>* row_weights_override = nullptr);

// sum_l mean_{u,v} || w_l . (a^l - b^l) ||^2
ad::Var perceptual_loss(const ad::Var& a, const ad::Var& b);
double perceptual_loss(const ErpImage& a, const ErpImage& b);

// latitude-weighted variant: each spatial term is scaled by the row weight
// of its layer and the sum is normalized by the total weight mass
ad::Var ws_perceptual_loss(const ad::Var& a, const ad::Var& b);
double ws_perceptual_loss(const ErpImage& a, const ErpImage& b);

// latitude-weight-normalized mean absolute pixel error
ad::Var ws_l1_loss(const ad::Var& a, const ad::Var& b);
double ws_l1_loss(const ErpImage& a, const ErpImage& b);

// Gaussian moments of a feature set. Covariance uses the n-1 normalizer.
struct FeatureStats {
    std::vector<double> mu;
    std::vector<double> cov;  // dim x dim, row major
    std::int64_t count = 0;

    int dim() const { return static_cast<int>(mu.size()); }
    static FeatureStats from_moments(std::vector<double> mu, std::vector<double> cov,
                                     std::int64_t count = 2);
};

class FeatureAccumulator {
  public:
    explicit FeatureAccumulator(int dim);
    void add(const std::vector<double>& x);
    FeatureStats finalize() const;  // needs >= 2 samples

  private:
    int dim_;
    std::int64_t n_ = 0;
    std::vector<double> sum_;
    std::vector<double> sum_outer_;
};

// ||mu1-mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}); the matrix square root is
// taken by symmetric eigendecomposition with eigenvalues below -1e-8 rejected
// and small negatives clamped to zero.
double frechet_distance(const FeatureStats& s1, const FeatureStats& s2);

// mean perceptual distance over unordered sample pairs; needs >= 2 samples
double diversity_score(const std::vector<ErpImage>& samples);

// mean |col(W-1) - col(0)| minus the mean over interior adjacent column
// pairs, so 0 means the seam looks like an ordinary column boundary
double seam_discontinuity(const ErpImage& img);

}  // namespace pano
