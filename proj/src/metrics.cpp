#include "pano/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "pano/erp.hpp"
#include "pano/rng.hpp"

namespace pano {

namespace {

constexpr std::uint64_t kExtractorSeed = 0x5fea7ull;
constexpr int kLayerCh[3] = {8, 12, 16};
constexpr int kLayerStride[3] = {1, 2, 2};

}  // namespace

FeatureExtractor::FeatureExtractor() {
    Rng rng(kExtractorSeed);
    int in_ch = 3;
    for (int l = 0; l < 3; ++l) {
        // unit-variance pre-activations keep tanh in its responsive range
        Tensor w = init_normal({kLayerCh[l], in_ch, 3, 3}, 1.0 / std::sqrt(9.0 * in_ch), rng);
        Tensor b = init_normal({kLayerCh[l]}, 0.1, rng);
        weights_.push_back(ad::constant(std::move(w)));
        biases_.push_back(ad::constant(std::move(b)));
        in_ch = kLayerCh[l];
    }
    deep_ch_ = kLayerCh[2];
}

const FeatureExtractor& FeatureExtractor::instance() {
    static FeatureExtractor ex;
    return ex;
}

std::vector<ad::Var> FeatureExtractor::pyramid_vars(const ad::Var& img) const {
    const Tensor& t = img->val;
    if (t.rank() != 4 || t.dim(1) != 3)
        throw std::invalid_argument("FeatureExtractor: expects (N,3,H,W)");
    if (t.dim(2) % 4 != 0 || t.dim(3) % 4 != 0)
        throw std::invalid_argument("FeatureExtractor: dims must be divisible by 4, got " +
                                    shape_str(t.shape));
    std::vector<ad::Var> out;
    ad::Var x = img;
    for (int l = 0; l < 3; ++l) {
        x = ad::tanh(ad::conv2d(x, weights_[static_cast<std::size_t>(l)],
                                biases_[static_cast<std::size_t>(l)], kLayerStride[l], 1,
                                ad::PadMode::zero));
        out.push_back(ad::channel_unit_norm(x));
    }
    return out;
}

FeaturePyramid FeatureExtractor::extract(const ErpImage& img) const {
    ad::NoGrad ng;
    FeaturePyramid p;
    for (const ad::Var& layer : pyramid_vars(ad::constant(image_to_tensor(img)))) {
        Tensor t({layer->val.dim(1), layer->val.dim(2), layer->val.dim(3)});
        t.v = layer->val.v;
        const int c = t.dim(0);
        p.layers.push_back(std::move(t));
        p.channel_weights.emplace_back(static_cast<std::size_t>(c), 1.0 / std::sqrt(static_cast<double>(c)));
    }
    return p;
}

std::vector<double> FeatureExtractor::pooled_features(const ErpImage& img) const {
    ad::NoGrad ng;
    const std::vector<ad::Var> pyr = pyramid_vars(ad::constant(image_to_tensor(img)));
    const Tensor& deep = pyr.back()->val;
    const int c = deep.dim(1), h = deep.dim(2), w = deep.dim(3);
    std::vector<double> pooled(static_cast<std::size_t>(c), 0.0);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) acc += deep.at(0, ch, y, x);
        pooled[static_cast<std::size_t>(ch)] = acc / (static_cast<double>(h) * w);
    }
    return pooled;
}

namespace {

void require_same_dims(const ad::Var& a, const ad::Var& b, const char* op) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

// || w_l . (a - b) ||^2 summed over channels = mean over channels of
// squared difference when w_l = 1/sqrt(C); computed as a per-position map
ad::Var channel_weighted_sqdiff(const ad::Var& a, const ad::Var& b) {
    ad::Var d = ad::sub(a, b);
    const int c = d->val.dim(1);
    return ad::scale(ad::square(d), 1.0 / static_cast<double>(c));
}

}  // namespace

ad::Var perceptual_from_pyramids(const std::vector<ad::Var>& pa, const std::vector<ad::Var>& pb) {
    if (pa.size() != pb.size() || pa.empty())
        throw std::invalid_argument("perceptual_from_pyramids: pyramid mismatch");
    ad::Var total = ad::scalar_var(0.0);
    for (std::size_t l = 0; l < pa.size(); ++l) {
        // mean over N,H,W of the channel-weighted squared difference; the
        // square map still carries the channel axis, so sum/(N*H*W) = C*mean
        ad::Var sq = channel_weighted_sqdiff(pa[l], pb[l]);
        const Tensor& t = sq->val;
        const double inv_hw = 1.0 / (static_cast<double>(t.dim(0)) * t.dim(2) * t.dim(3));
        total = ad::add(total, ad::scale(ad::sum(sq), inv_hw));
    }
    return total;
}

ad::Var ws_perceptual_from_pyramids(const std::vector<ad::Var>& pa, const std::vector<ad::Var>& pb,
                                    const std::vector<std::vector<double>>* row_weights_override) {
    if (pa.size() != pb.size() || pa.empty())
        throw std::invalid_argument("ws_perceptual_from_pyramids: pyramid mismatch");
    ad::Var total = ad::scalar_var(0.0);
    for (std::size_t l = 0; l < pa.size(); ++l) {
        ad::Var sq = channel_weighted_sqdiff(pa[l], pb[l]);
        const Tensor& t = sq->val;
        const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
        std::vector<double> roww;
        if (row_weights_override) {
            roww = (*row_weights_override)[l];
            if (static_cast<int>(roww.size()) != h)
                throw std::invalid_argument("ws_perceptual_from_pyramids: override size mismatch");
        } else {
            roww = make_latitude_weights(h).w;
        }
        double row_total = 0.0;
        for (double x : roww) row_total += x;
        Tensor wmap({n, c, h, w});
        for (int bn = 0; bn < n; ++bn)
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        wmap.at(bn, ch, y, x) = roww[static_cast<std::size_t>(y)];
        // the row weight is broadcast along u, so the weight mass over (u,v)
        // is W * sum_v w(v), accumulated once per batch item
        const double norm = 1.0 / (static_cast<double>(n) * w * row_total);
        total = ad::add(total, ad::scale(ad::sum(ad::mul(ad::constant(std::move(wmap)), sq)), norm));
    }
    return total;
}

ad::Var perceptual_loss(const ad::Var& a, const ad::Var& b) {
    require_same_dims(a, b, "perceptual_loss");
    const FeatureExtractor& ex = FeatureExtractor::instance();
    return perceptual_from_pyramids(ex.pyramid_vars(a), ex.pyramid_vars(b));
}

double perceptual_loss(const ErpImage& a, const ErpImage& b) {
    ad::NoGrad ng;
    return perceptual_loss(ad::constant(image_to_tensor(a)), ad::constant(image_to_tensor(b)))
        ->val.item();
}

ad::Var ws_perceptual_loss(const ad::Var& a, const ad::Var& b) {
    require_same_dims(a, b, "ws_perceptual_loss");
    const FeatureExtractor& ex = FeatureExtractor::instance();
    return ws_perceptual_from_pyramids(ex.pyramid_vars(a), ex.pyramid_vars(b));
}

double ws_perceptual_loss(const ErpImage& a, const ErpImage& b) {
    ad::NoGrad ng;
    return ws_perceptual_loss(ad::constant(image_to_tensor(a)), ad::constant(image_to_tensor(b)))
        ->val.item();
}

ad::Var ws_l1_loss(const ad::Var& a, const ad::Var& b) {
    require_same_dims(a, b, "ws_l1_loss");
    const Tensor& t = a->val;
    if (t.rank() != 4) throw std::invalid_argument("ws_l1_loss: expects NCHW");
    const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
    const LatitudeWeights lw = make_latitude_weights(h);
    Tensor wmap({n, c, h, w});
    for (int bn = 0; bn < n; ++bn)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) wmap.at(bn, ch, y, x) = lw.w[static_cast<std::size_t>(y)];
    const double norm = 1.0 / (static_cast<double>(n) * c * w * lw.total());
    return ad::scale(ad::sum(ad::mul(ad::constant(std::move(wmap)), ad::abs(ad::sub(a, b)))), norm);
}

double ws_l1_loss(const ErpImage& a, const ErpImage& b) {
    ad::NoGrad ng;
    return ws_l1_loss(ad::constant(image_to_tensor(a)), ad::constant(image_to_tensor(b)))->val.item();
}

FeatureStats FeatureStats::from_moments(std::vector<double> mu, std::vector<double> cov,
                                        std::int64_t count) {
    if (cov.size() != mu.size() * mu.size())
        throw std::invalid_argument("FeatureStats::from_moments: covariance size mismatch");
    FeatureStats s;
    s.mu = std::move(mu);
    s.cov = std::move(cov);
    s.count = count;
    return s;
}

FeatureAccumulator::FeatureAccumulator(int dim) : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("FeatureAccumulator: bad dim");
    sum_.assign(static_cast<std::size_t>(dim), 0.0);
    sum_outer_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
}

void FeatureAccumulator::add(const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != dim_)
        throw std::invalid_argument("FeatureAccumulator::add: dimension mismatch");
    ++n_;
    for (int i = 0; i < dim_; ++i) {
        sum_[static_cast<std::size_t>(i)] += x[static_cast<std::size_t>(i)];
        for (int j = 0; j < dim_; ++j)
            sum_outer_[static_cast<std::size_t>(i) * dim_ + j] +=
                x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
    }
}

FeatureStats FeatureAccumulator::finalize() const {
    if (n_ < 2) throw std::invalid_argument("FeatureAccumulator: need >= 2 samples");
    FeatureStats s;
    s.count = n_;
    s.mu.resize(static_cast<std::size_t>(dim_));
    s.cov.resize(static_cast<std::size_t>(dim_) * dim_);
    const double n = static_cast<double>(n_);
    for (int i = 0; i < dim_; ++i) s.mu[static_cast<std::size_t>(i)] = sum_[static_cast<std::size_t>(i)] / n;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) {
            const double e = sum_outer_[static_cast<std::size_t>(i) * dim_ + j] / n -
                             s.mu[static_cast<std::size_t>(i)] * s.mu[static_cast<std::size_t>(j)];
            s.cov[static_cast<std::size_t>(i) * dim_ + j] = e * n / (n - 1.0);
        }
    return s;
}

double frechet_distance(const FeatureStats& s1, const FeatureStats& s2) {
    const int d = s1.dim();
    if (d != s2.dim() || d < 1) throw std::invalid_argument("frechet_distance: dimension mismatch");
    if (s1.count < 2 || s2.count < 2) throw std::invalid_argument("frechet_distance: need >= 2 samples");

    using Mat = Eigen::MatrixXd;
    Mat c1 = Eigen::Map<const Mat>(s1.cov.data(), d, d);
    Mat c2 = Eigen::Map<const Mat>(s2.cov.data(), d, d);
    c1 = (c1 + c1.transpose().eval()) / 2.0;
    c2 = (c2 + c2.transpose().eval()) / 2.0;

    constexpr double kNegTol = -1e-8;
    auto sqrt_psd = [&](const Mat& m) {
        Eigen::SelfAdjointEigenSolver<Mat> es(m);
        Eigen::VectorXd ev = es.eigenvalues();
        for (int i = 0; i < ev.size(); ++i) {
            if (ev[i] < kNegTol)
                throw std::invalid_argument("frechet_distance: covariance not PSD within tolerance");
            ev[i] = std::sqrt(std::max(ev[i], 0.0));
        }
        return Mat(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    };

    // tr((S1 S2)^{1/2}) = tr((sqrt(S1) S2 sqrt(S1))^{1/2}) for PSD inputs
    const Mat r1 = sqrt_psd(c1);
    Mat inner = r1 * c2 * r1;
    inner = (inner + inner.transpose().eval()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(inner);
    double tr_sqrt = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev < kNegTol) throw std::invalid_argument("frechet_distance: product not PSD within tolerance");
        tr_sqrt += std::sqrt(std::max(ev, 0.0));
    }

    double mu_d2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dd = s1.mu[static_cast<std::size_t>(i)] - s2.mu[static_cast<std::size_t>(i)];
        mu_d2 += dd * dd;
    }
    return mu_d2 + c1.trace() + c2.trace() - 2.0 * tr_sqrt;
}

double diversity_score(const std::vector<ErpImage>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("diversity_score: need >= 2 samples");
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            acc += perceptual_loss(samples[i], samples[j]);
            ++pairs;
        }
    return acc / pairs;
}

double seam_discontinuity(const ErpImage& img) {
    if (img.w < 2) throw std::invalid_argument("seam_discontinuity: needs W >= 2");
    auto col_mad = [&](int xa, int xb) {
        double acc = 0.0;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < img.h; ++y) acc += std::fabs(img.at(c, y, xa) - img.at(c, y, xb));
        return acc / (3.0 * img.h);
    };
    const double seam = col_mad(img.w - 1, 0);
    double interior = 0.0;
    for (int x = 0; x + 1 < img.w; ++x) interior += col_mad(x, x + 1);
    interior /= (img.w - 1);
    return seam - interior;
}

}  // namespace pano
