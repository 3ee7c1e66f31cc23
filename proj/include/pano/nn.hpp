#pragma once

#include <map>
#include <string>
#include <vector>

#include "pano/autodiff.hpp"
#include "pano/rng.hpp"

namespace pano {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // non-finite gradients are skipped and reported unless this is set
    bool hard_error_nonfinite = false;
};

struct AdamReport {
    int updated = 0;
    int skipped = 0;
    std::vector<std::string> skipped_names;
};

// Named parameters plus per-parameter Adam moments. Iteration order is the
// lexicographic name order, which fixes the update and serialization order.
class ParameterSet {
  public:
    ad::Var add(const std::string& name, Tensor init);
    ad::Var get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }

    void zero_grads();
    AdamReport adam_step(const AdamConfig& cfg);

    const std::map<std::string, ad::Var>& all() const { return params_; }
    std::int64_t param_count() const;
    std::int64_t step_count() const { return step_; }

    // moments exist (and match shapes) only after the first adam_step
    bool has_moments(const std::string& name) const { return moments_.count(name) > 0; }
    const std::pair<Tensor, Tensor>& moments(const std::string& name) const;

    std::map<std::string, Tensor> snapshot() const;
    void load(const std::map<std::string, Tensor>& tensors);

  private:
    std::map<std::string, ad::Var> params_;
    std::map<std::string, std::pair<Tensor, Tensor>> moments_;
    std::int64_t step_ = 0;
};

// weight initializers
Tensor init_normal(const std::vector<int>& shape, double stdev, Rng& rng);
Tensor init_conv(int oc, int ic, int kh, int kw, Rng& rng);   // He-style fan-in scaling
Tensor init_linear(int ci, int co, Rng& rng);
Tensor init_zeros(const std::vector<int>& shape);
Tensor init_ones(const std::vector<int>& shape);

// One pre-norm transformer block: x + attn(ln1(x)) then x + ffn(ln2(x)).
// Throws if the sequence exceeds context_len.
struct BlockParams {
    ad::Var ln1_g, ln1_b;
    ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Var ln2_g, ln2_b;
    ad::Var w1, b1, w2, b2;
    int heads = 1;
    int context_len = 0;
};

BlockParams make_block(ParameterSet& ps, const std::string& prefix, int dim, int heads,
                       int context_len, Rng& rng);
ad::Var attention_block(const ad::Var& x, const BlockParams& p, bool causal);

}  // namespace pano
