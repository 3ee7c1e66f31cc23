#include "pano/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace pano {

ad::Var ParameterSet::add(const std::string& name, Tensor init) {
    if (params_.count(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
    ad::Var v = ad::param(std::move(init));
    params_[name] = v;
    return v;
}

ad::Var ParameterSet::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("ParameterSet: no parameter " + name);
    return it->second;
}

void ParameterSet::zero_grads() {
    for (auto& [name, v] : params_) v->zero_grad();
}

const std::pair<Tensor, Tensor>& ParameterSet::moments(const std::string& name) const {
    auto it = moments_.find(name);
    if (it == moments_.end()) throw std::out_of_range("ParameterSet: no moments for " + name);
    return it->second;
}

std::int64_t ParameterSet::param_count() const {
    std::int64_t n = 0;
    for (const auto& [name, v] : params_) n += v->val.numel();
    return n;
}

AdamReport ParameterSet::adam_step(const AdamConfig& cfg) {
    AdamReport rep;
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (auto& [name, v] : params_) {
        auto& [m, vel] = moments_[name];
        if (m.v.size() != v->val.v.size()) {
            m = Tensor(v->val.shape.empty() ? std::vector<int>{} : v->val.shape);
            vel = m;
            if (v->val.shape.empty()) {
                m.v.assign(1, 0.0);
                vel.v.assign(1, 0.0);
            }
        }
        v->ensure_grad();
        bool finite = true;
        for (double g : v->grad.v) {
            if (!std::isfinite(g)) {
                finite = false;
                break;
            }
        }
        if (!finite) {
            if (cfg.hard_error_nonfinite)
                throw std::runtime_error("adam_step: non-finite gradient for " + name);
            rep.skipped++;
            rep.skipped_names.push_back(name);
            continue;
        }
        for (std::size_t i = 0; i < v->val.v.size(); ++i) {
            const double g = v->grad.v[i];
            m.v[i] = cfg.beta1 * m.v[i] + (1.0 - cfg.beta1) * g;
            vel.v[i] = cfg.beta2 * vel.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m.v[i] / bc1;
            const double vhat = vel.v[i] / bc2;
            v->val.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        rep.updated++;
    }
    return rep;
}

std::map<std::string, Tensor> ParameterSet::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, v] : params_) out[name] = v->val;
    return out;
}

void ParameterSet::load(const std::map<std::string, Tensor>& tensors) {
    for (auto& [name, v] : params_) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::runtime_error("ParameterSet::load: missing " + name);
        if (it->second.shape != v->val.shape)
            throw std::runtime_error("ParameterSet::load: shape mismatch for " + name);
        v->val = it->second;
    }
}

Tensor init_normal(const std::vector<int>& shape, double stdev, Rng& rng) {
    Tensor t(shape);
    for (double& x : t.v) x = stdev * rng.normal();
    return t;
}

Tensor init_conv(int oc, int ic, int kh, int kw, Rng& rng) {
    const double stdev = std::sqrt(2.0 / (ic * kh * kw));
    return init_normal({oc, ic, kh, kw}, stdev, rng);
}

Tensor init_linear(int ci, int co, Rng& rng) {
    const double stdev = std::sqrt(1.0 / ci);
    return init_normal({ci, co}, stdev, rng);
}

Tensor init_zeros(const std::vector<int>& shape) { return Tensor(shape, 0.0); }
Tensor init_ones(const std::vector<int>& shape) { return Tensor(shape, 1.0); }

BlockParams make_block(ParameterSet& ps, const std::string& prefix, int dim, int heads,
                       int context_len, Rng& rng) {
    BlockParams p;
    p.heads = heads;
    p.context_len = context_len;
    p.ln1_g = ps.add(prefix + ".ln1.g", init_ones({dim}));
    p.ln1_b = ps.add(prefix + ".ln1.b", init_zeros({dim}));
    p.wq = ps.add(prefix + ".attn.wq", init_linear(dim, dim, rng));
    p.bq = ps.add(prefix + ".attn.bq", init_zeros({dim}));
    p.wk = ps.add(prefix + ".attn.wk", init_linear(dim, dim, rng));
    p.bk = ps.add(prefix + ".attn.bk", init_zeros({dim}));
    p.wv = ps.add(prefix + ".attn.wv", init_linear(dim, dim, rng));
    p.bv = ps.add(prefix + ".attn.bv", init_zeros({dim}));
    p.wo = ps.add(prefix + ".attn.wo", init_linear(dim, dim, rng));
    p.bo = ps.add(prefix + ".attn.bo", init_zeros({dim}));
    p.ln2_g = ps.add(prefix + ".ln2.g", init_ones({dim}));
    p.ln2_b = ps.add(prefix + ".ln2.b", init_zeros({dim}));
    p.w1 = ps.add(prefix + ".ffn.w1", init_linear(dim, 4 * dim, rng));
    p.b1 = ps.add(prefix + ".ffn.b1", init_zeros({4 * dim}));
    p.w2 = ps.add(prefix + ".ffn.w2", init_linear(4 * dim, dim, rng));
    p.b2 = ps.add(prefix + ".ffn.b2", init_zeros({dim}));
    return p;
}

ad::Var attention_block(const ad::Var& x, const BlockParams& p, bool causal) {
    if (x->val.rank() != 2) throw std::invalid_argument("attention_block: expects (T,C)");
    if (p.context_len > 0 && x->val.dim(0) > p.context_len)
        throw std::invalid_argument("attention_block: sequence length " +
                                    std::to_string(x->val.dim(0)) + " exceeds context length " +
                                    std::to_string(p.context_len));
    ad::Var h = ad::layer_norm(x, p.ln1_g, p.ln1_b);
    ad::Var q = ad::linear(h, p.wq, p.bq);
    ad::Var k = ad::linear(h, p.wk, p.bk);
    ad::Var v = ad::linear(h, p.wv, p.bv);
    ad::Var a = ad::causal_attention(q, k, v, p.heads, causal);
    ad::Var x1 = ad::add(x, ad::linear(a, p.wo, p.bo));
    ad::Var h2 = ad::layer_norm(x1, p.ln2_g, p.ln2_b);
    ad::Var f = ad::linear(ad::gelu(ad::linear(h2, p.w1, p.b1)), p.w2, p.b2);
    return ad::add(x1, f);
}

}  // namespace pano
