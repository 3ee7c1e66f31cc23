#include "pano/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pano/rng.hpp"

namespace pano {

SceneModel make_scene_model(const SceneModelConfig& cfg, std::uint64_t seed) {
    if (cfg.vocab < 2 || cfg.dim < cfg.heads || cfg.blocks < 1 || cfg.context < 2)
        throw std::invalid_argument("make_scene_model: bad config");
    SceneModel m;
    m.cfg = cfg;
    Rng rng(seed);
    m.tok_emb = m.params.add("tok_emb", init_normal({cfg.vocab + 1, cfg.dim}, 0.02, rng));
    m.pos_emb = m.params.add("pos_emb", init_normal({cfg.context, cfg.dim}, 0.02, rng));
    for (int b = 0; b < cfg.blocks; ++b)
        m.blocks.push_back(make_block(m.params, "block" + std::to_string(b), cfg.dim, cfg.heads,
                                      cfg.context, rng));
    m.lnf_g = m.params.add("lnf.g", init_ones({cfg.dim}));
    m.lnf_b = m.params.add("lnf.b", init_zeros({cfg.dim}));
    m.head_w = m.params.add("head.w", init_linear(cfg.dim, cfg.vocab, rng));
    m.head_b = m.params.add("head.b", init_zeros({cfg.vocab}));
    return m;
}

ad::Var scene_logits(const SceneModel& m, const std::vector<int>& tokens) {
    const int t = static_cast<int>(tokens.size());
    if (t < 1) throw std::invalid_argument("scene_logits: empty sequence");
    if (t > m.cfg.context)
        throw std::invalid_argument("scene_logits: sequence length " + std::to_string(t) +
                                    " exceeds context length " + std::to_string(m.cfg.context) +
                                    "; the caller must window");
    for (int tok : tokens)
        if (tok < 0 || tok > m.cfg.vocab)
            throw std::out_of_range("scene_logits: token id out of range");
    std::vector<int> pos(tokens.size());
    for (int i = 0; i < t; ++i) pos[static_cast<std::size_t>(i)] = i;
    ad::Var x = ad::add(ad::gather_rows(m.tok_emb, tokens), ad::gather_rows(m.pos_emb, pos));
    for (const BlockParams& b : m.blocks) x = attention_block(x, b, true);
    x = ad::layer_norm(x, m.lnf_g, m.lnf_b);
    return ad::linear(x, m.head_w, m.head_b);
}

namespace {

std::vector<int> full_stream(const SceneModel& m, const std::vector<int>& cond,
                             const std::vector<int>& target, std::size_t n_target) {
    std::vector<int> toks;
    toks.reserve(1 + cond.size() + n_target);
    toks.push_back(m.unknown_token());  // start marker
    toks.insert(toks.end(), cond.begin(), cond.end());
    toks.insert(toks.end(), target.begin(), target.begin() + static_cast<std::ptrdiff_t>(n_target));
    return toks;
}

}  // namespace

std::vector<double> next_token_logits(const SceneModel& m, const TokenSequence& prefix) {
    ad::NoGrad ng;
    const std::vector<int> toks = full_stream(m, prefix.cond, prefix.target, prefix.target.size());
    ad::Var logits = scene_logits(m, toks);
    const int last = logits->val.dim(0) - 1;
    std::vector<double> out(static_cast<std::size_t>(m.cfg.vocab));
    for (int k = 0; k < m.cfg.vocab; ++k) out[static_cast<std::size_t>(k)] = logits->val.at(last, k);
    return out;
}

ad::Var transformer_nll_var(const SceneModel& m, const TokenSequence& seq) {
    if (seq.target.empty()) throw std::invalid_argument("transformer_nll: empty target sequence");
    const std::vector<int> toks = full_stream(m, seq.cond, seq.target, seq.target.size());
    ad::Var logits = scene_logits(m, toks);
    const int mlen = static_cast<int>(seq.cond.size());
    std::vector<int> positions(seq.target.size());
    for (std::size_t i = 0; i < seq.target.size(); ++i)
        positions[i] = mlen + static_cast<int>(i);  // predictor of target i
    return ad::softmax_xent_at(logits, positions, seq.target);
}

double transformer_nll(const SceneModel& m, const TokenSequence& seq) {
    ad::NoGrad ng;
    return transformer_nll_var(m, seq)->val.item();
}

// ---------------------------------------------------------------------------
// incremental evaluator
// ---------------------------------------------------------------------------

SceneEvaluator::SceneEvaluator(const SceneModel& m) : m_(m) {
    kcache_.resize(static_cast<std::size_t>(m.cfg.blocks));
    vcache_.resize(static_cast<std::size_t>(m.cfg.blocks));
}

void SceneEvaluator::reset() {
    stream_.clear();
    for (auto& k : kcache_) k.clear();
    for (auto& v : vcache_) v.clear();
    cached_ = 0;
}

bool SceneEvaluator::truncate(int len) {
    if (len < 0 || len > static_cast<int>(stream_.size())) return false;
    if (cached_ != static_cast<int>(stream_.size())) return false;  // windowed
    stream_.resize(static_cast<std::size_t>(len));
    const std::size_t cache_len = static_cast<std::size_t>(len) * m_.cfg.dim;
    for (auto& k : kcache_) k.resize(cache_len);
    for (auto& v : vcache_) v.resize(cache_len);
    cached_ = len;
    return true;
}

namespace {

// identical arithmetic to ad::linear for one row: out = b + sum_k x[k]*W[k,:]
void matvec(const std::vector<double>& x, const Tensor& w, const Tensor& b, double* out) {
    const int ci = w.dim(0), co = w.dim(1);
    for (int j = 0; j < co; ++j) out[j] = b.v[static_cast<std::size_t>(j)];
    for (int k = 0; k < ci; ++k) {
        const double xv = x[static_cast<std::size_t>(k)];
        const double* wr = &w.v[static_cast<std::size_t>(k) * co];
        for (int j = 0; j < co; ++j) out[j] += xv * wr[j];
    }
}

// identical arithmetic to ad::layer_norm for one row
void ln_row(const std::vector<double>& x, const Tensor& g, const Tensor& b, double eps,
            std::vector<double>& out) {
    const int c = static_cast<int>(x.size());
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += x[static_cast<std::size_t>(j)];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
        const double d = x[static_cast<std::size_t>(j)] - mu;
        var += d * d;
    }
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    out.resize(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j)
        out[static_cast<std::size_t>(j)] =
            g.v[static_cast<std::size_t>(j)] * ((x[static_cast<std::size_t>(j)] - mu) * is) +
            b.v[static_cast<std::size_t>(j)];
}

double gelu_scalar(double x) {
    constexpr double k = 0.7978845608028654;
    const double t = std::tanh(k * (x + 0.044715 * x * x * x));
    return 0.5 * x * (1.0 + t);
}

}  // namespace

std::vector<double> SceneEvaluator::eval_position(int token, int pos) {
    const int dim = m_.cfg.dim;
    const int heads = m_.cfg.heads;
    const int dh = dim / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j)
        x[static_cast<std::size_t>(j)] = m_.tok_emb->val.at(token, j) + m_.pos_emb->val.at(pos, j);

    std::vector<double> h, q(static_cast<std::size_t>(dim)), attn_out(static_cast<std::size_t>(dim));
    std::vector<double> ff1(static_cast<std::size_t>(4 * dim)), ff2(static_cast<std::size_t>(dim));
    for (int bi = 0; bi < m_.cfg.blocks; ++bi) {
        const BlockParams& b = m_.blocks[static_cast<std::size_t>(bi)];
        ln_row(x, b.ln1_g->val, b.ln1_b->val, 1e-5, h);
        auto& kc = kcache_[static_cast<std::size_t>(bi)];
        auto& vc = vcache_[static_cast<std::size_t>(bi)];
        const std::size_t base = kc.size();
        kc.resize(base + static_cast<std::size_t>(dim));
        vc.resize(base + static_cast<std::size_t>(dim));
        matvec(h, b.wq->val, b.bq->val, q.data());
        matvec(h, b.wk->val, b.bk->val, &kc[base]);
        matvec(h, b.wv->val, b.bv->val, &vc[base]);
        const int t = static_cast<int>(kc.size()) / dim;  // positions cached so far
        std::vector<double> scores(static_cast<std::size_t>(t));
        for (int hd = 0; hd < heads; ++hd) {
            const int off = hd * dh;
            double mx = -1e300;
            for (int j = 0; j < t; ++j) {
                double s = 0.0;
                const double* kr = &kc[static_cast<std::size_t>(j) * dim + off];
                for (int d = 0; d < dh; ++d) s += q[static_cast<std::size_t>(off + d)] * kr[d];
                s *= sc;
                scores[static_cast<std::size_t>(j)] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (int j = 0; j < t; ++j) {
                const double e = std::exp(scores[static_cast<std::size_t>(j)] - mx);
                scores[static_cast<std::size_t>(j)] = e;
                z += e;
            }
            const double iz = 1.0 / z;
            for (int j = 0; j < t; ++j) scores[static_cast<std::size_t>(j)] *= iz;
            for (int d = 0; d < dh; ++d) {
                double acc = 0.0;
                for (int j = 0; j < t; ++j)
                    acc += scores[static_cast<std::size_t>(j)] * vc[static_cast<std::size_t>(j) * dim + off + d];
                attn_out[static_cast<std::size_t>(off + d)] = acc;
            }
        }
        std::vector<double> proj(static_cast<std::size_t>(dim));
        matvec(attn_out, b.wo->val, b.bo->val, proj.data());
        for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] += proj[static_cast<std::size_t>(j)];
        ln_row(x, b.ln2_g->val, b.ln2_b->val, 1e-5, h);
        matvec(h, b.w1->val, b.b1->val, ff1.data());
        for (double& e : ff1) e = gelu_scalar(e);
        matvec(ff1, b.w2->val, b.b2->val, ff2.data());
        for (int j = 0; j < dim; ++j) x[static_cast<std::size_t>(j)] += ff2[static_cast<std::size_t>(j)];
    }
    ln_row(x, m_.lnf_g->val, m_.lnf_b->val, 1e-5, h);
    std::vector<double> logits(static_cast<std::size_t>(m_.cfg.vocab));
    matvec(h, m_.head_w->val, m_.head_b->val, logits.data());
    return logits;
}

std::vector<double> SceneEvaluator::push(int token) {
    if (token < 0 || token > m_.cfg.vocab) throw std::out_of_range("SceneEvaluator: token out of range");
    stream_.push_back(token);
    const int ctx = m_.cfg.context;
    if (static_cast<int>(stream_.size()) <= ctx && cached_ == static_cast<int>(stream_.size()) - 1) {
        ++cached_;
        return eval_position(token, cached_ - 1);
    }
    // window to the most recent context-length tokens and recompute
    const int start = std::max(0, static_cast<int>(stream_.size()) - ctx);
    for (auto& k : kcache_) k.clear();
    for (auto& v : vcache_) v.clear();
    cached_ = 0;
    std::vector<double> logits;
    for (int i = start; i < static_cast<int>(stream_.size()); ++i) {
        logits = eval_position(stream_[static_cast<std::size_t>(i)], i - start);
        ++cached_;
    }
    return logits;
}

// ---------------------------------------------------------------------------
// samplers
// ---------------------------------------------------------------------------

namespace {

int sample_from_logits(const std::vector<double>& logits, const SamplerConfig& cfg, Rng& rng,
                       double* entropy_out) {
    const int k = static_cast<int>(logits.size());
    int top_k = cfg.top_k;
    if (top_k <= 0 || top_k > k) top_k = k;
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (logits[static_cast<std::size_t>(a)] != logits[static_cast<std::size_t>(b)])
            return logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(b)];
        return a < b;
    });
    if (top_k == 1) {
        if (entropy_out) *entropy_out = 0.0;
        return order[0];
    }
    std::vector<double> p(static_cast<std::size_t>(top_k));
    const double mx = logits[static_cast<std::size_t>(order[0])];
    double z = 0.0;
    for (int i = 0; i < top_k; ++i) {
        const double e = std::exp((logits[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] - mx) /
                                  cfg.temperature);
        p[static_cast<std::size_t>(i)] = e;
        z += e;
    }
    double entropy = 0.0;
    for (int i = 0; i < top_k; ++i) {
        p[static_cast<std::size_t>(i)] /= z;
        const double pi = p[static_cast<std::size_t>(i)];
        if (pi > 0.0) entropy -= pi * std::log(pi);
    }
    if (entropy_out) *entropy_out = entropy;
    const double u = rng.uniform01();
    double acc = 0.0;
    for (int i = 0; i < top_k; ++i) {
        acc += p[static_cast<std::size_t>(i)];
        if (u < acc) return order[static_cast<std::size_t>(i)];
    }
    return order[static_cast<std::size_t>(top_k - 1)];
}

void validate_sampling_grid(const SceneModel& m, const TokenGrid& grid) {
    for (int tok : grid.idx)
        if (tok < 0 || tok > m.cfg.vocab)
            throw std::out_of_range("sampler: grid token out of range");
}

// raster sampling of every cell equal to the reserved marker, in place
void sample_unknowns(const SceneModel& m, TokenGrid& grid, const SamplerConfig& cfg, Rng& rng,
                     std::vector<TraceEntry>* trace,
                     const std::function<void(int row)>& on_row_done) {
    const int unk = m.unknown_token();
    bool any_unknown = false;
    for (int tok : grid.idx)
        if (tok == unk) {
            any_unknown = true;
            break;
        }
    if (!any_unknown) return;

    // stream = [start, conditions..., sampled targets...]; conditions are all
    // known cells in raster order, targets grow as cells are sampled
    SceneEvaluator ev(m);
    std::vector<double> logits = ev.push(unk);
    for (int i = 0; i < grid.h * grid.w; ++i)
        if (grid.idx[static_cast<std::size_t>(i)] != unk)
            logits = ev.push(grid.idx[static_cast<std::size_t>(i)]);

    std::vector<int> sampled_positions;
    bool dirty = false;
    for (int y = 0; y < grid.h; ++y) {
        if (dirty) {
            // a replacement edited already-streamed targets; resume from the
            // first changed position (full replay only if windowing blocked it)
            std::vector<int> desired;
            desired.reserve(1 + static_cast<std::size_t>(grid.h) * grid.w);
            desired.push_back(unk);
            for (int i = 0; i < grid.h * grid.w; ++i)
                if (grid.idx[static_cast<std::size_t>(i)] != unk &&
                    !std::binary_search(sampled_positions.begin(), sampled_positions.end(), i))
                    desired.push_back(grid.idx[static_cast<std::size_t>(i)]);
            for (int pos : sampled_positions)
                desired.push_back(grid.idx[static_cast<std::size_t>(pos)]);
            std::size_t lcp = 0;
            while (lcp < desired.size() && lcp < ev.stream().size() &&
                   desired[lcp] == ev.stream()[lcp])
                ++lcp;
            if (!ev.truncate(static_cast<int>(lcp))) {
                ev.reset();
                lcp = 0;
            }
            for (std::size_t i = lcp; i < desired.size(); ++i) logits = ev.push(desired[i]);
            dirty = false;
        }
        for (int x = 0; x < grid.w; ++x) {
            if (grid.at(y, x) != unk) continue;
            double entropy = 0.0;
            const int chosen = sample_from_logits(logits, cfg, rng, &entropy);
            grid.at(y, x) = chosen;
            sampled_positions.push_back(y * grid.w + x);
            if (trace) trace->push_back({y * grid.w + x, chosen, entropy});
            logits = ev.push(chosen);
        }
        if (on_row_done) {
            const TokenGrid before = grid;
            on_row_done(y);
            if (!(grid == before)) dirty = true;
        }
    }
}

}  // namespace

std::string trace_to_ndjson(const std::vector<TraceEntry>& trace) {
    std::ostringstream os;
    for (const TraceEntry& e : trace)
        os << "{\"pos\":" << e.grid_pos << ",\"token\":" << e.chosen << ",\"entropy\":" << e.entropy
           << "}\n";
    return os.str();
}

TokenGrid sample_raster(const SceneModel& m, const TokenGrid& grid, const SamplerConfig& cfg,
                        SampleDetail* detail) {
    if (cfg.temperature <= 0.0) throw std::invalid_argument("sample_raster: temperature must be > 0");
    validate_sampling_grid(m, grid);
    TokenGrid out = grid;
    Rng rng(cfg.seed);
    std::vector<TraceEntry> trace;
    sample_unknowns(m, out, cfg, rng, cfg.record_trace && detail ? &trace : nullptr, nullptr);
    if (detail) detail->trace = std::move(trace);
    return out;
}

TokenGrid sample_circular(const SceneModel& m, const TokenGrid& grid, const SamplerConfig& cfg,
                          SampleDetail* detail) {
    if (cfg.temperature <= 0.0) throw std::invalid_argument("sample_circular: temperature must be > 0");
    if (cfg.w_p < 1 || 2 * cfg.w_p > grid.w)
        throw std::invalid_argument("sample_circular: w_p must satisfy 0 < w_p <= w/2");
    validate_sampling_grid(m, grid);
    const int wp = cfg.w_p;
    const int wq = grid.w;
    const int wext = wq + 2 * wp;

    // duplicate both ends on the opposite side; unknown markers duplicate too
    TokenGrid ext(grid.h, wext);
    for (int y = 0; y < grid.h; ++y)
        for (int j = 0; j < wext; ++j) {
            int src;
            if (j < wp)
                src = wq - wp + j;  // leading block mirrors the right end
            else if (j < wp + wq)
                src = j - wp;       // original content
            else
                src = j - wp - wq;  // trailing block mirrors the left end
            ext.at(y, j) = grid.at(y, src);
        }

    Rng rng(cfg.seed);
    std::vector<TraceEntry> trace;
    TokenGrid estimates;  // sampled values before any replacement
    const int unk = m.unknown_token();

    auto replace_row = [&](int y) {
        for (int j = 0; j < wext; ++j) estimates.at(y, j) = ext.at(y, j);
        for (int t = 0; t < wp; ++t) {
            // left end of the original width <- trailing extension estimate
            if (grid.at(y, t) == unk) ext.at(y, wp + t) = estimates.at(y, wp + wq + t);
            if (cfg.replace == SamplerConfig::Replace::both_ends) {
                // right end <- leading extension estimate
                if (grid.at(y, wq - wp + t) == unk) ext.at(y, wq + t) = estimates.at(y, t);
            }
        }
    };

    estimates = ext;  // pre-sampling duplicates; rows refresh as they complete
    sample_unknowns(m, ext, cfg, rng, cfg.record_trace && detail ? &trace : nullptr, replace_row);

    TokenGrid out(grid.h, wq);
    for (int y = 0; y < grid.h; ++y)
        for (int x = 0; x < wq; ++x) out.at(y, x) = ext.at(y, wp + x);

    // known cells are never modified (the duplicated copies are value-equal)
    for (int y = 0; y < grid.h; ++y)
        for (int x = 0; x < wq; ++x)
            if (grid.at(y, x) != unk && out.at(y, x) != grid.at(y, x))
                throw std::logic_error("sample_circular: known token was modified");

    if (detail) {
        detail->trace = std::move(trace);
        detail->extended_estimates = std::move(estimates);
        detail->extended_final = std::move(ext);
    }
    return out;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

TrainStats train_transformer(SceneModel& m, const std::vector<TokenSequence>& dataset,
                             const TransformerTrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train_transformer: empty dataset");
    TrainStats stats;
    if (cfg.steps == 0) return stats;
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces an initial shuffle

    for (int step = 0; step < cfg.steps; ++step) {
        m.params.zero_grads();
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            const TokenSequence& seq = dataset[order[cursor++]];
            ad::Var nll = transformer_nll_var(m, seq);
            loss_acc += nll->val.item();
            ad::backward(ad::scale(nll, 1.0 / cfg.batch));
        }
        const double loss = loss_acc / cfg.batch;
        if (step == 0) stats.initial_loss = loss;
        stats.loss_curve.push_back(loss);
        if (loss > stats.initial_loss * cfg.divergence_factor || !std::isfinite(loss)) {
            std::ostringstream os;
            os << "train_transformer: diverged at step " << step << " (loss " << loss
               << ", initial " << stats.initial_loss << ")";
            throw std::runtime_error(os.str());
        }
        m.params.adam_step(cfg.adam);
    }
    stats.final_loss = stats.loss_curve.back();
    return stats;
}

}  // namespace pano
