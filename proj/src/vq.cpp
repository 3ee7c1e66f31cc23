#include "pano/vq.hpp"

#include <stdexcept>

namespace pano {

Codebook make_codebook(int entries, int dim, ad::Var embed) {
    if (entries < 2) throw std::invalid_argument("make_codebook: need K >= 2");
    if (embed->val.rank() != 2 || embed->val.dim(0) != entries || embed->val.dim(1) != dim)
        throw std::invalid_argument("make_codebook: embed shape mismatch");
    Codebook cb;
    cb.embed = std::move(embed);
    cb.usage.assign(static_cast<std::size_t>(entries), 0);
    return cb;
}

TokenGrid::TokenGrid(int height, int width, int fill) : h(height), w(width) {
    if (height < 1 || width < 1) throw std::invalid_argument("TokenGrid: bad dims");
    idx.assign(static_cast<std::size_t>(height) * width, fill);
}

TokenMask::TokenMask(int height, int width, bool fill) : h(height), w(width) {
    if (height < 1 || width < 1) throw std::invalid_argument("TokenMask: bad dims");
    known.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

namespace {

int nearest_entry(const Tensor& features, int n, int y, int x, const Tensor& embed) {
    const int nz = features.dim(1);
    const int k = embed.dim(0);
    int best = 0;
    double best_d = 0.0;
    for (int e = 0; e < k; ++e) {
        double d = 0.0;
        for (int c = 0; c < nz; ++c) {
            const double diff = features.at(n, c, y, x) - embed.at(e, c);
            d += diff * diff;
        }
        if (e == 0 || d < best_d) {  // strict <: lowest index wins ties
            best = e;
            best_d = d;
        }
    }
    return best;
}

}  // namespace

QuantizeResult quantize(const ad::Var& features, Codebook& cb, double beta) {
    const Tensor& f = features->val;
    if (f.rank() != 4) throw std::invalid_argument("quantize: features must be (N,n_z,h,w)");
    if (f.dim(1) != cb.dim())
        throw std::invalid_argument("quantize: feature dim " + std::to_string(f.dim(1)) +
                                    " does not match codebook dim " + std::to_string(cb.dim()));
    if (cb.entries() < 1) throw std::invalid_argument("quantize: empty codebook");
    const int n = f.dim(0), nz = f.dim(1), h = f.dim(2), w = f.dim(3);

    QuantizeResult out;
    out.grids.reserve(static_cast<std::size_t>(n));
    std::vector<int> flat_ids;
    flat_ids.reserve(static_cast<std::size_t>(n) * h * w);
    for (int b = 0; b < n; ++b) {
        TokenGrid g(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int e = nearest_entry(f, b, y, x, cb.embed->val);
                g.at(y, x) = e;
                flat_ids.push_back(e);
                cb.usage[static_cast<std::size_t>(e)]++;
            }
        out.grids.push_back(std::move(g));
    }

    // table lookup arranged back into (N,n_z,h,w); gradients reach the
    // codebook through this path only via the vq loss below
    ad::Var rows = ad::gather_rows(cb.embed, flat_ids);  // (N*h*w, n_z)
    Tensor arranged({n, nz, h, w});
    for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t r = (static_cast<std::size_t>(b) * h + y) * w + x;
                for (int c = 0; c < nz; ++c)
                    arranged.at(b, c, y, x) = rows->val.v[r * nz + static_cast<std::size_t>(c)];
            }
    ad::Var zq_lookup = ad::make_var(std::move(arranged), rows->requires_grad);
    if (zq_lookup->requires_grad) {
        zq_lookup->parents = {rows};
        ad::Node* prows = rows.get();
        zq_lookup->backprop = [prows, n, nz, h, w](ad::Node& self) {
            if (!prows->requires_grad) return;
            prows->ensure_grad();
            for (int b = 0; b < n; ++b)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const std::size_t r = (static_cast<std::size_t>(b) * h + y) * w + x;
                        for (int c = 0; c < nz; ++c)
                            prows->grad.v[r * nz + static_cast<std::size_t>(c)] +=
                                self.grad.at(b, c, y, x);
                    }
        };
    }

    out.quantized = ad::straight_through(features, zq_lookup);
    out.codebook_loss = ad::mean(ad::square(ad::sub(ad::detach(features), zq_lookup)));
    out.commitment_loss = ad::mean(ad::square(ad::sub(features, ad::detach(zq_lookup))));
    out.vq_loss = ad::add(out.codebook_loss, ad::scale(out.commitment_loss, beta));
    return out;
}

TokenGrid quantize_plain(const Tensor& features, const Codebook& cb) {
    if (features.rank() != 3) throw std::invalid_argument("quantize_plain: features must be (n_z,h,w)");
    if (features.dim(0) != cb.dim()) throw std::invalid_argument("quantize_plain: feature dim mismatch");
    Tensor batched({1, features.dim(0), features.dim(1), features.dim(2)});
    batched.v = features.v;
    TokenGrid g(features.dim(1), features.dim(2));
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) g.at(y, x) = nearest_entry(batched, 0, y, x, cb.embed->val);
    return g;
}

Tensor dequantize(const TokenGrid& grid, const Codebook& cb) {
    const int k = cb.entries(), nz = cb.dim();
    Tensor out({nz, grid.h, grid.w});
    for (int y = 0; y < grid.h; ++y)
        for (int x = 0; x < grid.w; ++x) {
            const int e = grid.at(y, x);
            if (e < 0 || e >= k)
                throw std::out_of_range("dequantize: index " + std::to_string(e) + " out of range");
            for (int c = 0; c < nz; ++c) out.at(c, y, x) = cb.embed->val.at(e, c);
        }
    return out;
}

TokenSequence grid_to_sequence(const TokenGrid& grid, const TokenMask& known) {
    if (grid.h != known.h || grid.w != known.w)
        throw std::invalid_argument("grid_to_sequence: mask dims must equal grid dims");
    TokenSequence seq;
    seq.grid_h = grid.h;
    seq.grid_w = grid.w;
    for (int y = 0; y < grid.h; ++y)
        for (int x = 0; x < grid.w; ++x) {
            const int pos = y * grid.w + x;
            if (known.at(y, x)) {
                seq.cond.push_back(grid.at(y, x));
                seq.cond_pos.push_back(pos);
            } else {
                seq.target.push_back(grid.at(y, x));
                seq.target_pos.push_back(pos);
            }
        }
    return seq;
}

TokenGrid sequence_to_grid(const TokenSequence& seq) {
    TokenGrid g(seq.grid_h, seq.grid_w);
    for (std::size_t i = 0; i < seq.cond.size(); ++i)
        g.idx[static_cast<std::size_t>(seq.cond_pos[i])] = seq.cond[i];
    for (std::size_t i = 0; i < seq.target.size(); ++i)
        g.idx[static_cast<std::size_t>(seq.target_pos[i])] = seq.target[i];
    return g;
}

}  // namespace pano
