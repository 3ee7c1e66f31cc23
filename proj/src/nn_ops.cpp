#include <cmath>
#include <cstring>
#include <stdexcept>

#include "pano/autodiff.hpp"

namespace pano::ad {

namespace {

Var unary(const Var& a, Tensor out, std::function<void(Node&, Node&)> bwd) {
    Var r = make_var(std::move(out), a->requires_grad);
    if (r->requires_grad) {
        r->parents = {a};
        Node* pa = a.get();
        r->backprop = [pa, bwd = std::move(bwd)](Node& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            bwd(self, *pa);
        };
    }
    return r;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->val.same_shape(b->val)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->val.shape) + " vs " + shape_str(b->val.shape));
    }
}

Var binary_elementwise(const Var& a, const Var& b, Tensor out,
                       std::function<void(Node&, Node&, Node&)> bwd) {
    Var r = make_var(std::move(out), a->requires_grad || b->requires_grad);
    if (r->requires_grad) {
        r->parents = {a, b};
        Node* pa = a.get();
        Node* pb = b.get();
        r->backprop = [pa, pb, bwd = std::move(bwd)](Node& self) {
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            bwd(self, *pa, *pb);
        };
    }
    return r;
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
    return binary_elementwise(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
        if (pa.requires_grad)
            for (std::size_t i = 0; i < self.grad.v.size(); ++i) pa.grad.v[i] += self.grad.v[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < self.grad.v.size(); ++i) pb.grad.v[i] += self.grad.v[i];
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->val.v[i];
    return binary_elementwise(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
        if (pa.requires_grad)
            for (std::size_t i = 0; i < self.grad.v.size(); ++i) pa.grad.v[i] += self.grad.v[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < self.grad.v.size(); ++i) pb.grad.v[i] -= self.grad.v[i];
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
    return binary_elementwise(a, b, std::move(out), [](Node& self, Node& pa, Node& pb) {
        if (pa.requires_grad)
            for (std::size_t i = 0; i < self.grad.v.size(); ++i)
                pa.grad.v[i] += self.grad.v[i] * pb.val.v[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < self.grad.v.size(); ++i)
                pb.grad.v[i] += self.grad.v[i] * pa.val.v[i];
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a->val;
    for (double& x : out.v) x *= c;
    return unary(a, std::move(out), [c](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) pa.grad.v[i] += c * self.grad.v[i];
    });
}

Var add_scalar(const Var& a, double c) {
    Tensor out = a->val;
    for (double& x : out.v) x += c;
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) pa.grad.v[i] += self.grad.v[i];
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var tanh(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::tanh(x);
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double y = self.val.v[i];
            pa.grad.v[i] += self.grad.v[i] * (1.0 - y * y);
        }
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double y = self.val.v[i];
            pa.grad.v[i] += self.grad.v[i] * y * (1.0 - y);
        }
    });
}

Var silu(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = x / (1.0 + std::exp(-x));
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double x = pa.val.v[i];
            const double s = 1.0 / (1.0 + std::exp(-x));
            pa.grad.v[i] += self.grad.v[i] * (s + x * s * (1.0 - s));
        }
    });
}

Var gelu(const Var& a) {
    // tanh approximation (smooth everywhere)
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    Tensor out = a->val;
    for (double& x : out.v) {
        const double t = std::tanh(k * (x + 0.044715 * x * x * x));
        x = 0.5 * x * (1.0 + t);
    }
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        constexpr double kk = 0.7978845608028654;
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double x = pa.val.v[i];
            const double u = kk * (x + 0.044715 * x * x * x);
            const double t = std::tanh(u);
            const double du = kk * (1.0 + 3.0 * 0.044715 * x * x);
            const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            pa.grad.v[i] += self.grad.v[i] * d;
        }
    });
}

Var softplus(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) {
        // numerically stable log(1+exp(x))
        x = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-pa.val.v[i]));
            pa.grad.v[i] += self.grad.v[i] * s;
        }
    });
}

Var abs(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = std::fabs(x);
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const double x = pa.val.v[i];
            const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            pa.grad.v[i] += self.grad.v[i] * s;
        }
    });
}

Var square(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = x * x;
    return unary(a, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i)
            pa.grad.v[i] += self.grad.v[i] * 2.0 * pa.val.v[i];
    });
}

Var sum(const Var& a) {
    double acc = 0.0;
    for (double x : a->val.v) acc += x;
    return unary(a, Tensor::scalar(acc), [](Node& self, Node& pa) {
        const double g = self.grad.v[0];
        for (double& gx : pa.grad.v) gx += g;
    });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a->val.v.size());
    double acc = 0.0;
    for (double x : a->val.v) acc += x;
    return unary(a, Tensor::scalar(acc / n), [n](Node& self, Node& pa) {
        const double g = self.grad.v[0] / n;
        for (double& gx : pa.grad.v) gx += g;
    });
}

Var detach(const Var& a) { return constant(a->val); }

Var concat_ch(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_ch: empty input");
    const Tensor& f = xs[0]->val;
    if (f.rank() != 4) throw std::invalid_argument("concat_ch: expects NCHW");
    int ctotal = 0;
    bool req = false;
    for (const Var& x : xs) {
        const Tensor& t = x->val;
        if (t.rank() != 4 || t.dim(0) != f.dim(0) || t.dim(2) != f.dim(2) || t.dim(3) != f.dim(3))
            throw std::invalid_argument("concat_ch: incompatible shapes");
        ctotal += t.dim(1);
        req = req || x->requires_grad;
    }
    const int n = f.dim(0), h = f.dim(2), w = f.dim(3);
    Tensor out({n, ctotal, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int b = 0; b < n; ++b) {
        std::size_t co = 0;
        for (const Var& x : xs) {
            const Tensor& t = x->val;
            const int c = t.dim(1);
            std::memcpy(&out.v[(static_cast<std::size_t>(b) * ctotal + co) * plane],
                        &t.v[static_cast<std::size_t>(b) * c * plane],
                        static_cast<std::size_t>(c) * plane * sizeof(double));
            co += static_cast<std::size_t>(c);
        }
    }
    Var r = make_var(std::move(out), req);
    if (r->requires_grad) {
        r->parents = xs;
        r->backprop = [n, ctotal, plane](Node& self) {
            for (int b = 0; b < n; ++b) {
                std::size_t co = 0;
                for (const Var& p : self.parents) {
                    const int c = p->val.dim(1);
                    if (p->requires_grad) {
                        p->ensure_grad();
                        const double* src = &self.grad.v[(static_cast<std::size_t>(b) * ctotal + co) * plane];
                        double* dst = &p->grad.v[static_cast<std::size_t>(b) * c * plane];
                        for (std::size_t i = 0; i < static_cast<std::size_t>(c) * plane; ++i) dst[i] += src[i];
                    }
                    co += static_cast<std::size_t>(c);
                }
            }
        };
    }
    return r;
}

Var upsample2x(const Var& x) {
    const Tensor& t = x->val;
    if (t.rank() != 4) throw std::invalid_argument("upsample2x: expects NCHW");
    const int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
    Tensor out({n, c, 2 * h, 2 * w});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    const double val = t.at(b, ch, y, xx);
                    out.at(b, ch, 2 * y, 2 * xx) = val;
                    out.at(b, ch, 2 * y, 2 * xx + 1) = val;
                    out.at(b, ch, 2 * y + 1, 2 * xx) = val;
                    out.at(b, ch, 2 * y + 1, 2 * xx + 1) = val;
                }
    return unary(x, std::move(out), [n, c, h, w](Node& self, Node& pa) {
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        pa.grad.at(b, ch, y, xx) += self.grad.at(b, ch, 2 * y, 2 * xx) +
                                                    self.grad.at(b, ch, 2 * y, 2 * xx + 1) +
                                                    self.grad.at(b, ch, 2 * y + 1, 2 * xx) +
                                                    self.grad.at(b, ch, 2 * y + 1, 2 * xx + 1);
                    }
    });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
    const Tensor& t = table->val;
    if (t.rank() != 2) throw std::invalid_argument("gather_rows: table must be (V,D)");
    const int v = t.dim(0), d = t.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= v) throw std::out_of_range("gather_rows: index out of range");
    }
    Tensor out({static_cast<int>(ids.size()), d});
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::memcpy(&out.v[i * d], &t.v[static_cast<std::size_t>(ids[i]) * d],
                    static_cast<std::size_t>(d) * sizeof(double));
    return unary(table, std::move(out), [ids, d](Node& self, Node& pa) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* g = &self.grad.v[i * d];
            double* dst = &pa.grad.v[static_cast<std::size_t>(ids[i]) * d];
            for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
    });
}

Var straight_through(const Var& x, const Var& q) {
    require_same_shape(x, q, "straight_through");
    // q contributes values only; the gradient is copied unchanged into x
    Tensor out = q->val;
    return unary(x, std::move(out), [](Node& self, Node& pa) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) pa.grad.v[i] += self.grad.v[i];
    });
}

// ---------------------------------------------------------------------------
// conv2d: x (N,IC,H,W), w (OC,IC,KH,KW), optional b (OC). Cross-correlation.
// circular_width wraps padding on the width axis only; height is zero-padded.
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
    int n, ic, h, w, oc, kh, kw, oh, ow, stride, pad_h, pad_w;
    bool circ;
};

inline double conv_get(const Tensor& x, int b, int c, int y, int xx, const ConvDims& d) {
    if (y < 0 || y >= d.h) return 0.0;
    if (d.circ) {
        xx = ((xx % d.w) + d.w) % d.w;
    } else if (xx < 0 || xx >= d.w) {
        return 0.0;
    }
    return x.at(b, c, y, xx);
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad_h, int pad_w, PadMode mode) {
    const Tensor& xt = x->val;
    const Tensor& wt = w->val;
    if (xt.rank() != 4 || wt.rank() != 4)
        throw std::invalid_argument("conv2d: x and w must be rank 4");
    if (xt.dim(1) != wt.dim(1))
        throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(xt.shape) +
                                    " kernel " + shape_str(wt.shape));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    ConvDims d;
    d.n = xt.dim(0); d.ic = xt.dim(1); d.h = xt.dim(2); d.w = xt.dim(3);
    d.oc = wt.dim(0); d.kh = wt.dim(2); d.kw = wt.dim(3);
    d.stride = stride; d.pad_h = pad_h; d.pad_w = pad_w; d.circ = (mode == PadMode::circular_width);
    d.oh = (d.h + 2 * pad_h - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad_w - d.kw) / stride + 1;
    if (d.oh < 1 || d.ow < 1) throw std::invalid_argument("conv2d: kernel does not fit padded input");
    if (b && b->val.rank() != 1) throw std::invalid_argument("conv2d: bias must be rank 1");
    if (b && b->val.dim(0) != d.oc) throw std::invalid_argument("conv2d: bias size mismatch");

    // kernel-position-outer loops turn the inner work into contiguous
    // multiply-add runs; the per-element accumulation order stays (ic,ky,kx)
    Tensor out({d.n, d.oc, d.oh, d.ow});
#pragma omp parallel for collapse(2) schedule(static)
    for (int bn = 0; bn < d.n; ++bn) {
        for (int oc = 0; oc < d.oc; ++oc) {
            double* oplane = &out.v[(static_cast<std::size_t>(bn) * d.oc + oc) * d.oh * d.ow];
            const double bias = b ? b->val.at(oc) : 0.0;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.oh) * d.ow; ++i) oplane[i] = bias;
            for (int ic = 0; ic < d.ic; ++ic) {
                const double* xplane = &xt.v[(static_cast<std::size_t>(bn) * d.ic + ic) * d.h * d.w];
                for (int ky = 0; ky < d.kh; ++ky)
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const double wv = wt.at(oc, ic, ky, kx);
                        for (int oy = 0; oy < d.oh; ++oy) {
                            const int iy = oy * d.stride + ky - d.pad_h;
                            if (iy < 0 || iy >= d.h) continue;
                            double* orow = oplane + static_cast<std::size_t>(oy) * d.ow;
                            const double* xrow = xplane + static_cast<std::size_t>(iy) * d.w;
                            if (d.circ) {
                                for (int ox = 0; ox < d.ow; ++ox) {
                                    const int ix = ((ox * d.stride + kx - d.pad_w) % d.w + d.w) % d.w;
                                    orow[ox] += wv * xrow[ix];
                                }
                            } else {
                                const int off = kx - d.pad_w;
                                int lo = 0, hi = d.ow;
                                while (lo < hi && lo * d.stride + off < 0) ++lo;
                                while (hi > lo && (hi - 1) * d.stride + off >= d.w) --hi;
                                const double* xp = xrow + off + static_cast<std::ptrdiff_t>(lo) * d.stride;
                                if (d.stride == 1) {
                                    for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * xp[ox - lo];
                                } else {
                                    for (int ox = lo; ox < hi; ++ox)
                                        orow[ox] += wv * xp[static_cast<std::ptrdiff_t>(ox - lo) * d.stride];
                                }
                            }
                        }
                    }
            }
        }
    }

    bool req = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    Var r = make_var(std::move(out), req);
    if (r->requires_grad) {
        r->parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
        Node* px = x.get();
        Node* pw = w.get();
        Node* pb = b ? b.get() : nullptr;
        r->backprop = [px, pw, pb, d](Node& self) {
            const Tensor& go = self.grad;
            if (px->requires_grad) {
                px->ensure_grad();
                Tensor& gx = px->grad;
                const Tensor& wt = pw->val;
#pragma omp parallel for schedule(static)
                for (int bn = 0; bn < d.n; ++bn) {
                    for (int oc = 0; oc < d.oc; ++oc) {
                        const double* gplane =
                            &go.v[(static_cast<std::size_t>(bn) * d.oc + oc) * d.oh * d.ow];
                        for (int ic = 0; ic < d.ic; ++ic) {
                            double* xplane =
                                &gx.v[(static_cast<std::size_t>(bn) * d.ic + ic) * d.h * d.w];
                            for (int ky = 0; ky < d.kh; ++ky)
                                for (int kx = 0; kx < d.kw; ++kx) {
                                    const double wv = wt.at(oc, ic, ky, kx);
                                    for (int oy = 0; oy < d.oh; ++oy) {
                                        const int iy = oy * d.stride + ky - d.pad_h;
                                        if (iy < 0 || iy >= d.h) continue;
                                        const double* grow = gplane + static_cast<std::size_t>(oy) * d.ow;
                                        double* xrow = xplane + static_cast<std::size_t>(iy) * d.w;
                                        if (d.circ) {
                                            for (int ox = 0; ox < d.ow; ++ox) {
                                                const int ix =
                                                    ((ox * d.stride + kx - d.pad_w) % d.w + d.w) % d.w;
                                                xrow[ix] += wv * grow[ox];
                                            }
                                        } else {
                                            const int off = kx - d.pad_w;
                                            int lo = 0, hi = d.ow;
                                            while (lo < hi && lo * d.stride + off < 0) ++lo;
                                            while (hi > lo && (hi - 1) * d.stride + off >= d.w) --hi;
                                            double* xp =
                                                xrow + off + static_cast<std::ptrdiff_t>(lo) * d.stride;
                                            for (int ox = lo; ox < hi; ++ox)
                                                xp[static_cast<std::ptrdiff_t>(ox - lo) * d.stride] +=
                                                    wv * grow[ox];
                                        }
                                    }
                                }
                        }
                    }
                }
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                Tensor& gw = pw->grad;
                const Tensor& xt = px->val;
#pragma omp parallel for schedule(static)
                for (int oc = 0; oc < d.oc; ++oc) {
                    for (int bn = 0; bn < d.n; ++bn) {
                        const double* gplane =
                            &go.v[(static_cast<std::size_t>(bn) * d.oc + oc) * d.oh * d.ow];
                        for (int ic = 0; ic < d.ic; ++ic) {
                            const double* xplane =
                                &xt.v[(static_cast<std::size_t>(bn) * d.ic + ic) * d.h * d.w];
                            for (int ky = 0; ky < d.kh; ++ky)
                                for (int kx = 0; kx < d.kw; ++kx) {
                                    double acc = 0.0;
                                    for (int oy = 0; oy < d.oh; ++oy) {
                                        const int iy = oy * d.stride + ky - d.pad_h;
                                        if (iy < 0 || iy >= d.h) continue;
                                        const double* grow = gplane + static_cast<std::size_t>(oy) * d.ow;
                                        const double* xrow = xplane + static_cast<std::size_t>(iy) * d.w;
                                        if (d.circ) {
                                            for (int ox = 0; ox < d.ow; ++ox) {
                                                const int ix =
                                                    ((ox * d.stride + kx - d.pad_w) % d.w + d.w) % d.w;
                                                acc += grow[ox] * xrow[ix];
                                            }
                                        } else {
                                            const int off = kx - d.pad_w;
                                            int lo = 0, hi = d.ow;
                                            while (lo < hi && lo * d.stride + off < 0) ++lo;
                                            while (hi > lo && (hi - 1) * d.stride + off >= d.w) --hi;
                                            const double* xp =
                                                xrow + off + static_cast<std::ptrdiff_t>(lo) * d.stride;
                                            for (int ox = lo; ox < hi; ++ox)
                                                acc += grow[ox] *
                                                       xp[static_cast<std::ptrdiff_t>(ox - lo) * d.stride];
                                        }
                                    }
                                    gw.at(oc, ic, ky, kx) += acc;
                                }
                        }
                    }
                }
            }
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                for (int oc = 0; oc < d.oc; ++oc) {
                    double acc = 0.0;
                    for (int bn = 0; bn < d.n; ++bn) {
                        const double* gplane =
                            &go.v[(static_cast<std::size_t>(bn) * d.oc + oc) * d.oh * d.ow];
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.oh) * d.ow; ++i)
                            acc += gplane[i];
                    }
                    pb->grad.at(oc) += acc;
                }
            }
        };
    }
    return r;
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xt = x->val;
    const Tensor& wt = w->val;
    if (xt.rank() != 2 || wt.rank() != 2)
        throw std::invalid_argument("linear: x (T,Ci) and w (Ci,Co) must be rank 2");
    if (xt.dim(1) != wt.dim(0)) throw std::invalid_argument("linear: inner dim mismatch");
    const int t = xt.dim(0), ci = xt.dim(1), co = wt.dim(1);
    if (b && (b->val.rank() != 1 || b->val.dim(0) != co))
        throw std::invalid_argument("linear: bias shape mismatch");

    Tensor out({t, co});
#pragma omp parallel for schedule(static)
    for (int i = 0; i < t; ++i) {
        const double* xr = &xt.v[static_cast<std::size_t>(i) * ci];
        double* orow = &out.v[static_cast<std::size_t>(i) * co];
        if (b) std::memcpy(orow, b->val.v.data(), static_cast<std::size_t>(co) * sizeof(double));
        for (int k = 0; k < ci; ++k) {
            const double xv = xr[k];
            const double* wr = &wt.v[static_cast<std::size_t>(k) * co];
            for (int j = 0; j < co; ++j) orow[j] += xv * wr[j];
        }
    }

    bool req = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    Var r = make_var(std::move(out), req);
    if (r->requires_grad) {
        r->parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
        Node* px = x.get();
        Node* pw = w.get();
        Node* pb = b ? b.get() : nullptr;
        r->backprop = [px, pw, pb, t, ci, co](Node& self) {
            const Tensor& go = self.grad;
            if (px->requires_grad) {
                px->ensure_grad();
#pragma omp parallel for schedule(static)
                for (int i = 0; i < t; ++i) {
                    const double* gr = &go.v[static_cast<std::size_t>(i) * co];
                    double* gx = &px->grad.v[static_cast<std::size_t>(i) * ci];
                    for (int k = 0; k < ci; ++k) {
                        const double* wr = &pw->val.v[static_cast<std::size_t>(k) * co];
                        double acc = 0.0;
                        for (int j = 0; j < co; ++j) acc += gr[j] * wr[j];
                        gx[k] += acc;
                    }
                }
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
#pragma omp parallel for schedule(static)
                for (int k = 0; k < ci; ++k) {
                    double* gw = &pw->grad.v[static_cast<std::size_t>(k) * co];
                    for (int i = 0; i < t; ++i) {
                        const double xv = px->val.v[static_cast<std::size_t>(i) * ci + k];
                        const double* gr = &go.v[static_cast<std::size_t>(i) * co];
                        for (int j = 0; j < co; ++j) gw[j] += xv * gr[j];
                    }
                }
            }
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                for (int j = 0; j < co; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < t; ++i) acc += go.v[static_cast<std::size_t>(i) * co + j];
                    pb->grad.v[static_cast<std::size_t>(j)] += acc;
                }
            }
        };
    }
    return r;
}

Var layer_norm(const Var& x, const Var& g, const Var& b, double eps) {
    const Tensor& xt = x->val;
    if (xt.rank() != 2) throw std::invalid_argument("layer_norm: expects (T,C)");
    const int t = xt.dim(0), c = xt.dim(1);
    if (g->val.numel() != c || b->val.numel() != c)
        throw std::invalid_argument("layer_norm: gain/bias size mismatch");

    Tensor out({t, c});
    Tensor xhat({t, c});
    std::vector<double> inv_std(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
        const double* xr = &xt.v[static_cast<std::size_t>(i) * c];
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += xr[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < c; ++j) {
            const double xh = (xr[j] - mu) * is;
            xhat.at(i, j) = xh;
            out.at(i, j) = g->val.at(j) * xh + b->val.at(j);
        }
    }

    bool req = x->requires_grad || g->requires_grad || b->requires_grad;
    Var r = make_var(std::move(out), req);
    if (r->requires_grad) {
        r->parents = {x, g, b};
        Node* px = x.get();
        Node* pg = g.get();
        Node* pb = b.get();
        r->backprop = [px, pg, pb, t, c, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)](Node& self) {
            const Tensor& go = self.grad;
            if (pg->requires_grad) {
                pg->ensure_grad();
                for (int j = 0; j < c; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < t; ++i) acc += go.at(i, j) * xhat.at(i, j);
                    pg->grad.at(j) += acc;
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int j = 0; j < c; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < t; ++i) acc += go.at(i, j);
                    pb->grad.at(j) += acc;
                }
            }
            if (px->requires_grad) {
                px->ensure_grad();
                for (int i = 0; i < t; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double gy = go.at(i, j) * pg->val.at(j);
                        m1 += gy;
                        m2 += gy * xhat.at(i, j);
                    }
                    m1 /= c;
                    m2 /= c;
                    const double is = inv_std[static_cast<std::size_t>(i)];
                    for (int j = 0; j < c; ++j) {
                        const double gy = go.at(i, j) * pg->val.at(j);
                        px->grad.at(i, j) += (gy - m1 - xhat.at(i, j) * m2) * is;
                    }
                }
            }
        };
    }
    return r;
}

Var causal_attention(const Var& q, const Var& k, const Var& v, int heads, bool causal) {
    const Tensor& qt = q->val;
    const Tensor& kt = k->val;
    const Tensor& vt = v->val;
    if (qt.rank() != 2 || !qt.same_shape(kt) || !qt.same_shape(vt))
        throw std::invalid_argument("causal_attention: q,k,v must share shape (T,C)");
    const int t = qt.dim(0), c = qt.dim(1);
    if (heads < 1 || c % heads != 0)
        throw std::invalid_argument("causal_attention: C must be divisible by heads");
    const int dh = c / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    // attention weights kept for backward: attn[h][i*t+j]
    auto attn = std::make_shared<std::vector<std::vector<double>>>(
        static_cast<std::size_t>(heads), std::vector<double>(static_cast<std::size_t>(t) * t, 0.0));

    Tensor out({t, c});
#pragma omp parallel for schedule(static)
    for (int h = 0; h < heads; ++h) {
        std::vector<double>& a = (*attn)[static_cast<std::size_t>(h)];
        const int off = h * dh;
        std::vector<double> scores(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) {
            const int jmax = causal ? i : t - 1;
            double mx = -1e300;
            for (int j = 0; j <= jmax; ++j) {
                double s = 0.0;
                for (int d = 0; d < dh; ++d) s += qt.at(i, off + d) * kt.at(j, off + d);
                s *= sc;
                scores[static_cast<std::size_t>(j)] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (int j = 0; j <= jmax; ++j) {
                const double e = std::exp(scores[static_cast<std::size_t>(j)] - mx);
                a[static_cast<std::size_t>(i) * t + j] = e;
                z += e;
            }
            const double iz = 1.0 / z;
            for (int j = 0; j <= jmax; ++j) a[static_cast<std::size_t>(i) * t + j] *= iz;
            for (int d = 0; d < dh; ++d) {
                double acc = 0.0;
                for (int j = 0; j <= jmax; ++j)
                    acc += a[static_cast<std::size_t>(i) * t + j] * vt.at(j, off + d);
                out.at(i, off + d) = acc;
            }
        }
    }

    bool req = q->requires_grad || k->requires_grad || v->requires_grad;
    Var r = make_var(std::move(out), req);
    if (r->requires_grad) {
        r->parents = {q, k, v};
        Node* pq = q.get();
        Node* pk = k.get();
        Node* pv = v.get();
        r->backprop = [pq, pk, pv, heads, causal, t, dh, sc, attn](Node& self) {
            const Tensor& go = self.grad;
            pq->ensure_grad();
            pk->ensure_grad();
            pv->ensure_grad();
#pragma omp parallel for schedule(static)
            for (int h = 0; h < heads; ++h) {
                const std::vector<double>& a = (*attn)[static_cast<std::size_t>(h)];
                const int off = h * dh;
                std::vector<double> da(static_cast<std::size_t>(t));
                for (int i = 0; i < t; ++i) {
                    const int jmax = causal ? i : t - 1;
                    // dV and dA
                    double dot = 0.0;
                    for (int j = 0; j <= jmax; ++j) {
                        double daj = 0.0;
                        const double aij = a[static_cast<std::size_t>(i) * t + j];
                        for (int d = 0; d < dh; ++d) {
                            const double g = go.at(i, off + d);
                            pv->grad.at(j, off + d) += aij * g;
                            daj += g * pv->val.at(j, off + d);
                        }
                        da[static_cast<std::size_t>(j)] = daj;
                        dot += aij * daj;
                    }
                    // dS = A * (dA - sum(A*dA)); then dQ, dK
                    for (int j = 0; j <= jmax; ++j) {
                        const double aij = a[static_cast<std::size_t>(i) * t + j];
                        const double ds = aij * (da[static_cast<std::size_t>(j)] - dot) * sc;
                        for (int d = 0; d < dh; ++d) {
                            pq->grad.at(i, off + d) += ds * pk->val.at(j, off + d);
                            pk->grad.at(j, off + d) += ds * pq->val.at(i, off + d);
                        }
                    }
                }
            }
        };
    }
    return r;
}

Var softmax_xent_at(const Var& logits, const std::vector<int>& positions,
                    const std::vector<int>& targets) {
    const Tensor& lt = logits->val;
    if (lt.rank() != 2) throw std::invalid_argument("softmax_xent_at: logits must be (T,K)");
    if (positions.size() != targets.size() || positions.empty())
        throw std::invalid_argument("softmax_xent_at: need matching non-empty positions/targets");
    const int t = lt.dim(0), k = lt.dim(1);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] < 0 || positions[i] >= t) throw std::out_of_range("softmax_xent_at: position");
        if (targets[i] < 0 || targets[i] >= k) throw std::out_of_range("softmax_xent_at: target");
    }
    const double inv_n = 1.0 / static_cast<double>(positions.size());
    // probs at the used rows, kept for backward
    auto probs = std::make_shared<std::vector<double>>(positions.size() * static_cast<std::size_t>(k));
    double loss = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double* row = &lt.v[static_cast<std::size_t>(positions[i]) * k];
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) {
            const double e = std::exp(row[j] - mx);
            (*probs)[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)] = e;
            z += e;
        }
        const double iz = 1.0 / z;
        for (int j = 0; j < k; ++j) (*probs)[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(j)] *= iz;
        loss -= std::log((*probs)[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(targets[i])]);
    }
    loss *= inv_n;
    return unary(logits, Tensor::scalar(loss),
                 [positions, targets, k, inv_n, probs](Node& self, Node& pa) {
                     const double g = self.grad.v[0] * inv_n;
                     for (std::size_t i = 0; i < positions.size(); ++i) {
                         double* grow = &pa.grad.v[static_cast<std::size_t>(positions[i]) * k];
                         const double* p = &(*probs)[i * static_cast<std::size_t>(k)];
                         for (int j = 0; j < k; ++j) grow[j] += g * p[j];
                         grow[targets[i]] -= g;
                     }
                 });
}

Var channel_unit_norm(const Var& x, double eps) {
    const Tensor& xt = x->val;
    if (xt.rank() != 4) throw std::invalid_argument("channel_unit_norm: expects NCHW");
    const int n = xt.dim(0), c = xt.dim(1), h = xt.dim(2), w = xt.dim(3);
    Tensor out({n, c, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double s = 0.0;
                for (int ch = 0; ch < c; ++ch) {
                    const double val = xt.at(b, ch, y, xx);
                    s += val * val;
                }
                const double inorm = 1.0 / std::sqrt(s + eps);
                for (int ch = 0; ch < c; ++ch) out.at(b, ch, y, xx) = xt.at(b, ch, y, xx) * inorm;
            }
    (void)plane;
    return unary(x, std::move(out), [n, c, h, w, eps](Node& self, Node& pa) {
        for (int b = 0; b < n; ++b)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    double s = 0.0, dot = 0.0;
                    for (int ch = 0; ch < c; ++ch) {
                        const double val = pa.val.at(b, ch, y, xx);
                        s += val * val;
                        dot += self.grad.at(b, ch, y, xx) * val;
                    }
                    const double inorm = 1.0 / std::sqrt(s + eps);
                    const double i3 = inorm * inorm * inorm;
                    for (int ch = 0; ch < c; ++ch) {
                        pa.grad.at(b, ch, y, xx) +=
                            self.grad.at(b, ch, y, xx) * inorm - dot * pa.val.at(b, ch, y, xx) * i3;
                    }
                }
    });
}

}  // namespace pano::ad
