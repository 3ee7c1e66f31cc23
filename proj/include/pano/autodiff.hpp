#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pano/tensor.hpp"

namespace pano::ad {

struct Node;
using Var = std::shared_ptr<Node>;

// One vertex of the reverse-mode tape. Parents always have smaller ids than
// their children, so descending-id order is a valid backward schedule and the
// summation order of gradient accumulation is fixed.
struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily, same shape as val
    bool requires_grad = false;
    std::int64_t id = 0;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad();
    void zero_grad();
};

Var make_var(Tensor t, bool requires_grad);
Var constant(Tensor t);
Var param(Tensor t);
Var scalar_var(double x);

// When gradients are disabled, ops compute values only (no tape is recorded).
bool grad_enabled();
struct NoGrad {
    NoGrad();
    ~NoGrad();
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

  private:
    bool prev_;
};

// Runs the tape backward from a scalar root in descending creation order.
void backward(const Var& root);

enum class PadMode { zero, circular_width };

// elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var silu(const Var& a);
Var gelu(const Var& a);
Var softplus(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);

// reductions -> scalar
Var sum(const Var& a);
Var mean(const Var& a);

// structure
Var detach(const Var& a);
Var concat_ch(const std::vector<Var>& xs);                   // NCHW, along C
Var upsample2x(const Var& x);                                // NCHW nearest
Var gather_rows(const Var& table, const std::vector<int>& ids);  // (V,D) -> (T,D)
// forward = q's values, backward = identity into x (q receives nothing)
Var straight_through(const Var& x, const Var& q);

// nn primitives
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad_h, int pad_w, PadMode mode);
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, PadMode mode) {
    return conv2d(x, w, b, stride, pad, pad, mode);
}
Var linear(const Var& x, const Var& w, const Var& b);        // (T,Ci)x(Ci,Co)
Var layer_norm(const Var& x, const Var& g, const Var& b, double eps = 1e-5);
Var causal_attention(const Var& q, const Var& k, const Var& v, int heads, bool causal);
// mean NLL of targets[i] under softmax(logits[positions[i]])
Var softmax_xent_at(const Var& logits, const std::vector<int>& positions,
                    const std::vector<int>& targets);
// normalize channel vectors to unit L2 norm per (n,y,x), NCHW
Var channel_unit_norm(const Var& x, double eps = 1e-10);

// Central-difference gradient verification of a scalar-valued closure.
// Returns max over input elements of |analytic - numeric| / max(1,|numeric|).
// Throws (naming `op_name`) if any value or gradient is non-finite.
double grad_check(const std::string& op_name,
                  const std::function<Var(const std::vector<Var>&)>& f,
                  const std::vector<Var>& inputs, double step = 1e-5);

}  // namespace pano::ad
