#include "pano/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace pano::ad {

namespace {
std::atomic<std::int64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;
}  // namespace

void Node::ensure_grad() {
    if (grad.v.size() != val.v.size()) {
        grad.shape = val.shape;
        grad.v.assign(val.v.size(), 0.0);
    }
}

void Node::zero_grad() {
    if (!grad.v.empty()) std::fill(grad.v.begin(), grad.v.end(), 0.0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGrad::NoGrad() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = prev_; }

Var make_var(Tensor t, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = requires_grad && g_grad_enabled;
    n->id = g_next_id.fetch_add(1);
    return n;
}

Var constant(Tensor t) { return make_var(std::move(t), false); }

Var param(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;  // parameters track gradients regardless of mode
    n->id = g_next_id.fetch_add(1);
    return n;
}

Var scalar_var(double x) { return constant(Tensor::scalar(x)); }

void backward(const Var& root) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->val.v.size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root->val.shape));
    }
    // Collect the reachable subgraph.
    std::vector<Node*> nodes;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const Var& p : n->parents) {
            if (seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const Node* a, const Node* b) { return a->id > b->id; });
    root->ensure_grad();
    root->grad.v[0] += 1.0;
    for (Node* n : nodes) {
        if (n->backprop && !n->grad.v.empty()) n->backprop(*n);
    }
}

double grad_check(const std::string& op_name,
                  const std::function<Var(const std::vector<Var>&)>& f,
                  const std::vector<Var>& inputs, double step) {
    auto check_finite = [&](double x, const char* what) {
        if (!std::isfinite(x)) {
            throw std::runtime_error("grad_check(" + op_name + "): non-finite " + what);
        }
    };

    Var root = f(inputs);
    if (!root || root->val.v.size() != 1) {
        throw std::invalid_argument("grad_check(" + op_name + "): closure must be scalar-valued");
    }
    check_finite(root->val.v[0], "forward value");
    for (const Var& in : inputs) in->zero_grad();
    backward(root);

    std::vector<Tensor> analytic;
    analytic.reserve(inputs.size());
    for (const Var& in : inputs) {
        in->ensure_grad();
        analytic.push_back(in->grad);
    }

    double max_rel = 0.0;
    NoGrad ng;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Tensor& x = inputs[i]->val;
        for (std::size_t e = 0; e < x.v.size(); ++e) {
            const double keep = x.v[e];
            x.v[e] = keep + step;
            const double fp = f(inputs)->val.v[0];
            x.v[e] = keep - step;
            const double fm = f(inputs)->val.v[0];
            x.v[e] = keep;
            check_finite(fp, "forward value (perturbed)");
            check_finite(fm, "forward value (perturbed)");
            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[i].v[e];
            check_finite(a, "analytic gradient");
            check_finite(numeric, "numeric gradient");
            const double rel = std::fabs(a - numeric) / std::max(1.0, std::fabs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace pano::ad
