#include "pano/tensor.hpp"

namespace pano {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim in " + shape_str(shape));
    }
    if (shape.size() > 4) throw std::invalid_argument("Tensor: rank > 4");
    v.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
}

Tensor Tensor::scalar(double x) {
    Tensor t;
    t.v.assign(1, x);
    return t;
}

double Tensor::item() const {
    if (v.size() != 1) throw std::logic_error("Tensor::item: not a scalar, shape " + shape_str(shape));
    return v[0];
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

std::int64_t shape_numel(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

}  // namespace pano
