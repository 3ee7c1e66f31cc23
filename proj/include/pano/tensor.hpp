#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pano {

// Dense row-major tensor of doubles, rank 0..4. Rank 0 is a scalar.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);
    static Tensor scalar(double x);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double item() const;

    double& at(int a) { return v[static_cast<std::size_t>(a)]; }
    double at(int a) const { return v[static_cast<std::size_t>(a)]; }
    double& at(int a, int b) { return v[static_cast<std::size_t>(a) * shape[1] + b]; }
    double at(int a, int b) const { return v[static_cast<std::size_t>(a) * shape[1] + b]; }
    double& at(int a, int b, int c) {
        return v[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
    }
    double at(int a, int b, int c) const {
        return v[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
    }
    double& at(int a, int b, int c, int d) {
        return v[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double at(int a, int b, int c, int d) const {
        return v[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
};

std::string shape_str(const std::vector<int>& s);
std::int64_t shape_numel(const std::vector<int>& s);

}  // namespace pano
