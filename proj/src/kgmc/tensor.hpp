#pragma once
// Dense row-major tensor of doubles. Training math runs in f64; persistence
// (io.hpp) stores f32.

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgmc {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        v.assign(count(), 0.0);
    }
    Tensor(std::vector<std::size_t> s, std::vector<double> vals)
        : shape(std::move(s)), v(std::move(vals)) {
        if (v.size() != count()) throw std::runtime_error("tensor shape/value count mismatch");
    }

    static Tensor scalar(double x) { return Tensor({1}, {x}); }
    static Tensor vec(std::vector<double> vals) {
        const std::size_t n = vals.size();
        return Tensor({n}, std::move(vals));
    }

    std::size_t count() const {
        std::size_t c = 1;
        for (std::size_t e : shape) c *= e;
        return c;
    }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double* row(std::size_t r) { return v.data() + r * cols(); }
    const double* row(std::size_t r) const { return v.data() + r * cols(); }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i)
            s += (i ? "x" : "") + std::to_string(shape[i]);
        return s + "]";
    }
};

}  // namespace kgmc
