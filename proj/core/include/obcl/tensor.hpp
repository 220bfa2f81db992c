#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "obcl/errors.hpp"

namespace obcl {

/// Dense float64 array, row-major, rank 1 or 2.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel(shape) != static_cast<int64_t>(data.size()))
            throw ShapeMismatch("Tensor: shape/data element count mismatch");
    }

    static int64_t numel(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d <= 0) throw ShapeMismatch("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int64_t> s) {
        int64_t n = numel(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
    }

    static Tensor full(std::vector<int64_t> s, double v) {
        int64_t n = numel(s);
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), v));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor vec(std::vector<double> d) {
        auto n = static_cast<int64_t>(d.size());
        return Tensor({n}, std::move(d));
    }

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t rows() const { return rank() == 2 ? shape[0] : 1; }
    int64_t cols() const { return rank() == 2 ? shape[1] : shape[0]; }

    double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }
};

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeMismatch(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                            b.shape_str());
}

}  // namespace obcl
