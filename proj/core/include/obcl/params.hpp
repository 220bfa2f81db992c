#pragma once

#include <string>
#include <vector>

#include "obcl/tensor.hpp"

namespace obcl {

/// Ordered, named parameter store. Order is construction order and is the
/// contract for leaf alignment, optimizer state, and checkpoints.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    int add(std::string name, Tensor t) {
        names.push_back(std::move(name));
        values.push_back(std::move(t));
        return static_cast<int>(values.size()) - 1;
    }

    int index_of(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }

    Tensor* find(const std::string& name) {
        int i = index_of(name);
        return i < 0 ? nullptr : &values[static_cast<size_t>(i)];
    }

    size_t size() const { return values.size(); }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const Tensor& t : values) n += t.size();
        return n;
    }
};

}  // namespace obcl
