#ifndef FASTICARL_TENSOR_HPP
#define FASTICARL_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fasticarl/contracts.hpp"

namespace fasticarl {

/// Dense row-major matrix of 32-bit floats. All training math runs on this type.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    Tensor2(std::size_t r, std::size_t c, std::vector<float> values)
        : rows(r), cols(c), data(std::move(values)) {
        check_contract(data.size() == rows * cols, "Tensor2: data length != rows*cols");
    }

    static Tensor2 zeros(std::size_t r, std::size_t c) { return Tensor2(r, c); }

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Copies the given rows (in order) into a new matrix.
inline Tensor2 gather_rows(const Tensor2& src, std::span<const std::size_t> indices) {
    Tensor2 out(indices.size(), src.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        check_contract(indices[i] < src.rows, "gather_rows: index out of range");
        auto r = src.row(indices[i]);
        std::copy(r.begin(), r.end(), out.row(i).begin());
    }
    return out;
}

} // namespace fasticarl

#endif
