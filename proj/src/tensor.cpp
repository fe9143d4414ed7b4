#include "rpmnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>

#include "rpmnet/error.hpp"

namespace rpmnet {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
    if (shape_.size() > 2) throw ShapeError("tensor: rank > 2 is not supported");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.size() > 2) throw ShapeError("tensor: rank > 2 is not supported");
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("tensor: shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("tensor: ragged matrix literal");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

Tensor Tensor::filled(Shape shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

std::size_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
    if (shape_.empty()) return 1;
    return shape_.back();
}

std::span<const double> Tensor::row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
}

std::span<double> Tensor::row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ShapeError("tensor: item() on shape " + shape_to_string(shape_));
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace rpmnet
