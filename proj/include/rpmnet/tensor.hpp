#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rpmnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of doubles, rank 0 to 2.
///
/// Rank-0 tensors are scalars with one element. Ops treat a rank-1 tensor of
/// length n as a 1 x n row when a 2-D view is needed.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor filled(Shape shape, double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    // 2-D view dimensions.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    std::span<const double> row(std::size_t r) const;
    std::span<double> row(std::size_t r);

    /// Value of a single-element tensor.
    double item() const;

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace rpmnet
