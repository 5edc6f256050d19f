#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mixf {

/// Dense row-major array of doubles with an explicit shape.
///
/// Rank 1 and rank 2 are the only ranks the library produces. A scalar is
/// represented as shape {1}. For rank 1, rows() is 1 and cols() is the
/// length, so a bias vector can be treated as a single row.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor scalar(double value) { return Tensor({1}, std::vector<double>{value}); }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor from_vector(std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_string() const;

    /// Bitwise equality of shape and contents.
    bool identical(const Tensor& other) const;

    Tensor zeros_like() const { return Tensor(shape_, 0.0); }
    void fill(double value);
    /// this += scale * other (shapes must match).
    void add_scaled(const Tensor& other, double scale = 1.0);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Copy of rows [row0, row0+nrows) and columns [col0, col0+ncols) of a matrix.
Tensor slice_block(const Tensor& src, std::size_t row0, std::size_t nrows,
                   std::size_t col0, std::size_t ncols);
/// dst[row0.., col0..] += block.
void add_block(Tensor& dst, const Tensor& block, std::size_t row0, std::size_t col0);

}  // namespace mixf
