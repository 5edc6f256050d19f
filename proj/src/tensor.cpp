#include "mixf/tensor.h"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "mixf/errors.h"

namespace mixf {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
        n *= d;
    }
    return n;
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + mixf::shape_string(shape_));
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw DimensionError("from_rows: no rows");
    std::size_t cols = rows.begin()->size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw DimensionError("from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::from_vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
    return shape_.size() == 1 ? 1 : shape_.front();
}

std::size_t Tensor::cols() const {
    return shape_.size() == 1 ? shape_.front() : data_.size() / shape_.front();
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_string() const { return mixf::shape_string(shape_); }

bool Tensor::identical(const Tensor& other) const {
    return shape_ == other.shape_ &&
           (data_.empty() ||
            std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_scaled(const Tensor& other, double scale) {
    if (!same_shape(other)) {
        throw DimensionError("add_scaled: " + shape_string() + " vs " + other.shape_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

Tensor slice_block(const Tensor& src, std::size_t row0, std::size_t nrows, std::size_t col0,
                   std::size_t ncols) {
    if (row0 + nrows > src.rows() || col0 + ncols > src.cols()) {
        throw DimensionError("slice_block out of range for " + src.shape_string());
    }
    Tensor out = Tensor::matrix(nrows, ncols);
    for (std::size_t r = 0; r < nrows; ++r) {
        auto in = src.row(row0 + r).subspan(col0, ncols);
        std::copy(in.begin(), in.end(), out.row(r).begin());
    }
    return out;
}

void add_block(Tensor& dst, const Tensor& block, std::size_t row0, std::size_t col0) {
    if (row0 + block.rows() > dst.rows() || col0 + block.cols() > dst.cols()) {
        throw DimensionError("add_block out of range: " + block.shape_string() + " into " +
                             dst.shape_string());
    }
    for (std::size_t r = 0; r < block.rows(); ++r) {
        auto out = dst.row(row0 + r).subspan(col0, block.cols());
        auto in = block.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) out[c] += in[c];
    }
}

}  // namespace mixf
