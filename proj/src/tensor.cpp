#include "depthprune/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "depthprune/error.hpp"

namespace depthprune {

namespace {

std::size_t element_count(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void require_finite(std::span<const double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValueError("non-finite element at flat index " + std::to_string(i));
    }
  }
}

}  // namespace

TensorF::TensorF(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), data_(element_count(dims_), 0.0) {}

TensorF::TensorF(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (element_count(dims_) != data_.size()) {
    throw ShapeError("tensor dims hold " + std::to_string(element_count(dims_)) +
                     " elements but data has " + std::to_string(data_.size()));
  }
  require_finite(data_);
}

double TensorF::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != dims_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " != tensor rank " +
                     std::to_string(dims_.size()));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= dims_[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
    flat = flat * dims_[axis] + i;
    ++axis;
  }
  return data_[flat];
}

TokenMatrix::TokenMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

TokenMatrix::TokenMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("token matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                     " given " + std::to_string(data_.size()) + " elements");
  }
  require_finite(data_);
}

std::span<const double> TokenMatrix::row(std::size_t j) const {
  if (j >= rows_) throw ShapeError("row " + std::to_string(j) + " out of range");
  return std::span<const double>(data_).subspan(j * cols_, cols_);
}

std::span<double> TokenMatrix::mutable_row(std::size_t j) {
  if (j >= rows_) throw ShapeError("row " + std::to_string(j) + " out of range");
  return std::span<double>(data_).subspan(j * cols_, cols_);
}

TokenMatrix flatten_tokens(const TensorF& h) {
  if (h.rank() != 3) {
    throw ShapeError("flatten_tokens expects a rank-3 [B,S,D] tensor, got rank " +
                     std::to_string(h.rank()));
  }
  const auto& d = h.dims();
  // Row-major [B,S,D] already stores token j = b*S + s contiguously.
  return TokenMatrix(d[0] * d[1], d[2], std::vector<double>(h.data().begin(), h.data().end()));
}

TensorF unflatten_tokens(const TokenMatrix& m, std::size_t batch, std::size_t seq_len) {
  if (batch * seq_len != m.rows()) {
    throw ShapeError("cannot unflatten " + std::to_string(m.rows()) + " rows into " +
                     std::to_string(batch) + "x" + std::to_string(seq_len));
  }
  return TensorF({batch, seq_len, m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

double row_dot(const TokenMatrix& a, const TokenMatrix& b, std::size_t j) {
  if (!a.same_shape(b)) throw ShapeError("row_dot operands differ in shape");
  auto ra = a.row(j);
  auto rb = b.row(j);
  double acc = 0.0;
  for (std::size_t d = 0; d < ra.size(); ++d) acc += ra[d] * rb[d];
  return acc;
}

double row_l2norm(const TokenMatrix& a, std::size_t j) { return std::sqrt(row_dot(a, a, j)); }

}  // namespace depthprune
