#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace depthprune {

/// Dense row-major array of finite doubles. Storage on disk may be float32,
/// but every in-memory value and every reduction is 64-bit.
class TensorF {
 public:
  TensorF() = default;
  /// Zero-filled tensor of the given shape.
  explicit TensorF(std::vector<std::size_t> dims);
  /// Throws ShapeError if product(dims) != data.size() and ValueError on any
  /// non-finite element.
  TensorF(std::vector<std::size_t> dims, std::vector<double> data);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }

  double at(std::initializer_list<std::size_t> index) const;

  bool operator==(const TensorF&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

/// Tokens-by-hidden view of a flattened B x S x D hidden state.
class TokenMatrix {
 public:
  TokenMatrix() = default;
  TokenMatrix(std::size_t rows, std::size_t cols);
  TokenMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> row(std::size_t j) const;
  std::span<double> mutable_row(std::size_t j);
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }

  double operator()(std::size_t j, std::size_t d) const { return data_[j * cols_ + d]; }
  double& operator()(std::size_t j, std::size_t d) { return data_[j * cols_ + d]; }

  bool same_shape(const TokenMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const TokenMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// [B, S, D] -> (B*S) x D. Row j is h[j / S, j % S, :].
TokenMatrix flatten_tokens(const TensorF& h);

/// Inverse of flatten_tokens for a known batch size.
TensorF unflatten_tokens(const TokenMatrix& m, std::size_t batch, std::size_t seq_len);

double row_dot(const TokenMatrix& a, const TokenMatrix& b, std::size_t j);
double row_l2norm(const TokenMatrix& a, std::size_t j);

}  // namespace depthprune
