#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "depthprune/tensor.hpp"

namespace depthprune {

/// The L+1 residual-stream states around L layers: boundaries[0] is the
/// embedding output and boundaries[i+1] is the output of layer i. Every
/// boundary is a [B, S, D] tensor of the same shape.
class BoundarySet {
 public:
  BoundarySet() = default;
  /// Throws FormatError when fewer than two boundaries are given and
  /// ShapeError when shapes are not identical rank-3.
  explicit BoundarySet(std::vector<TensorF> boundaries, std::string model_fingerprint = {},
                       std::string calib_fingerprint = {});

  std::size_t layer_count() const noexcept { return boundaries_.size() - 1; }
  std::size_t batch() const noexcept { return boundaries_.front().dims()[0]; }
  std::size_t seq_len() const noexcept { return boundaries_.front().dims()[1]; }
  std::size_t hidden() const noexcept { return boundaries_.front().dims()[2]; }

  const TensorF& boundary(std::size_t i) const;
  const std::vector<TensorF>& boundaries() const noexcept { return boundaries_; }

  const std::string& model_fingerprint() const noexcept { return model_fingerprint_; }
  const std::string& calib_fingerprint() const noexcept { return calib_fingerprint_; }

  /// SHA-256 over the shapes and 64-bit little-endian contents of every
  /// boundary. Identifies the data a plan was scored on.
  std::string content_fingerprint() const;

 private:
  std::vector<TensorF> boundaries_;
  std::string model_fingerprint_;
  std::string calib_fingerprint_;
};

}  // namespace depthprune
