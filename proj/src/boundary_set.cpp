#include "depthprune/boundary_set.hpp"

#include <string>

#include "depthprune/error.hpp"
#include "depthprune/hash.hpp"

namespace depthprune {

BoundarySet::BoundarySet(std::vector<TensorF> boundaries, std::string model_fingerprint,
                         std::string calib_fingerprint)
    : boundaries_(std::move(boundaries)),
      model_fingerprint_(std::move(model_fingerprint)),
      calib_fingerprint_(std::move(calib_fingerprint)) {
  if (boundaries_.size() < 2) {
    throw FormatError("a boundary set needs at least 2 boundaries (L >= 1), got " +
                      std::to_string(boundaries_.size()));
  }
  const auto& first = boundaries_.front().dims();
  if (first.size() != 3) throw ShapeError("boundary 0 is not a rank-3 [B,S,D] tensor");
  for (std::size_t i = 1; i < boundaries_.size(); ++i) {
    if (boundaries_[i].dims() != first) {
      throw ShapeError("boundary " + std::to_string(i) + " shape differs from boundary 0");
    }
  }
}

const TensorF& BoundarySet::boundary(std::size_t i) const {
  if (i >= boundaries_.size()) {
    throw LayerIndexError("boundary " + std::to_string(i) + " out of range (have " +
                          std::to_string(boundaries_.size()) + ")");
  }
  return boundaries_[i];
}

std::string BoundarySet::content_fingerprint() const {
  Sha256 h;
  h.update_u64(boundaries_.size());
  for (const auto& t : boundaries_) {
    h.update_u64(t.rank());
    for (auto d : t.dims()) h.update_u64(d);
    h.update_f64(t.data());
  }
  return h.hex_digest();
}

}  // namespace depthprune
