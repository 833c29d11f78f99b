#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "depthprune/calibration.hpp"
#include "depthprune/tensor.hpp"
#include "depthprune/toy_model.hpp"

namespace testing_support {

/// Directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

depthprune::TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                      double scale = 1.0);

/// Seed-42 toy model, V=256 D=64 L=12 heads=4.
const depthprune::ToyModel& seed42_model();

/// Fixed 32 x 256 byte-level calibration from synthetic text seed 7.
const depthprune::CalibrationSet& seed42_calibration();

/// Boundaries of seed42_model() on seed42_calibration(), captured once.
const depthprune::CaptureResult& seed42_capture();

double rel_err(double got, double want);

}  // namespace testing_support
