#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

namespace testing_support {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("depthprune-" + tag + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

depthprune::TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                      double scale) {
  std::normal_distribution<double> n(0.0, scale);
  depthprune::TokenMatrix m(rows, cols);
  for (double& v : m.mutable_data()) v = n(rng);
  return m;
}

const depthprune::ToyModel& seed42_model() {
  static const depthprune::ToyModel model = depthprune::init_model(256, 64, 12, 4, 42);
  return model;
}

const depthprune::CalibrationSet& seed42_calibration() {
  static const depthprune::CalibrationSet calib =
      depthprune::calibration_from_bytes(depthprune::synthetic_corpus(7, 32 * 256), 256, 32);
  return calib;
}

const depthprune::CaptureResult& seed42_capture() {
  static const depthprune::CaptureResult capture =
      depthprune::forward_capture(seed42_model(), seed42_calibration());
  return capture;
}

double rel_err(double got, double want) {
  if (got == want) return 0.0;
  const double denom = std::max(std::fabs(want), 1e-300);
  return std::fabs(got - want) / denom;
}

}  // namespace testing_support
