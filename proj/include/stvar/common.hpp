#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace stvar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed or inconsistent user-supplied data (files, panels, models).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (non-PD covariance, rejection budget, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape/contract violations between in-memory objects.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Derive a child seed from a master seed and a stream index (splitmix64).
/// Replicate r always gets split_seed(master, r), independent of scheduling.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace stvar
