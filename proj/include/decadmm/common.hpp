#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace decadmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Base class for every error raised by the library. Messages are one line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Independent random streams derived from one master seed.
///
/// Every consumer asks for (master, purpose, index) and gets its own engine,
/// so adding a consumer or changing the metric stride never shifts the draws
/// of another consumer.
enum class Stream : std::uint64_t {
  kGraph = 1,
  kData = 2,
  kSampling = 3,
  kEnvironment = 4,
  kEvaluation = 5,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t split_seed(std::uint64_t master, Stream purpose, std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(purpose)) + index);
}

inline Rng make_rng(std::uint64_t master, Stream purpose, std::uint64_t index = 0) {
  return Rng(split_seed(master, purpose, index));
}

inline void require_same_dim(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
  }
}

}  // namespace decadmm
