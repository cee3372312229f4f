#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace rsense {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Seed = std::uint64_t;
using Rng = std::mt19937_64;

/// Thrown when a caller violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

/// SplitMix64 finalizer; used to derive independent child seeds.
inline Seed mix_seed(Seed x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a path of indices below `base`. Order matters:
/// derive_seed(s, {1, 2}) != derive_seed(s, {2, 1}).
inline Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> path) {
  Seed s = mix_seed(base);
  for (auto index : path) s = mix_seed(s ^ mix_seed(index + 0x632be59bd9b4e019ULL));
  return s;
}

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// n x k matrix of i.i.d. standard normal entries.
inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  // Fill column-major explicitly so the draw order is fixed.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

inline Vector gaussian_vector(Eigen::Index size, Rng& rng) {
  return gaussian_matrix(size, 1, rng).col(0);
}

}  // namespace rsense
