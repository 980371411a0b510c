// risnoma - multi-cell RIS-assisted NOMA downlink optimization
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>

namespace risnoma {

using cxd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLn2 = 0.6931471805599453094;

/// Feasibility / relative-objective tolerance used by every in-repo conic
/// solve. Two orders below the 1e-4 rank-one residual target so solver noise
/// never masks algorithmic behavior.
inline constexpr double kSolverTol = 1e-7;

/// SINR floor applied before building a surrogate expansion; the expansion
/// coefficients degenerate gracefully at the floor instead of diverging.
inline constexpr double kSinrFloor = 1e-12;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes a base seed with a stream tag so distinct subsystems draw from
/// decorrelated deterministic streams.
inline uint64_t mix_seed(uint64_t base, uint64_t stream) {
  uint64_t s = base;
  (void)splitmix64(s);
  s ^= 0x632be59bd9b4e019ULL * (stream + 1);
  return splitmix64(s);
}

/// Deterministic random source. std::mt19937_64 has a standard-specified
/// sequence and the transforms below avoid the implementation-defined
/// std::normal_distribution, so draws are reproducible everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs cached).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * kPi * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  /// Circularly-symmetric complex Gaussian with unit variance, E|z|^2 = 1.
  cxd complex_gaussian() {
    double re = gaussian();
    double im = gaussian();
    return {re * M_SQRT1_2, im * M_SQRT1_2};
  }

  /// Uniform point in the annulus r in [r0, r1] around the origin.
  Eigen::Vector2d annulus_point(double r0, double r1) {
    double r = std::sqrt(uniform(r0 * r0, r1 * r1));
    double th = uniform(0.0, 2.0 * kPi);
    return {r * std::cos(th), r * std::sin(th)};
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Real Frobenius pairing of two Hermitian matrices, Re tr(X Y).
inline double herm_inner(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  const cxd* a = x.data();
  const cxd* b = y.data();
  const Eigen::Index n = x.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return acc;
}

inline void symmetrize(Eigen::MatrixXcd& a) {
  a = 0.5 * (a + a.adjoint()).eval();
}

}  // namespace risnoma
