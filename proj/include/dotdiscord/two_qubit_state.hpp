#pragma once

// Two-qubit density matrices in the local rotating frame. Basis order is
// (|00>, |01>, |10>, |11>) -> indices (0, 1, 2, 3) throughout the library,
// where the left factor is qubit A (dot 1) and the right factor qubit B.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "dotdiscord/errors.hpp"
#include "dotdiscord/phonon_kernel.hpp"

namespace dotdiscord {

using cplx = std::complex<double>;
using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;

inline constexpr double hermiticity_tolerance = 1e-12;
inline constexpr double trace_tolerance = 1e-12;
inline constexpr double psd_tolerance = 1e-10;

// Immutable, validated density matrix.
class TwoQubitState {
 public:
  // Checks Hermiticity, unit trace and positivity; throws InvalidState.
  static TwoQubitState from_matrix(const Matrix4c& rho) {
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (!std::isfinite(rho(i, j).real()) || !std::isfinite(rho(i, j).imag())) {
          throw InvalidState("density matrix has non-finite entries");
        }
        if (std::abs(rho(i, j) - std::conj(rho(j, i))) > hermiticity_tolerance) {
          throw InvalidState("density matrix is not Hermitian");
        }
      }
    }
    const cplx tr = rho.trace();
    if (std::abs(tr - 1.0) > trace_tolerance) {
      throw InvalidState("density matrix trace is not 1");
    }
    TwoQubitState s(rho);
    if (s.min_eigenvalue() < -psd_tolerance) {
      throw InvalidState("density matrix is not positive semidefinite");
    }
    return s;
  }

  static TwoQubitState maximally_mixed() { return TwoQubitState(Matrix4c::Identity() / 4.0); }

  // Projector onto a (not necessarily normalized) nonzero vector.
  static TwoQubitState pure(const Vector4c& psi) {
    const double n = psi.norm();
    if (!(n > 0.0)) throw InvalidState("cannot build a pure state from the zero vector");
    const Vector4c v = psi / n;
    return TwoQubitState(v * v.adjoint());
  }

  const Matrix4c& matrix() const noexcept { return rho_; }
  cplx operator()(int i, int j) const { return rho_(i, j); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho_, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }

  // Tr[rho^2] = sum |rho_ij|^2 for Hermitian rho.
  double purity() const { return rho_.cwiseAbs2().sum(); }

  // SWAP rho SWAP: exchanges the roles of the two qubits.
  TwoQubitState swapped() const {
    Eigen::Matrix4d swap = Eigen::Matrix4d::Zero();
    swap(0, 0) = swap(1, 2) = swap(2, 1) = swap(3, 3) = 1.0;
    const Matrix4c s = swap.cast<cplx>();
    return TwoQubitState(s * rho_ * s);
  }

  // (U_A (x) U_B) rho (U_A (x) U_B)^dagger
  TwoQubitState locally_rotated(const Eigen::Matrix2cd& ua, const Eigen::Matrix2cd& ub) const {
    Matrix4c u;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) u(2 * a + b, 2 * c + d) = ua(a, c) * ub(b, d);
    return TwoQubitState(u * rho_ * u.adjoint());
  }

  friend bool operator==(const TwoQubitState& a, const TwoQubitState& b) {
    return a.rho_ == b.rho_;
  }

 private:
  explicit TwoQubitState(const Matrix4c& rho) : rho_(rho) {}

  friend TwoQubitState propagate(const TwoQubitState&, const KernelSample&);

  Matrix4c rho_;
};

inline double purity(const TwoQubitState& s) { return s.purity(); }

// sqrt(a)|00> + sqrt(b) e^{i alpha}|10> + sqrt(b) e^{i beta}|01>
//   - sqrt(a) e^{i(alpha + beta)}|11>,  with b = 1/2 - a.
struct PureStateSpec {
  double a = 0.25;
  double alpha = 0.0;
  double beta = 0.0;

  double b() const { return 0.5 - a; }
};

// Diagonal (a, b, b, a) with coherences a g03 on (0,3) and b g12 on (1,2).
struct XStateSpec {
  double a = 0.25;
  double b = 0.25;

  static XStateSpec from_difference(double a_minus_b) {
    return XStateSpec{0.25 + 0.5 * a_minus_b, 0.25 - 0.5 * a_minus_b};
  }

  void validate() const {
    if (!(a >= 0.0) || !(b >= 0.0) || std::abs(2.0 * a + 2.0 * b - 1.0) > 1e-12) {
      throw InvalidWeight("X-state weights need a, b >= 0 and 2a + 2b = 1");
    }
  }
};

inline Vector4c pure_state_vector(const PureStateSpec& spec) {
  if (!(spec.a >= 0.0 && spec.a <= 0.5)) {
    throw InvalidWeight("pure-state weight a must lie in [0, 1/2]");
  }
  const double sa = std::sqrt(spec.a);
  const double sb = std::sqrt(spec.b());
  Vector4c psi;
  psi(0) = sa;                                                   // |00>
  psi(1) = sb * std::polar(1.0, spec.beta);                      // |01>
  psi(2) = sb * std::polar(1.0, spec.alpha);                     // |10>
  psi(3) = -sa * std::polar(1.0, spec.alpha + spec.beta);        // |11>
  return psi;
}

inline TwoQubitState make_pure_state(const PureStateSpec& spec) {
  return TwoQubitState::pure(pure_state_vector(spec));
}

inline TwoQubitState make_x_state(const XStateSpec& spec, cplx g03, cplx g12) {
  spec.validate();
  if (std::abs(g03) > 1.0 + 1e-15 || std::abs(g12) > 1.0 + 1e-15) {
    throw InvalidCoherence("coherence factors must satisfy |g| <= 1");
  }
  Matrix4c rho = Matrix4c::Zero();
  rho(0, 0) = rho(3, 3) = spec.a;
  rho(1, 1) = rho(2, 2) = spec.b;
  rho(0, 3) = spec.a * g03;
  rho(3, 0) = std::conj(rho(0, 3));
  rho(1, 2) = spec.b * g12;
  rho(2, 1) = std::conj(rho(1, 2));
  return TwoQubitState::from_matrix(rho);
}

// Exact pure-dephasing evolution: populations are untouched and every
// coherence (i < j) picks up exp(-i A_ij + B_ij).
inline TwoQubitState propagate(const TwoQubitState& initial, const KernelSample& k) {
  Matrix4c rho = initial.matrix();
  if (k.t == 0.0) return initial;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      rho(i, j) *= k.coherence_factor(i, j);
      rho(j, i) = std::conj(rho(i, j));
    }
  }
  return TwoQubitState(rho);
}

inline TwoQubitState propagate(const TwoQubitState& initial, const PhononKernel& kernel,
                               double t) {
  return propagate(initial, kernel.evaluate(t));
}

// Plain-text matrix format: 16 entries written as "re,im", row-major, four
// per line, separated by single spaces.
inline void write_matrix(std::ostream& os, const Matrix4c& m) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (j) os << ' ';
      os << m(i, j).real() << ',' << m(i, j).imag();
    }
    os << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

inline void write_state(std::ostream& os, const TwoQubitState& s) { write_matrix(os, s.matrix()); }

// Accepts any whitespace between entries; lines starting with '#' are comments.
inline Matrix4c read_matrix(std::istream& is) {
  Matrix4c m;
  int count = 0;
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string token;
    while (ls >> token) {
      const auto comma = token.find(',');
      if (comma == std::string::npos) {
        throw InvalidState("matrix entry '" + token + "' is not of the form re,im");
      }
      if (count >= 16) throw InvalidState("matrix file has more than 16 entries");
      double re = 0.0;
      double im = 0.0;
      try {
        std::size_t used = 0;
        re = std::stod(token.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument("trailing");
        const std::string im_text = token.substr(comma + 1);
        im = std::stod(im_text, &used);
        if (used != im_text.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw InvalidState("matrix entry '" + token + "' is not a number pair");
      }
      m(count / 4, count % 4) = cplx(re, im);
      ++count;
    }
  }
  if (count != 16) {
    throw InvalidState("matrix file has " + std::to_string(count) + " entries, expected 16");
  }
  return m;
}

inline TwoQubitState read_state(std::istream& is) {
  return TwoQubitState::from_matrix(read_matrix(is));
}

}  // namespace dotdiscord
