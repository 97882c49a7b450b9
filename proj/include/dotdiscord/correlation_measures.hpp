#pragma once

// Quantum-correlation measures of two-qubit states.
//
// Geometric discord is normalized as a squared Hilbert-Schmidt distance,
// which puts every maximally entangled state at 1/2. In the Bloch
// representation
//     rho = 1/4 (I + x.sigma (x) I + I (x) y.sigma + sum T_ij sigma_i (x) sigma_j)
// the one-sided discords are (Tr K - k_max) / 4 with K_x = x x^T + T T^T and
// K_y = y y^T + T^T T. The lower bound is the larger of the two. The upper
// bound is the purity deficit of a concrete product measurement: qubit A
// measured along the top eigenvector of K_x and qubit B along the best axis
// given that choice (and symmetrically), i.e.
//     (Tr K_x - k_x + Tr L_y - l_y) / 4,   L_y = y y^T + T^T k_x k_x^T T,
// minimized over the two orderings.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>

#include "dotdiscord/errors.hpp"
#include "dotdiscord/sym3_eigen.hpp"
#include "dotdiscord/two_qubit_state.hpp"

namespace dotdiscord {

struct BlochRepr {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Vector3d y = Eigen::Vector3d::Zero();
  Eigen::Matrix3d T = Eigen::Matrix3d::Zero();
};

namespace pauli {

inline Eigen::Matrix2cd matrix(int i) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  switch (i) {
    case 0: m(0, 0) = m(1, 1) = 1.0; break;
    case 1: m(0, 1) = m(1, 0) = 1.0; break;
    case 2: m(0, 1) = cplx(0.0, -1.0); m(1, 0) = cplx(0.0, 1.0); break;
    case 3: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    default: throw InvalidParameter("Pauli index out of range");
  }
  return m;
}

// sigma_i (x) sigma_j with sigma_0 = identity.
inline Matrix4c product(int i, int j) {
  const Eigen::Matrix2cd a = matrix(i);
  const Eigen::Matrix2cd b = matrix(j);
  Matrix4c m;
  for (int r1 = 0; r1 < 2; ++r1)
    for (int r2 = 0; r2 < 2; ++r2)
      for (int c1 = 0; c1 < 2; ++c1)
        for (int c2 = 0; c2 < 2; ++c2) m(2 * r1 + r2, 2 * c1 + c2) = a(r1, c1) * b(r2, c2);
  return m;
}

}  // namespace pauli

inline constexpr double bloch_imaginary_tolerance = 1e-12;

// Pauli expectation values. Throws NonHermitianInput if an expectation value
// has an imaginary part above 1e-12.
inline BlochRepr bloch_decompose(const Matrix4c& rho) {
  auto expect = [&](int i, int j) {
    const cplx v = (rho * pauli::product(i, j)).trace();
    if (std::abs(v.imag()) > bloch_imaginary_tolerance) {
      throw NonHermitianInput("Pauli expectation value has an imaginary part");
    }
    return v.real();
  };
  BlochRepr out;
  for (int i = 0; i < 3; ++i) {
    out.x(i) = expect(i + 1, 0);
    out.y(i) = expect(0, i + 1);
    for (int j = 0; j < 3; ++j) out.T(i, j) = expect(i + 1, j + 1);
  }
  return out;
}

inline BlochRepr bloch_decompose(const TwoQubitState& s) { return bloch_decompose(s.matrix()); }

inline Matrix4c reconstruct(const BlochRepr& b) {
  Matrix4c rho = pauli::product(0, 0);
  for (int i = 0; i < 3; ++i) {
    rho += b.x(i) * pauli::product(i + 1, 0);
    rho += b.y(i) * pauli::product(0, i + 1);
    for (int j = 0; j < 3; ++j) rho += b.T(i, j) * pauli::product(i + 1, j + 1);
  }
  return rho / 4.0;
}

struct DiscordBounds {
  double lower = 0.0;
  double upper = 0.0;

  // One-sided values (Tr K - k) / 4 for each qubit; lower = max of these.
  double lower_x = 0.0;
  double lower_y = 0.0;
  // Upper-bound branches: measure A along k_x first, or B along k_y first.
  double upper_via_x = 0.0;
  double upper_via_y = 0.0;

  Eigen::Vector3d eig_Kx = Eigen::Vector3d::Zero();  // descending
  Eigen::Vector3d eig_Ky = Eigen::Vector3d::Zero();
  Eigen::Vector3d kx_hat = Eigen::Vector3d::Zero();
  Eigen::Vector3d ky_hat = Eigen::Vector3d::Zero();
  Eigen::Vector3d eig_Lx = Eigen::Vector3d::Zero();
  Eigen::Vector3d eig_Ly = Eigen::Vector3d::Zero();

  // Set when k_x or k_y is degenerate within 1e-10; the top eigenvector is
  // then a deterministic but arbitrary choice and the upper bound may jump.
  bool degenerate_top = false;

  // (Tr K_x - k_i) / 4 for each eigenvalue k_i of K_x, descending k_i.
  std::array<double, 3> candidates_x() const {
    const double tr = eig_Kx.sum();
    return {(tr - eig_Kx(0)) / 4.0, (tr - eig_Kx(1)) / 4.0, (tr - eig_Kx(2)) / 4.0};
  }
};

inline DiscordBounds discord_bounds(const BlochRepr& b) {
  const Eigen::Matrix3d Kx = b.x * b.x.transpose() + b.T * b.T.transpose();
  const Eigen::Matrix3d Ky = b.y * b.y.transpose() + b.T.transpose() * b.T;
  const Sym3Eigen ex = eigen_sym3(Kx);
  const Sym3Eigen ey = eigen_sym3(Ky);

  DiscordBounds out;
  out.eig_Kx = ex.values;
  out.eig_Ky = ey.values;
  out.kx_hat = ex.top_vector();
  out.ky_hat = ey.top_vector();
  out.degenerate_top = ex.top_multiplicity > 1 || ey.top_multiplicity > 1;

  // Tr K - k_max as the sum of the two smaller eigenvalues (both >= 0 for a
  // positive semidefinite K up to rounding).
  const double rest_x = std::max(0.0, ex.values(1) + ex.values(2));
  const double rest_y = std::max(0.0, ey.values(1) + ey.values(2));
  out.lower_x = rest_x / 4.0;
  out.lower_y = rest_y / 4.0;
  out.lower = std::max(out.lower_x, out.lower_y);

  const Eigen::Vector3d tkx = b.T.transpose() * out.kx_hat;
  const Eigen::Vector3d tky = b.T * out.ky_hat;
  const Eigen::Matrix3d Ly = b.y * b.y.transpose() + tkx * tkx.transpose();
  const Eigen::Matrix3d Lx = b.x * b.x.transpose() + tky * tky.transpose();
  const Sym3Eigen ely = eigen_sym3(Ly);
  const Sym3Eigen elx = eigen_sym3(Lx);
  out.eig_Ly = ely.values;
  out.eig_Lx = elx.values;

  const double rest_ly = std::max(0.0, ely.values(1) + ely.values(2));
  const double rest_lx = std::max(0.0, elx.values(1) + elx.values(2));
  out.upper_via_x = (rest_x + rest_ly) / 4.0;
  out.upper_via_y = (rest_y + rest_lx) / 4.0;
  // upper >= lower holds exactly; rounding can invert them when they coincide.
  out.upper = std::max(out.lower, std::min(out.upper_via_x, out.upper_via_y));
  return out;
}

inline DiscordBounds discord_bounds(const TwoQubitState& s) {
  return discord_bounds(bloch_decompose(s));
}

inline double discord_lower(const TwoQubitState& s) { return discord_bounds(s).lower; }
inline double discord_upper(const TwoQubitState& s) { return discord_bounds(s).upper; }

// Closed-form geometric discord of the X-state family
//   (a|g03| - b|g12|)^2 + (a - b)^2    if |a - b| < a|g03| + b|g12|
//   2 a^2 |g03|^2 + 2 b^2 |g12|^2      if |a - b| > a|g03| + b|g12|
// The two expressions coincide on the boundary.
inline double xstate_discord_closed_form(const XStateSpec& spec, cplx g03, cplx g12) {
  spec.validate();
  const double a = spec.a;
  const double b = spec.b;
  const double m03 = std::abs(g03);
  const double m12 = std::abs(g12);
  const double coherent = (a * m03 - b * m12) * (a * m03 - b * m12) + (a - b) * (a - b);
  const double incoherent = 2.0 * a * a * m03 * m03 + 2.0 * b * b * m12 * m12;
  const double gap = std::abs(a - b) - (a * m03 + b * m12);
  if (gap < 0.0) return coherent;
  if (gap > 0.0) return incoherent;
  if (std::abs(coherent - incoherent) > 1e-12) {
    throw Error("X-state discord branches disagree on the regime boundary");
  }
  return coherent;
}

// Sign of |a - b| - (a|g03| + b|g12|): which closed-form branch applies.
inline double xstate_regime_indicator(const XStateSpec& spec, cplx g03, cplx g12) {
  return std::abs(spec.a - spec.b) - (spec.a * std::abs(g03) + spec.b * std::abs(g12));
}

// max{0, b|g12| - a, a|g03| - b}. This is half the Wootters concurrence of
// the same X-state (see wootters_concurrence).
inline double xstate_concurrence(const XStateSpec& spec, cplx g03, cplx g12) {
  spec.validate();
  return std::max({0.0, spec.b * std::abs(g12) - spec.a, spec.a * std::abs(g03) - spec.b});
}

// Wootters concurrence max{0, l1 - l2 - l3 - l4}, with l_i the decreasing
// square roots of the eigenvalues of rho (sy (x) sy) rho* (sy (x) sy). They
// are taken from the Hermitian matrix sqrt(rho) S rho* S sqrt(rho), which has
// the same spectrum.
inline double wootters_concurrence(const TwoQubitState& s) {
  const Matrix4c& rho = s.matrix();
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho);
  if (es.info() != Eigen::Success) throw EigenSolverFailure("density matrix eigensolver failed");
  // Eigenvalues below the solver's resolution are zero; their square roots
  // would otherwise add noise of order 1e-8 for rank-deficient states.
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * es.eigenvalues().maxCoeff();
  const Eigen::Vector4d root =
      es.eigenvalues().unaryExpr([floor](double p) { return p > floor ? std::sqrt(p) : 0.0; });
  const Matrix4c sqrt_rho = es.eigenvectors() * root.cast<cplx>().asDiagonal() *
                            es.eigenvectors().adjoint();

  const Matrix4c spin_flip = pauli::product(2, 2);
  const Matrix4c r = sqrt_rho * spin_flip * rho.conjugate() * spin_flip * sqrt_rho;
  const Matrix4c r_herm = 0.5 * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> er(r_herm, Eigen::EigenvaluesOnly);
  if (er.info() != Eigen::Success) throw EigenSolverFailure("spin-flip eigensolver failed");

  std::array<double, 4> l{};
  const double r_floor =
      4.0 * std::numeric_limits<double>::epsilon() * std::max(er.eigenvalues().maxCoeff(), 0.0);
  for (int i = 0; i < 4; ++i) {
    const double v = er.eigenvalues()(i);
    l[i] = v > r_floor ? std::sqrt(v) : 0.0;
  }
  std::sort(l.begin(), l.end(), std::greater<>());
  return std::clamp(l[0] - l[1] - l[2] - l[3], 0.0, 1.0);
}

}  // namespace dotdiscord
