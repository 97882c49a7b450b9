#pragma once

// Eigen-decomposition of real symmetric 3x3 matrices.
//
// Eigenvalues come from the trigonometric solution of the characteristic
// cubic and eigenvectors from cross products of rows of (A - lambda I).
// When the spectrum is nearly degenerate (relative discriminant below
// 1e-12) both are recomputed with cyclic Jacobi rotations, which stay
// accurate there.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

#include "dotdiscord/errors.hpp"

namespace dotdiscord {

struct Sym3Eigen {
  Eigen::Vector3d values;   // descending
  Eigen::Matrix3d vectors;  // column i belongs to values(i)
  bool used_jacobi = false;
  // Number of eigenvalues within degeneracy_tolerance of the largest.
  int top_multiplicity = 1;

  Eigen::Vector3d top_vector() const { return vectors.col(0); }
};

inline constexpr double relative_discriminant_threshold = 1e-12;
inline constexpr double degeneracy_tolerance = 1e-10;

namespace detail {

// First component larger than 1e-12 * |v| made positive.
inline Eigen::Vector3d canonical_sign(Eigen::Vector3d v) {
  const double scale = v.norm();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(v(i)) > 1e-12 * scale) {
      if (v(i) < 0.0) v = -v;
      break;
    }
  }
  return v;
}

inline Eigen::Vector3d null_vector(const Eigen::Matrix3d& a, double lambda) {
  const Eigen::Matrix3d m = a - lambda * Eigen::Matrix3d::Identity();
  const std::array<Eigen::Vector3d, 3> candidates = {
      Eigen::Vector3d(m.row(0).cross(m.row(1))),
      Eigen::Vector3d(m.row(0).cross(m.row(2))),
      Eigen::Vector3d(m.row(1).cross(m.row(2)))};
  const auto best = std::max_element(candidates.begin(), candidates.end(),
                                     [](const auto& x, const auto& y) {
                                       return x.squaredNorm() < y.squaredNorm();
                                     });
  return best->normalized();
}

inline int count_top(const Eigen::Vector3d& values) {
  const double tol = degeneracy_tolerance * std::max(1.0, std::abs(values(0)));
  int n = 1;
  for (int i = 1; i < 3; ++i)
    if (values(0) - values(i) <= tol) ++n;
  return n;
}

}  // namespace detail

// Cyclic Jacobi. Columns are sorted by descending eigenvalue; among
// eigenvalues tied with the largest, the vector with the largest |first
// component| comes first. Every column has the canonical sign.
inline Sym3Eigen jacobi_eigen3(const Eigen::Matrix3d& input) {
  Eigen::Matrix3d a = 0.5 * (input + input.transpose());
  Eigen::Matrix3d v = Eigen::Matrix3d::Identity();
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);

  bool done = false;
  for (int sweep = 0; sweep < 64 && !done; ++sweep) {
    const double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    if (off <= 1e-300 || off < 1e-17 * scale) {
      done = true;
      break;
    }
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        a(p, q) = a(q, p) = 0.0;
        v = v * rot;
      }
    }
  }
  if (!done) {
    const double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    if (!(off < 1e-12 * scale)) throw EigenSolverFailure("Jacobi iteration did not converge");
  }

  std::array<int, 3> order = {0, 1, 2};
  const Eigen::Vector3d diag = a.diagonal();
  std::sort(order.begin(), order.end(), [&](int i, int j) { return diag(i) > diag(j); });

  Sym3Eigen out;
  out.used_jacobi = true;
  for (int i = 0; i < 3; ++i) {
    out.values(i) = diag(order[i]);
    out.vectors.col(i) = detail::canonical_sign(v.col(order[i]));
  }
  out.top_multiplicity = detail::count_top(out.values);
  if (out.top_multiplicity > 1) {
    int pick = 0;
    for (int i = 1; i < out.top_multiplicity; ++i) {
      if (std::abs(out.vectors(0, i)) > std::abs(out.vectors(0, pick)) + 1e-12) pick = i;
    }
    if (pick != 0) {
      out.vectors.col(0).swap(out.vectors.col(pick));
      std::swap(out.values(0), out.values(pick));
    }
  }
  return out;
}

inline Sym3Eigen eigen_sym3(const Eigen::Matrix3d& input) {
  const Eigen::Matrix3d a = 0.5 * (input + input.transpose());
  if (!a.allFinite()) throw EigenSolverFailure("matrix has non-finite entries");

  const double off2 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = a.trace() / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * off2;
  const double p = std::sqrt(p2 / 6.0);
  if (!(p > 0.0)) return jacobi_eigen3(a);  // multiple of the identity

  const Eigen::Matrix3d b = (a - q * Eigen::Matrix3d::Identity()) / p;
  const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  constexpr double two_pi_3 = 2.0943951023931954923;

  Eigen::Vector3d values;
  values(0) = q + 2.0 * p * std::cos(phi);
  values(2) = q + 2.0 * p * std::cos(phi + two_pi_3);
  values(1) = 3.0 * q - values(0) - values(2);

  const double scale = std::max(std::abs(values(0)), std::abs(values(2)));
  const double prod = (values(0) - values(1)) * (values(0) - values(2)) * (values(1) - values(2));
  const double s3 = scale * scale * scale;
  const double rel_disc = (prod / s3) * (prod / s3);
  if (rel_disc < relative_discriminant_threshold) return jacobi_eigen3(a);

  Sym3Eigen out;
  out.values = values;
  const Eigen::Vector3d top = detail::canonical_sign(detail::null_vector(a, values(0)));
  const Eigen::Vector3d bottom = detail::canonical_sign(detail::null_vector(a, values(2)));
  out.vectors.col(0) = top;
  out.vectors.col(2) = bottom;
  out.vectors.col(1) = detail::canonical_sign(bottom.cross(top).normalized());
  out.top_multiplicity = 1;
  return out;
}

}  // namespace dotdiscord
