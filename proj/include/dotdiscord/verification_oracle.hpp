#pragma once

// Direct estimate of the symmetric geometric discord
//     D = min over product bases { Tr[rho^2] - Tr[Pi(rho)^2] },
// where Pi pinches rho onto the diagonal of the product basis
// {|a_i> (x) |b_j>}. Tr[Pi(rho)^2] = sum_ij <a_i b_j| rho |a_i b_j>^2, so the
// objective needs nothing beyond matrix elements of rho; no Bloch
// quantities are involved.
//
// The minimum is searched on a coarse (theta_a, phi_a, theta_b, phi_b) grid
// and the best seeds are polished with Nelder-Mead. Everything is
// deterministic.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <tuple>
#include <vector>

#include "dotdiscord/errors.hpp"
#include "dotdiscord/two_qubit_state.hpp"
#include "dotdiscord/units.hpp"

namespace dotdiscord {

struct MeasurementAxes {
  double theta_a = 0.0;
  double phi_a = 0.0;
  double theta_b = 0.0;
  double phi_b = 0.0;

  // Same measurement with theta in [0, pi] and phi in [0, 2 pi).
  MeasurementAxes canonical() const {
    auto fold = [](double theta, double phi) {
      const double two_pi = 2.0 * units::pi;
      theta = std::fmod(theta, two_pi);
      if (theta < 0.0) theta += two_pi;
      if (theta > units::pi) {  // (theta, phi) ~ (2 pi - theta, phi + pi)
        theta = two_pi - theta;
        phi += units::pi;
      }
      phi = std::fmod(phi, two_pi);
      if (phi < 0.0) phi += two_pi;
      if (phi >= two_pi) phi = 0.0;
      return std::pair{theta, phi};
    };
    MeasurementAxes out;
    std::tie(out.theta_a, out.phi_a) = fold(theta_a, phi_a);
    std::tie(out.theta_b, out.phi_b) = fold(theta_b, phi_b);
    return out;
  }

  std::array<double, 4> as_array() const { return {theta_a, phi_a, theta_b, phi_b}; }
  static MeasurementAxes from_array(const std::array<double, 4>& v) {
    return {v[0], v[1], v[2], v[3]};
  }

  friend bool operator==(const MeasurementAxes&, const MeasurementAxes&) = default;
};

namespace detail {

// Orthonormal qubit basis whose first vector has Bloch angles (theta, phi).
inline std::array<Eigen::Vector2cd, 2> qubit_basis(double theta, double phi) {
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  const cplx e = std::polar(1.0, phi);
  Eigen::Vector2cd up(c, e * s);
  Eigen::Vector2cd down(-std::conj(e) * s, c);
  return {up, down};
}

// <a| rho |a> as an operator on qubit B.
inline Eigen::Matrix2cd partial_expectation(const Matrix4c& rho, const Eigen::Vector2cd& a) {
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          m(r, c) += std::conj(a(i)) * rho(2 * i + r, 2 * j + c) * a(j);
  return m;
}

inline double expectation(const Eigen::Matrix2cd& m, const Eigen::Vector2cd& b) {
  return std::real(b.dot(m * b));
}

inline double pinched_purity(const std::array<Eigen::Matrix2cd, 2>& ma,
                             const std::array<Eigen::Vector2cd, 2>& vb) {
  double sum = 0.0;
  for (const auto& m : ma) {
    for (const auto& b : vb) {
      const double p = expectation(m, b);
      sum += p * p;
    }
  }
  return sum;
}

}  // namespace detail

inline double purity_deficit(const TwoQubitState& state, const MeasurementAxes& axes) {
  const Matrix4c& rho = state.matrix();
  const auto va = detail::qubit_basis(axes.theta_a, axes.phi_a);
  const auto vb = detail::qubit_basis(axes.theta_b, axes.phi_b);
  const std::array<Eigen::Matrix2cd, 2> ma = {detail::partial_expectation(rho, va[0]),
                                              detail::partial_expectation(rho, va[1])};
  return state.purity() - detail::pinched_purity(ma, vb);
}

struct OracleOptions {
  std::size_t grid = 16;          // points per angle
  std::size_t restarts = 4;       // best grid seeds polished
  double step_tolerance = 1e-10;  // simplex size at which polishing stops
  std::size_t max_iterations = 20000;
};

struct OracleResult {
  double value = 0.0;
  MeasurementAxes axes;
  std::size_t evaluations = 0;
};

namespace detail {

template <class F>
std::pair<std::array<double, 4>, double> nelder_mead(F&& f, std::array<double, 4> start,
                                                     double step, double tolerance,
                                                     std::size_t max_iterations,
                                                     std::size_t& evaluations) {
  using Point = std::array<double, 4>;
  constexpr std::size_t n = 4;
  std::array<Point, n + 1> simplex;
  std::array<double, n + 1> value{};
  auto eval = [&](const Point& p) {
    ++evaluations;
    return f(p);
  };

  simplex[0] = start;
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1] = start;
    simplex[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= n; ++i) value[i] = eval(simplex[i]);

  std::array<std::size_t, n + 1> order{};
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
    const std::size_t best = order[0];
    const std::size_t worst = order[n];
    const std::size_t second = order[n - 1];

    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        size = std::max(size, std::abs(simplex[i][d] - simplex[best][d]));
    if (size < tolerance) break;

    Point centroid{};
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / n;
    }
    auto along = [&](double coef) {
      Point p;
      for (std::size_t d = 0; d < n; ++d)
        p[d] = centroid[d] + coef * (simplex[worst][d] - centroid[d]);
      return p;
    };

    const Point reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < value[best]) {
      const Point expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        value[worst] = fe;
      } else {
        simplex[worst] = reflected;
        value[worst] = fr;
      }
      continue;
    }
    if (fr < value[second]) {
      simplex[worst] = reflected;
      value[worst] = fr;
      continue;
    }
    const bool outside = fr < value[worst];
    const Point contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : value[worst])) {
      simplex[worst] = contracted;
      value[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d)
        simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
      value[i] = eval(simplex[i]);
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (value[i] < value[best]) best = i;
  return {simplex[best], value[best]};
}

}  // namespace detail

// Multistart minimization of purity_deficit. The returned value is an upper
// estimate of the true minimum. Ties are broken towards the
// lexicographically smallest canonical axes.
inline OracleResult oracle_discord(const TwoQubitState& state, const OracleOptions& opts = {}) {
  if (opts.grid < 2) throw InvalidParameter("oracle grid needs at least 2 points per angle");
  if (opts.restarts < 1) throw InvalidParameter("oracle needs at least one restart");

  const Matrix4c& rho = state.matrix();
  const double purity = state.purity();
  const std::size_t n = opts.grid;

  // Qubit bases on the grid: theta at cell centers, phi on [0, 2 pi).
  std::vector<std::array<Eigen::Vector2cd, 2>> bases;
  std::vector<std::pair<double, double>> angles;
  bases.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double theta = units::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const double phi = 2.0 * units::pi * static_cast<double>(j) / static_cast<double>(n);
      bases.push_back(detail::qubit_basis(theta, phi));
      angles.emplace_back(theta, phi);
    }
  }

  struct Seed {
    double value;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Seed> seeds;
  seeds.reserve(bases.size() * bases.size());
  for (std::size_t ia = 0; ia < bases.size(); ++ia) {
    const std::array<Eigen::Matrix2cd, 2> ma = {
        detail::partial_expectation(rho, bases[ia][0]),
        detail::partial_expectation(rho, bases[ia][1])};
    for (std::size_t ib = 0; ib < bases.size(); ++ib) {
      seeds.push_back({purity - detail::pinched_purity(ma, bases[ib]), ia, ib});
    }
  }
  OracleResult out;
  out.evaluations = seeds.size();

  const std::size_t keep = std::min(opts.restarts, seeds.size());
  std::partial_sort(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(keep), seeds.end(),
                    [](const Seed& x, const Seed& y) {
                      if (x.value != y.value) return x.value < y.value;
                      return std::tie(x.a, x.b) < std::tie(y.a, y.b);
                    });

  auto objective = [&](const std::array<double, 4>& v) {
    return purity_deficit(state, MeasurementAxes::from_array(v));
  };
  const double step = units::pi / static_cast<double>(n);

  bool have = false;
  for (std::size_t s = 0; s < keep; ++s) {
    std::array<double, 4> start = {angles[seeds[s].a].first, angles[seeds[s].a].second,
                                   angles[seeds[s].b].first, angles[seeds[s].b].second};
    // Two passes: a collapsed simplex is re-opened once from its best vertex.
    auto [point, value] = detail::nelder_mead(objective, start, step, opts.step_tolerance,
                                              opts.max_iterations, out.evaluations);
    std::tie(point, value) = detail::nelder_mead(objective, point, 0.1 * step,
                                                 opts.step_tolerance, opts.max_iterations,
                                                 out.evaluations);
    const MeasurementAxes axes = MeasurementAxes::from_array(point).canonical();
    if (!have || value < out.value ||
        (value == out.value && axes.as_array() < out.axes.as_array())) {
      out.value = value;
      out.axes = axes;
      have = true;
    }
  }
  return out;
}

}  // namespace dotdiscord
