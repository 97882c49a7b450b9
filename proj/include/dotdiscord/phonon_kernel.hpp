#pragma once

// Dephasing kernels of two quantum-dot excitons coupled to a common bath of
// longitudinal acoustic phonons through the deformation potential.
//
// Mode sums are evaluated in the continuum limit
//     sum_k  ->  V/(2 pi)^3  int d^3k,
// in cylindrical coordinates (k_perp, phi, k_z). The azimuth is integrated
// analytically, k_z >= 0 is doubled by symmetry, and V cancels against the
// 1/V of |f_k|^2. With omega_k = c k and g_k = f_k / (hbar omega_k):
//
//   |g_k|^2 = (sigma_e - sigma_h)^2 / (2 rho hbar c^3 V k)
//             * exp(-l_z^2 k_z^2 / 2 - l_perp^2 k_perp^2 / 2)
//
//   A01 = sum |g|^2 sin(w t)
//   A03 = 4 sum |g|^2 cos^2(k_z d/2) sin(w t) - dE t
//   B01 = sum |g|^2 (cos(w t) - 1)(2 n + 1)
//   B03 = 4 sum |g|^2 cos^2(k_z d/2) (cos(w t) - 1)(2 n + 1)
//   dE  = d_eps - 2 Re sum w |g|^2 exp(i k_z d)
//
// with the derived kernels A02 = A01, A12 = 0, A13 = A23 = A03 - A01,
// B02 = B13 = B23 = B01 and B12 = 4 B01 - B03.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dotdiscord/errors.hpp"
#include "dotdiscord/parallel.hpp"
#include "dotdiscord/quadrature.hpp"
#include "dotdiscord/units.hpp"

namespace dotdiscord {

// Material and geometry constants. Energies in meV, lengths in nm, the sound
// velocity in nm/ps. The density is given in kg/m^3 and stored both as given
// and converted to meV ps^2 / nm^5.
class MaterialParams {
 public:
  static MaterialParams create(double sigma_e_meV, double sigma_h_meV, double c_nm_per_ps,
                               double rho_kg_per_m3, double l_perp_nm, double l_z_nm) {
    auto require_positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidParameter(std::string(name) + " must be positive and finite");
      }
    };
    require_positive(c_nm_per_ps, "c");
    require_positive(rho_kg_per_m3, "rho");
    require_positive(l_perp_nm, "l_perp");
    require_positive(l_z_nm, "l_z");
    if (!std::isfinite(sigma_e_meV) || !std::isfinite(sigma_h_meV)) {
      throw InvalidParameter("deformation potentials must be finite");
    }
    return MaterialParams(sigma_e_meV, sigma_h_meV, c_nm_per_ps, rho_kg_per_m3, l_perp_nm,
                          l_z_nm);
  }

  // sigma_e = 8 eV, sigma_h = -1 eV, c = 5.1 nm/ps, rho = 5360 kg/m^3,
  // l_perp = 5 nm, l_z = 1 nm.
  static MaterialParams gaas() {
    return create(8.0 * units::meV_per_eV, -1.0 * units::meV_per_eV, 5.1, 5360.0, 5.0, 1.0);
  }

  double sigma_e() const noexcept { return sigma_e_; }
  double sigma_h() const noexcept { return sigma_h_; }
  double c() const noexcept { return c_; }
  double rho_kg_per_m3() const noexcept { return rho_si_; }
  double rho_internal() const noexcept { return rho_internal_; }
  double l_perp() const noexcept { return l_perp_; }
  double l_z() const noexcept { return l_z_; }

  // Equal deformation potentials switch the coupling off entirely. Allowed,
  // but callers may want to warn about it.
  bool coupling_vanishes() const noexcept { return sigma_e_ == sigma_h_; }

  // (sigma_e - sigma_h)^2 / (2 rho hbar c^3 (2 pi)^2): the continuum mode
  // density of |g_k|^2 per dk_perp dk_z, once multiplied by k_perp/k and the
  // form factor. Units of nm^2.
  double coupling_prefactor() const noexcept {
    const double ds = sigma_e_ - sigma_h_;
    const double two_pi = 2.0 * units::pi;
    return ds * ds / (2.0 * rho_internal_ * units::hbar_meV_ps * c_ * c_ * c_ * two_pi * two_pi);
  }

  friend bool operator==(const MaterialParams&, const MaterialParams&) = default;

 private:
  MaterialParams(double se, double sh, double c, double rho, double lp, double lz)
      : sigma_e_(se),
        sigma_h_(sh),
        c_(c),
        rho_si_(rho),
        rho_internal_(rho * units::kg_per_m3_to_internal),
        l_perp_(lp),
        l_z_(lz) {}

  double sigma_e_;
  double sigma_h_;
  double c_;
  double rho_si_;
  double rho_internal_;
  double l_perp_;
  double l_z_;
};

// Inter-dot distance; infinity is a distinguished value for which every
// cross term carrying exp(i k_z d) is dropped analytically.
class DotDistance {
 public:
  static DotDistance infinite() { return DotDistance(std::nullopt); }
  static DotDistance nm(double d) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw InvalidParameter("inter-dot distance must be positive (or infinite)");
    }
    return DotDistance(d);
  }

  bool is_infinite() const noexcept { return !value_.has_value(); }
  double nm_value() const { return value_.value(); }

  std::string to_string() const {
    if (is_infinite()) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << *value_;
    return os.str();
  }

  friend bool operator==(const DotDistance&, const DotDistance&) = default;

 private:
  explicit DotDistance(std::optional<double> v) : value_(v) {}
  std::optional<double> value_;
};

struct BathConfig {
  double temperature_K = 77.0;
  DotDistance distance = DotDistance::nm(6.0);
  double delta_eps = 0.0;  // bare biexcitonic shift, 1/ps

  void validate() const {
    if (!(temperature_K >= 0.0) || !std::isfinite(temperature_K)) {
      throw InvalidParameter("temperature must be >= 0 K");
    }
    if (!std::isfinite(delta_eps)) throw InvalidParameter("delta_eps must be finite");
  }

  friend bool operator==(const BathConfig&, const BathConfig&) = default;
};

struct QuadratureConfig {
  double abs_tolerance = 1e-8;
  // Integration box half-widths in units of 2/l (the form factor |f|^2 has
  // Gaussian width 1/l); 7 leaves a tail far below 1e-10.
  double n_sigma = 7.0;
  std::size_t max_panels = 20000;  // per one-dimensional adaptive pass

  void validate() const {
    if (!(abs_tolerance > 0.0)) throw InvalidParameter("quadrature tolerance must be > 0");
    if (!(n_sigma > 0.0)) throw InvalidParameter("n_sigma must be > 0");
    if (max_panels < 1) throw InvalidParameter("max_panels must be >= 1");
  }

  friend bool operator==(const QuadratureConfig&, const QuadratureConfig&) = default;
};

enum class KernelB { B01, B03 };
enum class KernelA { A01, A03 };

// Per-mode weight of the continuum integrand: |g_k|^2 times the density of
// modes per dk_perp dk_z with the azimuth already integrated (2 pi k_perp).
// Finite at the origin since k_perp / k <= 1.
inline double coupling_squared(double k_perp, double k_z, const MaterialParams& p) {
  const double k = std::hypot(k_perp, k_z);
  if (k == 0.0) return 0.0;
  const double form = std::exp(-0.5 * (p.l_perp() * p.l_perp() * k_perp * k_perp +
                                       p.l_z() * p.l_z() * k_z * k_z));
  return p.coupling_prefactor() * (k_perp / k) * form;
}

// 2 n(w) + 1 = coth(hbar w / 2 k_B T); 1 at T = 0.
inline double bose_weight(double hbar_omega_meV, double temperature_K) {
  if (temperature_K == 0.0) return 1.0;
  const double x = hbar_omega_meV / (units::kB_meV_per_K * temperature_K);
  if (x < 1e-6) return 2.0 / x;
  return 1.0 + 2.0 / std::expm1(x);
}

// Kernel values at one time point, with their quadrature error bounds.
struct KernelSample {
  double t = 0.0;
  double A01 = 0.0;
  double A03 = 0.0;
  double B01 = 0.0;
  double B03 = 0.0;
  double err_A01 = 0.0;
  double err_A03 = 0.0;
  double err_B01 = 0.0;
  double err_B03 = 0.0;

  double B12() const { return 4.0 * B01 - B03; }
  double err_B12() const { return 4.0 * err_B01 + err_B03; }

  double max_error() const {
    return std::max({err_A01, err_A03, err_B01, err_B03, err_B12()});
  }

  // Phase A_ij and log-damping B_ij for 0 <= i < j <= 3 in the basis
  // (|00>, |01>, |10>, |11>).
  double A(int i, int j) const {
    const int key = pair_key(i, j);
    switch (key) {
      case 1: case 2: return A01;
      case 3: return A03;
      case 12: return 0.0;
      case 13: case 23: return A03 - A01;
      default: throw InvalidParameter("kernel index pair out of range");
    }
  }
  double B(int i, int j) const {
    const int key = pair_key(i, j);
    switch (key) {
      case 1: case 2: case 13: case 23: return B01;
      case 3: return B03;
      case 12: return B12();
      default: throw InvalidParameter("kernel index pair out of range");
    }
  }

  // exp(-i A_ij + B_ij)
  std::complex<double> coherence_factor(int i, int j) const {
    return std::exp(std::complex<double>(B(i, j), -A(i, j)));
  }

 private:
  static int pair_key(int i, int j) {
    if (i > j) std::swap(i, j);
    if (i < 0 || j > 3 || i == j) return -1;
    return 10 * i + j;
  }
};

// Evaluates the kernels for a fixed material, bath and quadrature setting.
// The renormalized shift is computed once at construction. Immutable after
// construction and safe to share between threads.
class PhononKernel {
 public:
  PhononKernel(MaterialParams material, BathConfig bath, QuadratureConfig quad = {})
      : material_(material), bath_(bath), quad_(quad) {
    bath_.validate();
    quad_.validate();
    kp_max_ = quad_.n_sigma * 2.0 / material_.l_perp();
    kz_max_ = quad_.n_sigma * 2.0 / material_.l_z();
    compute_shift();
  }

  const MaterialParams& material() const noexcept { return material_; }
  const BathConfig& bath() const noexcept { return bath_; }
  const QuadratureConfig& quadrature() const noexcept { return quad_; }

  double delta_E() const noexcept { return delta_E_; }
  double delta_E_error() const noexcept { return delta_E_error_; }
  // 2 Re sum w |g|^2 exp(i k_z d): the amount by which the bath lowers d_eps.
  double shift_correction() const noexcept { return bath_.delta_eps - delta_E_; }

  double k_perp_max() const noexcept { return kp_max_; }
  double k_z_max() const noexcept { return kz_max_; }

  KernelSample evaluate(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidParameter("time must be >= 0");
    KernelSample s;
    s.t = t;
    if (t == 0.0) return s;
    if (material_.coupling_vanishes()) {
      s.A03 = -delta_E_ * t;
      s.err_A03 = delta_E_error_ * t;
      return s;
    }

    if (bath_.distance.is_infinite()) {
      auto r = integrate_kernels<2>(t);
      s.B01 = r.value[0];
      s.A01 = r.value[1];
      s.err_B01 = r.error[0];
      s.err_A01 = r.error[1];
      // cos^2(k_z d/2) -> 1/2 once the cross term is dropped.
      s.B03 = 2.0 * s.B01;
      s.A03 = 2.0 * s.A01 - delta_E_ * t;
      s.err_B03 = 2.0 * s.err_B01;
      s.err_A03 = 2.0 * s.err_A01 + delta_E_error_ * t;
    } else {
      auto r = integrate_kernels<4>(t);
      s.B01 = r.value[0];
      s.A01 = r.value[1];
      s.B03 = r.value[2];
      s.A03 = r.value[3] - delta_E_ * t;
      s.err_B01 = r.error[0];
      s.err_A01 = r.error[1];
      s.err_B03 = r.error[2];
      s.err_A03 = r.error[3] + delta_E_error_ * t;
    }
    return s;
  }

 private:
  // Panels per axis so that each oscillation of the integrand along that
  // axis is covered by at least one 15-node panel.
  static std::size_t panels_for_phase(double phase_span) {
    return 1 + static_cast<std::size_t>(std::ceil(phase_span / (2.0 * units::pi)));
  }

  double finite_d() const {
    return bath_.distance.is_infinite() ? 0.0 : bath_.distance.nm_value();
  }

  template <std::size_t N>
  quad::Result<N> run_2d(auto&& integrand, double t) const {
    const double c = material_.c();
    quad::Options2D opts;
    opts.abs_tolerance = quad_.abs_tolerance / 2.0;  // the k_z < 0 half doubles the error
    opts.max_panels = quad_.max_panels;
    opts.outer_initial_panels = panels_for_phase(kz_max_ * (c * t + finite_d()));
    opts.inner_initial_panels = panels_for_phase(kp_max_ * c * t);
    auto r = quad::integrate_2d<N>(integrand, 0.0, kp_max_, 0.0, kz_max_, opts);
    for (std::size_t i = 0; i < N; ++i) {
      r.value[i] *= 2.0;
      r.error[i] *= 2.0;
    }
    if (!r.converged) {
      throw QuadratureNotConverged("kernel quadrature did not reach tolerance within " +
                                       std::to_string(quad_.max_panels) + " panels",
                                   r.value[0], r.max_error(), t);
    }
    return r;
  }

  // Components: [B01, A01] or [B01, A01, B03 (full), A03 without the shift].
  template <std::size_t N>
  quad::Result<N> integrate_kernels(double t) const {
    const double c = material_.c();
    const double temperature = bath_.temperature_K;
    const double d = finite_d();
    auto integrand = [&](double kp, double kz) {
      quad::Values<N> v{};
      const double w = coupling_squared(kp, kz, material_);
      const double k = std::hypot(kp, kz);
      const double omega = c * k;
      const double nb = bose_weight(units::hbar_meV_ps * omega, temperature);
      const double half_phase = 0.5 * omega * t;
      const double sh = std::sin(half_phase);
      const double ch = std::cos(half_phase);
      const double cos_minus_one = -2.0 * sh * sh;
      const double sin_wt = 2.0 * sh * ch;
      v[0] = w * cos_minus_one * nb;
      v[1] = w * sin_wt;
      if constexpr (N == 4) {
        const double cz = std::cos(0.5 * kz * d);
        const double interference = 4.0 * cz * cz;
        v[2] = interference * v[0];
        v[3] = interference * v[1];
      }
      return v;
    };
    return run_2d<N>(integrand, t);
  }

  void compute_shift() {
    if (bath_.distance.is_infinite() || material_.coupling_vanishes()) {
      delta_E_ = bath_.delta_eps;
      delta_E_error_ = 0.0;
      return;
    }
    const double c = material_.c();
    const double d = bath_.distance.nm_value();
    auto integrand = [&](double kp, double kz) {
      const double w = coupling_squared(kp, kz, material_);
      return quad::Values<1>{w * c * std::hypot(kp, kz) * std::cos(kz * d)};
    };
    auto r = run_2d<1>(integrand, 0.0);
    delta_E_ = bath_.delta_eps - 2.0 * r.value[0];
    delta_E_error_ = 2.0 * r.error[0];
  }

  MaterialParams material_;
  BathConfig bath_;
  QuadratureConfig quad_;
  double kp_max_ = 0.0;
  double kz_max_ = 0.0;
  double delta_E_ = 0.0;
  double delta_E_error_ = 0.0;
};

inline double deltaE_renormalized(const MaterialParams& p, const BathConfig& bath,
                                  const QuadratureConfig& quad = {}) {
  return PhononKernel(p, bath, quad).delta_E();
}

// Bare shift d_eps that yields the requested renormalized shift. The bath
// correction does not depend on d_eps, so the inversion is exact.
inline double delta_eps_for_target(double target_delta_E, const MaterialParams& p,
                                   BathConfig bath, const QuadratureConfig& quad = {}) {
  bath.delta_eps = 0.0;
  return target_delta_E + PhononKernel(p, bath, quad).shift_correction();
}

inline double kernel_B(double t, KernelB flavor, const MaterialParams& p,
                       const BathConfig& bath, const QuadratureConfig& quad = {}) {
  const auto s = PhononKernel(p, bath, quad).evaluate(t);
  return flavor == KernelB::B01 ? s.B01 : s.B03;
}

inline double kernel_A(double t, KernelA flavor, const MaterialParams& p,
                       const BathConfig& bath, const QuadratureConfig& quad = {}) {
  const auto s = PhononKernel(p, bath, quad).evaluate(t);
  return flavor == KernelA::A01 ? s.A01 : s.A03;
}

// Kernel table on a time grid.
struct DephasingKernels {
  std::vector<KernelSample> samples;
  double delta_E = 0.0;
  double delta_E_error = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  const KernelSample& operator[](std::size_t i) const { return samples[i]; }
};

namespace detail {
inline void check_grid(std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) {
      throw InvalidParameter("time grid must contain finite, nonnegative values");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw InvalidParameter("time grid must be strictly ascending");
    }
  }
}
}  // namespace detail

// Evaluates every grid point through PhononKernel::evaluate, so each entry
// is bit-identical to a pointwise call. `workers` > 1 splits the grid over
// threads; results do not depend on the split.
inline DephasingKernels kernels_on_grid(std::span<const double> grid, const PhononKernel& kernel,
                                        unsigned workers = 1) {
  detail::check_grid(grid);
  DephasingKernels out;
  out.delta_E = kernel.delta_E();
  out.delta_E_error = kernel.delta_E_error();
  out.samples.resize(grid.size());
  try {
    parallel_for(grid.size(), workers,
                 [&](std::size_t i) { out.samples[i] = kernel.evaluate(grid[i]); });
  } catch (const QuadratureNotConverged& e) {
    throw QuadratureNotConverged(e.what() + std::string(" at t = ") + std::to_string(e.at_time()) +
                                     " ps",
                                 e.estimate(), e.error_bound(), e.at_time());
  }
  return out;
}

inline DephasingKernels kernels_on_grid(std::span<const double> grid, const MaterialParams& p,
                                        const BathConfig& bath,
                                        const QuadratureConfig& quad = {},
                                        unsigned workers = 1) {
  return kernels_on_grid(grid, PhononKernel(p, bath, quad), workers);
}

}  // namespace dotdiscord

