#pragma once

// Internal unit system: lengths in nm, times in ps, energies in meV.
// Frequencies (and the biexcitonic shift) are angular, in 1/ps.

namespace dotdiscord::units {

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double hbar_meV_ps = 0.6582119569;
inline constexpr double kB_meV_per_K = 0.08617333262;

inline constexpr double meV_per_eV = 1000.0;

// 1 J = 1 / (1.602176634e-22) meV (exact, from the SI definition of e).
inline constexpr double meV_per_joule = 1.0 / 1.602176634e-22;

// kg = J s^2 / m^2, so 1 kg/m^3 = meV_per_joule * (1e12)^2 / (1e9)^2 / (1e9)^3
// meV ps^2 / nm^5.
inline constexpr double kg_per_m3_to_internal = meV_per_joule * 1e24 / 1e18 / 1e27;

inline constexpr double kg_per_m3_from_internal(double rho_internal) {
  return rho_internal / kg_per_m3_to_internal;
}

}  // namespace dotdiscord::units
