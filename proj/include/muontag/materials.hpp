// Photon attenuation data for silicon, copper and aluminium (20 keV - 3 MeV).
//
// Mass attenuation coefficients are the NIST XCOM totals (coherent
// included), in cm²/g, interpolated log-log between tabulated energies.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "core.hpp"
#include "geometry.hpp"

namespace muontag {

inline constexpr double kElectronMassMeV = 0.51099895;
inline constexpr double kClassicalElectronRadiusCm = 2.8179403262e-13;
inline constexpr double kAvogadro = 6.02214076e23;

namespace detail {
inline constexpr std::size_t kTableSize = 19;
inline constexpr std::array<double, kTableSize> kTableEnergyMeV{
    0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3,
    0.4,  0.5,  0.6,  0.8,  1.0,  1.25, 1.5, 2.0,  3.0};
inline constexpr std::array<double, kTableSize> kSiliconMu{
    4.464,  1.436,   0.7012,  0.4385,  0.3207,  0.2228,  0.1835,
    0.1448, 0.1275,  0.1082,  0.09614, 0.08748, 0.08077, 0.07082,
    0.06361, 0.05688, 0.05183, 0.04480, 0.03678};
inline constexpr std::array<double, kTableSize> kCopperMu{
    33.79,  10.92,   4.862,   2.613,   1.593,   0.7630,  0.4584,
    0.2217, 0.1559,  0.1119,  0.09413, 0.08362, 0.07625, 0.06605,
    0.05901, 0.05261, 0.04803, 0.04205, 0.03599};
inline constexpr std::array<double, kTableSize> kAluminumMu{
    3.441,  1.128,   0.5685,  0.3681,  0.2778,  0.2018,  0.1704,
    0.1378, 0.1223,  0.1042,  0.09276, 0.08445, 0.07802, 0.06841,
    0.06146, 0.05496, 0.05006, 0.04324, 0.03541};
}  // namespace detail

inline constexpr double kTableMinMeV = 0.02;
inline constexpr double kTableMaxMeV = 3.0;

inline void check_table_range(double energy_mev)
{
    // small slack absorbs rounding on the table edges
    if (!(energy_mev >= kTableMinMeV * (1 - 1e-12) && energy_mev <= kTableMaxMeV * (1 + 1e-12)))
        throw InvalidArgument("photon energy " + std::to_string(energy_mev)
                              + " MeV outside attenuation table range [0.02, 3] MeV");
}

inline double density_g_cm3(Material m)
{
    switch (m)
    {
        case Material::Silicon: return 2.33;
        case Material::Copper: return 8.96;
        case Material::Aluminum: return 2.699;
    }
    return 0.0;
}

//! Total mass attenuation coefficient, cm²/g.
inline double mass_attenuation(Material m, double energy_mev)
{
    check_table_range(energy_mev);
    const auto& e = detail::kTableEnergyMeV;
    const auto& mu = m == Material::Silicon  ? detail::kSiliconMu
                     : m == Material::Copper ? detail::kCopperMu
                                             : detail::kAluminumMu;
    double x = std::clamp(energy_mev, e.front(), e.back());
    auto it = std::upper_bound(e.begin(), e.end(), x);
    std::size_t i = it == e.end() ? e.size() - 1 : static_cast<std::size_t>(it - e.begin());
    i = std::max<std::size_t>(i, 1);
    double t = std::log(x / e[i - 1]) / std::log(e[i] / e[i - 1]);
    return std::exp(std::log(mu[i - 1]) + t * std::log(mu[i] / mu[i - 1]));
}

//! Linear attenuation coefficient, 1/cm.
inline double linear_attenuation(Material m, double energy_mev)
{
    return mass_attenuation(m, energy_mev) * density_g_cm3(m);
}

//! Klein-Nishina total cross section per electron, cm².
inline double klein_nishina_cross_section(double energy_mev)
{
    double k = energy_mev / kElectronMassMeV;
    double l = std::log1p(2 * k);
    double a = (1 + k) / (k * k) * (2 * (1 + k) / (1 + 2 * k) - l / k);
    double b = l / (2 * k) - (1 + 3 * k) / ((1 + 2 * k) * (1 + 2 * k));
    return 2 * kPi * kClassicalElectronRadiusCm * kClassicalElectronRadiusCm * (a + b);
}

//! Partial mass attenuation coefficients for silicon, cm²/g.
struct SiliconPartials
{
    double total = 0.0;
    double compton = 0.0;     //!< free-electron Klein-Nishina
    double coherent = 0.0;    //!< Rayleigh, power-law fit to XCOM
    double absorption = 0.0;  //!< remainder: photoelectric (and pair above 1.022 MeV)
};

inline SiliconPartials silicon_partials(double energy_mev)
{
    constexpr double z_over_a = 14.0 / 28.0855;
    SiliconPartials p;
    p.total = mass_attenuation(Material::Silicon, energy_mev);
    p.compton = klein_nishina_cross_section(energy_mev) * z_over_a * kAvogadro;
    p.coherent = 0.236 * std::pow(energy_mev / 0.02, -1.75);
    // KN ignores electron binding and overshoots at the lowest energies
    p.compton = std::min(p.compton, p.total - p.coherent);
    p.absorption = std::max(0.0, p.total - p.compton - p.coherent);
    return p;
}

/*!
 * Sample the scattered-photon energy fraction ε = E'/E from the Klein-Nishina
 * distribution (Butcher-Messel composition-rejection).
 */
template<class Rng>
double sample_klein_nishina_fraction(double energy_mev, Rng&& uniform)
{
    double k = energy_mev / kElectronMassMeV;
    double eps0 = 1.0 / (1.0 + 2.0 * k);
    double eps0sq = eps0 * eps0;
    double alpha1 = -std::log(eps0);
    double alpha2 = 0.5 * (1.0 - eps0sq);
    while (true)
    {
        double eps, epssq;
        if (alpha1 / (alpha1 + alpha2) > uniform())
        {
            eps = std::exp(-alpha1 * uniform());
            epssq = eps * eps;
        }
        else
        {
            epssq = eps0sq + (1.0 - eps0sq) * uniform();
            eps = std::sqrt(epssq);
        }
        double one_minus_cos = (1.0 - eps) / (eps * k);
        double sin2 = one_minus_cos * (2.0 - one_minus_cos);
        double g = 1.0 - eps * sin2 / (1.0 + epssq);
        if (g >= uniform()) return eps;
    }
}

}  // namespace muontag
