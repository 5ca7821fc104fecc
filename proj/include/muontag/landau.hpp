// Landau straggling of minimum-ionising muons in thin silicon.
#pragma once

#include <gsl/gsl_randist.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace muontag {

//! Location of the maximum of the standard Landau density.
inline constexpr double kLandauModeLambda = -0.22278298;

/*!
 * Thin-absorber straggling parameters for a relativistic muon in silicon.
 *
 * ξ = (K/2)(Z/A) ρ x, and the most probable loss uses the high-energy
 * asymptotic form with full density-effect correction,
 * Δp = ξ [ln(2 m_e c² ξ / (ħω_p)²) + j], with j = 0.200.
 */
struct SiliconStraggling
{
    double density_g_cm3 = 2.329;
    double z_over_a = 0.49848;
    double plasma_energy_ev = 31.05;

    double xi_mev(double path_cm) const
    {
        return 0.5 * 0.307075 * z_over_a * density_g_cm3 * path_cm;
    }

    double most_probable_mev(double path_cm) const
    {
        double xi = xi_mev(path_cm);
        double arg = 2.0 * 0.51099895e6 * (xi * 1e6) / (plasma_energy_ev * plasma_energy_ev);
        return xi * (std::log(arg) + 0.200);
    }
};

/*!
 * Inverse-CDF table for the standard Landau distribution on [λ_min, λ_max].
 *
 * The density comes from GSL; the table is uniform in λ near the core and
 * logarithmic in the power-law tail.
 */
class LandauTable
{
  public:
    LandauTable(double lambda_min = -4.0, double lambda_max = 1e5)
    {
        std::vector<double> grid;
        for (double l = lambda_min; l < 20.0; l += 0.002) grid.push_back(l);
        for (double l = 20.0; l < lambda_max; l *= 1.002) grid.push_back(l);
        grid.push_back(lambda_max);

        lambda_ = grid;
        cdf_.assign(grid.size(), 0.0);
        double prev = gsl_ran_landau_pdf(grid[0]);
        for (std::size_t i = 1; i < grid.size(); ++i)
        {
            // Simpson on each interval
            double mid = gsl_ran_landau_pdf(0.5 * (grid[i] + grid[i - 1]));
            double cur = gsl_ran_landau_pdf(grid[i]);
            cdf_[i] = cdf_[i - 1] + (grid[i] - grid[i - 1]) * (prev + 4 * mid + cur) / 6.0;
            prev = cur;
        }
        // the mass above λ_max (~1/λ_max) is folded into the table
        double total = cdf_.back();
        for (double& c : cdf_) c /= total;
    }

    double cdf(double lambda) const
    {
        if (lambda <= lambda_.front()) return 0.0;
        if (lambda >= lambda_.back()) return 1.0;
        auto it = std::upper_bound(lambda_.begin(), lambda_.end(), lambda);
        auto i = static_cast<std::size_t>(it - lambda_.begin());
        double t = (lambda - lambda_[i - 1]) / (lambda_[i] - lambda_[i - 1]);
        return cdf_[i - 1] + t * (cdf_[i] - cdf_[i - 1]);
    }

    double quantile(double u) const
    {
        u = std::clamp(u, 0.0, 1.0);
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return lambda_.front();
        if (it == cdf_.end()) return lambda_.back();
        auto i = static_cast<std::size_t>(it - cdf_.begin());
        double t = (u - cdf_[i - 1]) / (cdf_[i] - cdf_[i - 1]);
        return lambda_[i - 1] + t * (lambda_[i] - lambda_[i - 1]);
    }

    static const LandauTable& instance()
    {
        static const LandauTable table;
        return table;
    }

  private:
    std::vector<double> lambda_;
    std::vector<double> cdf_;
};

/*!
 * Sample a muon energy loss (keV) over `path_cm` of silicon.
 *
 * The Landau variate is truncated at `max_kev` by drawing the uniform only
 * over the admissible CDF range, so each sample consumes exactly one uniform.
 */
template<class Uniform>
double sample_muon_deposit_kev(double path_cm, Uniform&& uniform, double max_kev = 1e4,
                               const SiliconStraggling& straggling = {})
{
    if (!(path_cm > 0)) throw InvalidArgument("muon path length must be positive");
    double xi = straggling.xi_mev(path_cm) * 1e3;
    double mpv = straggling.most_probable_mev(path_cm) * 1e3;
    const auto& table = LandauTable::instance();
    double lambda_cap = kLandauModeLambda + (max_kev - mpv) / xi;
    double u_cap = table.cdf(lambda_cap);
    double lambda = table.quantile(uniform() * u_cap);
    return std::max(0.0, mpv + xi * (lambda - kLandauModeLambda));
}

}  // namespace muontag
