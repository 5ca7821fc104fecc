// Primary generators: sea-level muons on a hemisphere and ambient γ-rays on a
// spherical shell, plus the flux-to-livetime normalisation.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "angular.hpp"
#include "core.hpp"
#include "rng.hpp"

namespace muontag {

struct Primary
{
    Species species = Species::Muon;
    double energy_mev = 0.0;
    Vec3 origin;
    Vec3 direction;
    double time_s = 0.0;
};

/*!
 * Flux normalisations, both as particles crossing a flat 1 cm² plate per
 * second: a horizontal plate for muons, any orientation for the isotropic γ
 * field (half the γ fluence rate).
 */
struct FluxConfig
{
    double muon_flux_per_cm2_s = 1.0 / 60.0;
    double gamma_flux_per_cm2_s = 13.5;
    double hemisphere_radius_cm = 7.5;
    double gamma_shell_radius_cm = 7.5;
};

//! Sea-level muon momentum spectrum dN/dE ∝ (E0 + E)^-n (1 + E/ε)^-1, E in GeV.
struct MuonSpectrum
{
    double e0_gev = 4.29;
    double index = 3.01;
    double epsilon_gev = 854.0;
    double e_min_gev = 0.1;
    double e_max_gev = 1e4;

    double density(double e_gev) const
    {
        return std::pow(e0_gev + e_gev, -index) / (1.0 + e_gev / epsilon_gev);
    }
};

//! Inverse-CDF sampler for MuonSpectrum over a logarithmic energy grid.
class MuonEnergySampler
{
  public:
    explicit MuonEnergySampler(const MuonSpectrum& s, int grid = 8192)
    {
        if (!(s.e_min_gev > 0 && s.e_max_gev > s.e_min_gev))
            throw ConfigError("muon energy range must satisfy 0 < e_min < e_max");
        double lmin = std::log(s.e_min_gev), lmax = std::log(s.e_max_gev);
        energy_.resize(grid + 1);
        cdf_.assign(grid + 1, 0.0);
        double first = 0.0;
        for (int i = 0; i <= grid; ++i)
            energy_[i] = std::exp(lmin + (lmax - lmin) * i / grid);
        for (int i = 1; i <= grid; ++i)
        {
            double a = energy_[i - 1], b = energy_[i];
            double fa = s.density(a), fb = s.density(b);
            cdf_[i] = cdf_[i - 1] + 0.5 * (b - a) * (fa + fb);
            first += 0.5 * (b - a) * (fa * a + fb * b);
        }
        double total = cdf_.back();
        for (double& c : cdf_) c /= total;
        mean_gev_ = first / total;
    }

    double mean_gev() const { return mean_gev_; }

    double sample_gev(double u) const
    {
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return energy_.front();
        if (it == cdf_.end()) return energy_.back();
        auto i = static_cast<std::size_t>(it - cdf_.begin());
        double t = (u - cdf_[i - 1]) / (cdf_[i] - cdf_[i - 1]);
        return energy_[i - 1] + t * (energy_[i] - energy_[i - 1]);
    }

  private:
    std::vector<double> energy_;
    std::vector<double> cdf_;
    double mean_gev_ = 0.0;
};

/*!
 * Ambient γ spectrum: discrete lines plus power-law continuum segments.
 *
 * Each continuum segment carries dN/dE ∝ E^slope on [lo, hi]. Weights are
 * relative and normalised on construction.
 */
class GammaSpectrum
{
  public:
    struct Line
    {
        double energy_mev = 0.0;
        double weight = 0.0;
    };
    struct Segment
    {
        double lo_mev = 0.0;
        double hi_mev = 0.0;
        double slope = 0.0;
        double weight = 0.0;
    };

    static constexpr double kMinEnergyMeV = 0.02;
    static constexpr double kMaxEnergyMeV = 2.615;

    GammaSpectrum() : GammaSpectrum(default_lines(), default_segments()) {}

    GammaSpectrum(std::vector<Line> lines, std::vector<Segment> segments)
        : lines_(std::move(lines)), segments_(std::move(segments))
    {
        double total = 0.0;
        auto in_range = [](double e) {
            return e >= kMinEnergyMeV * (1 - 1e-12) && e <= kMaxEnergyMeV * (1 + 1e-12);
        };
        for (const auto& l : lines_)
        {
            if (!in_range(l.energy_mev)) throw ConfigError("γ line energy outside [0.02, 2.615] MeV");
            if (!(l.weight >= 0)) throw ConfigError("γ line weight must be non-negative");
            total += l.weight;
        }
        for (const auto& s : segments_)
        {
            if (!in_range(s.lo_mev) || !in_range(s.hi_mev) || !(s.hi_mev > s.lo_mev))
                throw ConfigError("γ continuum segment outside [0.02, 2.615] MeV or empty");
            if (!(s.weight >= 0)) throw ConfigError("γ segment weight must be non-negative");
            total += s.weight;
        }
        if (!(total > 0)) throw ConfigError("γ spectrum has zero total weight");
        for (auto& l : lines_) l.weight /= total;
        for (auto& s : segments_) s.weight /= total;
    }

    static std::vector<Line> default_lines() { return {{1.461, 0.05}, {2.615, 0.02}}; }
    static std::vector<Segment> default_segments()
    {
        return {{0.02, 0.1, 1.0, 0.13}, {0.1, 0.5, -1.5, 0.55}, {0.5, 2.615, -1.8, 0.25}};
    }

    const std::vector<Line>& lines() const { return lines_; }
    const std::vector<Segment>& segments() const { return segments_; }

    //! Probability that a sampled energy lies at or above `cutoff_mev`.
    double fraction_above(double cutoff_mev) const
    {
        double f = 0.0;
        for (const auto& l : lines_)
            if (l.energy_mev >= cutoff_mev) f += l.weight;
        for (const auto& s : segments_)
        {
            if (cutoff_mev <= s.lo_mev)
                f += s.weight;
            else if (cutoff_mev < s.hi_mev)
                f += s.weight * (1.0 - segment_cdf(s, cutoff_mev));
        }
        return f;
    }

    //! Mean energy, MeV.
    double mean_mev() const
    {
        double m = 0.0;
        for (const auto& l : lines_) m += l.weight * l.energy_mev;
        for (const auto& s : segments_)
        {
            double a = s.lo_mev, b = s.hi_mev, p = s.slope;
            m += s.weight * power_integral(a, b, p + 1) / power_integral(a, b, p);
        }
        return m;
    }

    /*!
     * Sample an energy at or above `cutoff_mev` using two uniforms.
     */
    template<class Uniform>
    double sample(Uniform&& uniform, double cutoff_mev = kMinEnergyMeV) const
    {
        double norm = fraction_above(cutoff_mev);
        if (!(norm > 0)) throw ConfigError("γ spectrum has no weight above the cutoff");
        double pick = uniform() * norm;
        double v = uniform();
        for (const auto& l : lines_)
        {
            if (l.energy_mev < cutoff_mev) continue;
            if (pick < l.weight) return l.energy_mev;
            pick -= l.weight;
        }
        const Segment* last = nullptr;
        for (const auto& s : segments_)
        {
            if (cutoff_mev >= s.hi_mev) continue;
            double lo_cdf = cutoff_mev > s.lo_mev ? segment_cdf(s, cutoff_mev) : 0.0;
            double w = s.weight * (1.0 - lo_cdf);
            last = &s;
            if (pick < w) return segment_quantile(s, lo_cdf + v * (1.0 - lo_cdf));
            pick -= w;
        }
        // rounding residue lands on the top edge of the last component
        if (last) return segment_quantile(*last, 1.0);
        return lines_.back().energy_mev;
    }

  private:
    static double power_integral(double a, double b, double p)
    {
        if (std::abs(p + 1.0) < 1e-12) return std::log(b / a);
        return (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1);
    }
    static double segment_cdf(const Segment& s, double e)
    {
        return power_integral(s.lo_mev, e, s.slope) / power_integral(s.lo_mev, s.hi_mev, s.slope);
    }
    static double segment_quantile(const Segment& s, double u)
    {
        double a = s.lo_mev, b = s.hi_mev, p = s.slope;
        if (std::abs(p + 1.0) < 1e-12) return a * std::pow(b / a, u);
        double ap = std::pow(a, p + 1), bp = std::pow(b, p + 1);
        return std::clamp(std::pow(ap + u * (bp - ap), 1.0 / (p + 1)), a, b);
    }

    std::vector<Line> lines_;
    std::vector<Segment> segments_;
};

/*!
 * Exposure time represented by `n_generated` primaries.
 *
 * `generation_surface_cm2` is the area of the generation disk or sphere
 * cross section, and `geometry_factor` converts its crossing rate into the
 * quoted flux convention: the generation rate is flux·surface/geometry_factor.
 */
inline double equivalent_livetime(double n_generated, double flux_per_cm2_s,
                                  double generation_surface_cm2, double geometry_factor)
{
    if (!(flux_per_cm2_s > 0)) throw InvalidArgument("flux must be positive");
    if (!(generation_surface_cm2 > 0)) throw InvalidArgument("generation surface must be positive");
    if (!(geometry_factor > 0)) throw InvalidArgument("geometry factor must be positive");
    return n_generated * geometry_factor / (flux_per_cm2_s * generation_surface_cm2);
}

/*!
 * Muons crossing a sphere of radius R centred on the stack.
 *
 * For each direction d from the angular model, the impact point is uniform on
 * the disk of radius R through the origin perpendicular to d, and the track
 * starts where it enters the sphere. This is a uniform parallel beam per
 * direction, so every volume inside the sphere sees the correct flux.
 */
class MuonSource
{
  public:
    MuonSource(const FluxConfig& flux, const AngularModel& angular, const MuonSpectrum& spectrum = {})
        : flux_(flux), angular_(angular), energy_(spectrum)
    {
        if (!(flux.muon_flux_per_cm2_s >= 0)) throw ConfigError("muon flux must be non-negative");
        if (!(flux.hemisphere_radius_cm > 0)) throw ConfigError("hemisphere radius must be positive");
    }

    const AngularSampler& angular() const { return angular_; }
    const MuonEnergySampler& energy() const { return energy_; }
    double radius() const { return flux_.hemisphere_radius_cm; }
    double generation_surface_cm2() const { return kPi * radius() * radius(); }
    double geometry_factor() const { return angular_.mean_cos(); }

    //! Primaries per second crossing the generation disk.
    double generation_rate() const
    {
        return flux_.muon_flux_per_cm2_s * generation_surface_cm2() / geometry_factor();
    }

    Primary sample(Engine& rng) const
    {
        Primary p;
        p.species = Species::Muon;
        p.direction = angular_.sample_direction(rng);
        Vec3 u, v;
        orthonormal_basis(p.direction, u, v);
        double r2 = radius() * radius() * uniform01(rng);
        double psi = 2.0 * kPi * uniform01(rng);
        double r = std::sqrt(r2);
        Vec3 impact = u * (r * std::cos(psi)) + v * (r * std::sin(psi));
        p.origin = impact - p.direction * std::sqrt(std::max(0.0, radius() * radius() - r2));
        p.energy_mev = 1e3 * energy_.sample_gev(uniform01(rng));
        return p;
    }

  private:
    FluxConfig flux_;
    AngularSampler angular_;
    MuonEnergySampler energy_;
};

/*!
 * Isotropic γ field entering a sphere of radius R.
 *
 * Origins are uniform on the sphere and inward directions cosine-weighted
 * about the inward normal, which is the angular distribution of an
 * isotropic field crossing a surface element.
 */
class GammaSource
{
  public:
    GammaSource(const FluxConfig& flux, GammaSpectrum spectrum, double cutoff_mev = 0.02)
        : flux_(flux), spectrum_(std::move(spectrum)), cutoff_mev_(cutoff_mev)
    {
        if (!(flux.gamma_flux_per_cm2_s >= 0)) throw ConfigError("γ flux must be non-negative");
        if (!(flux.gamma_shell_radius_cm > 0)) throw ConfigError("γ shell radius must be positive");
        if (!(cutoff_mev >= GammaSpectrum::kMinEnergyMeV && cutoff_mev < GammaSpectrum::kMaxEnergyMeV))
            throw ConfigError("γ low-energy cutoff must lie in [0.02, 2.615) MeV");
    }

    const GammaSpectrum& spectrum() const { return spectrum_; }
    double cutoff_mev() const { return cutoff_mev_; }
    double radius() const { return flux_.gamma_shell_radius_cm; }
    double generation_surface_cm2() const { return kPi * radius() * radius(); }
    //! Plate-crossing flux over fluence rate for an isotropic field.
    double geometry_factor() const { return 0.5; }

    //! The configured flux covers the whole spectrum; only the part above
    //! the cutoff is generated.
    double generation_rate() const
    {
        return flux_.gamma_flux_per_cm2_s * generation_surface_cm2()
               * spectrum_.fraction_above(cutoff_mev_) / geometry_factor();
    }

    Primary sample(Engine& rng) const
    {
        Primary p;
        p.species = Species::Gamma;
        double cz = 2.0 * uniform01(rng) - 1.0;
        double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
        double phi = 2.0 * kPi * uniform01(rng);
        Vec3 n{sz * std::cos(phi), sz * std::sin(phi), cz};
        p.origin = n * radius();
        double c = std::sqrt(uniform01(rng));
        double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        double psi = 2.0 * kPi * uniform01(rng);
        Vec3 u, v;
        orthonormal_basis(n, u, v);
        p.direction = (n * (-c) + u * (s * std::cos(psi)) + v * (s * std::sin(psi))).normalized();
        p.energy_mev = spectrum_.sample([&] { return uniform01(rng); }, cutoff_mev_);
        return p;
    }

  private:
    FluxConfig flux_;
    GammaSpectrum spectrum_;
    double cutoff_mev_;
};

//! One muon primary. Builds the samplers per call; reuse a MuonSource for bulk sampling.
inline Primary sample_muon(Engine& rng, const FluxConfig& flux, const AngularModel& angular,
                           const MuonSpectrum& spectrum = {})
{
    return MuonSource(flux, angular, spectrum).sample(rng);
}

//! One γ primary. Reuse a GammaSource for bulk sampling.
inline Primary sample_gamma(Engine& rng, const FluxConfig& flux, const GammaSpectrum& spectrum,
                            double cutoff_mev = GammaSpectrum::kMinEnergyMeV)
{
    return GammaSource(flux, spectrum, cutoff_mev).sample(rng);
}

}  // namespace muontag
