// Slab transport of muons and γ-rays through the stack, and the seeded,
// time-sliced simulation driver.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"
#include "landau.hpp"
#include "materials.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sources.hpp"

namespace muontag {

struct EnergyDeposit
{
    DetectorId detector = DetectorId::Top;
    double energy_kev = 0.0;
    double time_s = 0.0;
};

struct SimEvent
{
    std::uint64_t event_id = 0;
    Primary primary;
    std::vector<EnergyDeposit> deposits;

    //! Energy in a detector, or 0 when it has no deposit.
    double energy_kev(DetectorId id) const
    {
        for (const auto& d : deposits)
            if (d.detector == id) return d.energy_kev;
        return 0.0;
    }
    bool hit(DetectorId id) const { return energy_kev(id) > 0.0; }
};

struct TransportConfig
{
    double threshold_kev = 1.0;
    double muon_max_deposit_kev = 1e4;
    //! Forward-continue photons after Compton/coherent scattering with the
    //! reduced energy. When false the photon is dropped after any interaction.
    bool compton_continuation = true;
};

//! Landau-straggled muon deposit over a silicon chord, keV.
inline double muon_deposit(double path_length_cm, Engine& rng, double max_kev = 1e4)
{
    return sample_muon_deposit_kev(path_length_cm, [&] { return uniform01(rng); }, max_kev);
}

enum class GammaProcess : std::uint8_t
{
    None,
    Absorption,
    Compton,
    Coherent,
};

struct GammaStep
{
    GammaProcess process = GammaProcess::None;
    double deposit_kev = 0.0;
    double outgoing_mev = 0.0;  //!< photon energy after the step (0 if absorbed)
};

/*!
 * One γ crossing of a silicon chord of length `path_cm`.
 *
 * Interaction probability is 1 - exp(-µL); the branch is picked from the
 * partial coefficients. Compton deposits the Klein-Nishina recoil-electron
 * energy.
 */
inline GammaStep gamma_step(double path_cm, double energy_mev, Engine& rng)
{
    check_table_range(energy_mev);
    GammaStep step{GammaProcess::None, 0.0, energy_mev};
    if (!(path_cm > 0)) return step;
    SiliconPartials p = silicon_partials(energy_mev);
    double mu = p.total * density_g_cm3(Material::Silicon);
    if (uniform01(rng) >= -std::expm1(-mu * path_cm)) return step;
    double branch = uniform01(rng) * p.total;
    if (branch < p.absorption)
    {
        step.process = GammaProcess::Absorption;
        step.deposit_kev = energy_mev * 1e3;
        step.outgoing_mev = 0.0;
    }
    else if (branch < p.absorption + p.compton)
    {
        double eps = sample_klein_nishina_fraction(energy_mev, [&] { return uniform01(rng); });
        step.process = GammaProcess::Compton;
        step.deposit_kev = energy_mev * (1.0 - eps) * 1e3;
        step.outgoing_mev = energy_mev * eps;
    }
    else
    {
        step.process = GammaProcess::Coherent;
    }
    return step;
}

//! γ interaction in one silicon slab along `ray`; deposit time is left at 0.
inline std::optional<EnergyDeposit> gamma_interact(const Ray& ray, const Slab& slab,
                                                   double energy_mev, Engine& rng)
{
    check_table_range(energy_mev);
    auto hit = intersect_slab(ray, slab);
    if (!hit) return std::nullopt;
    GammaStep step = gamma_step(hit->path_length, energy_mev, rng);
    if (step.deposit_kev <= 0.0) return std::nullopt;
    return EnergyDeposit{slab.id, step.deposit_kev, 0.0};
}

//! Survival through every passive chord along the ray; muons always survive.
inline bool passive_attenuation(const Ray& ray, const std::vector<Slab>& passive,
                                double energy_mev, Engine& rng,
                                Species species = Species::Gamma)
{
    if (species == Species::Muon) return true;
    check_table_range(energy_mev);
    for (const auto& s : passive)
    {
        auto hit = intersect_slab(ray, s);
        if (!hit) continue;
        double mu = linear_attenuation(s.material, energy_mev);
        if (uniform01(rng) >= std::exp(-mu * hit->path_length)) return false;
    }
    return true;
}

/*!
 * Deposits (above threshold) produced by one primary.
 *
 * γ-rays walk every element crossed, in order of entry distance: passive
 * chords can absorb them, silicon chords can interact once each.
 */
inline std::vector<EnergyDeposit> transport_primary(const Primary& primary,
                                                    const StackGeometry& geometry,
                                                    const Slab& silicon_bounds,
                                                    const TransportConfig& cfg, Engine& rng)
{
    std::vector<EnergyDeposit> out;
    Ray ray{primary.origin, primary.direction};
    if (!intersect_slab(ray, silicon_bounds)) return out;

    if (primary.species == Species::Muon)
    {
        for (const auto& t : stack_traversal(ray, geometry))
        {
            double e = muon_deposit(t.path_length, rng, cfg.muon_max_deposit_kev);
            if (e >= cfg.threshold_kev) out.push_back({t.id, e, primary.time_s});
        }
        return out;
    }

    struct Crossing
    {
        const Slab* slab;
        bool silicon;
        double entry;
        double length;
    };
    std::vector<Crossing> crossings;
    for (const auto& s : geometry.slabs())
        if (auto h = intersect_slab(ray, s)) crossings.push_back({&s, true, h->entry_distance, h->path_length});
    for (const auto& s : geometry.passive())
        if (auto h = intersect_slab(ray, s)) crossings.push_back({&s, false, h->entry_distance, h->path_length});
    std::stable_sort(crossings.begin(), crossings.end(),
                     [](const Crossing& a, const Crossing& b) { return a.entry < b.entry; });

    double energy = primary.energy_mev;
    for (const auto& c : crossings)
    {
        if (energy < kTableMinMeV) break;
        if (!c.silicon)
        {
            double mu = linear_attenuation(c.slab->material, energy);
            if (uniform01(rng) >= std::exp(-mu * c.length)) break;
            continue;
        }
        GammaStep step = gamma_step(c.length, energy, rng);
        if (step.deposit_kev >= cfg.threshold_kev)
            out.push_back({c.slab->id, step.deposit_kev, primary.time_s});
        if (step.process == GammaProcess::Absorption) break;
        if (step.process != GammaProcess::None && !cfg.compton_continuation) break;
        energy = step.outgoing_mev;
    }
    return out;
}

struct SimulationConfig
{
    GeometryConfig geometry;
    FluxConfig flux;
    AngularModel angular;
    MuonSpectrum muon_spectrum;
    GammaSpectrum gamma_spectrum;
    double gamma_cutoff_mev = 0.02;
    TransportConfig transport;
    //! Mean number of primaries per time slice (the unit of parallel work).
    double slice_primaries = 8192.0;
};

struct RunControl
{
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> n_primaries;
    std::optional<double> livetime_s;
    unsigned workers = 1;
    const std::atomic<bool>* cancel = nullptr;
};

struct SpeciesCounts
{
    std::uint64_t generated = 0;
    std::array<std::uint64_t, kNumDetectors> singles{};
    std::uint64_t top_bottom = 0;
    std::uint64_t center = 0;
    std::uint64_t center_tagged = 0;  //!< CENTER with both TOP and BOTTOM

    SpeciesCounts& operator+=(const SpeciesCounts& o)
    {
        generated += o.generated;
        for (int i = 0; i < kNumDetectors; ++i) singles[i] += o.singles[i];
        top_bottom += o.top_bottom;
        center += o.center;
        center_tagged += o.center_tagged;
        return *this;
    }
};

struct SimulationSummary
{
    bool complete = true;
    std::uint64_t seed = 0;
    double livetime_s = 0.0;
    double muon_generation_rate = 0.0;
    double gamma_generation_rate = 0.0;
    double muon_equivalent_livetime_s = 0.0;
    double gamma_equivalent_livetime_s = 0.0;
    SpeciesCounts muon;
    SpeciesCounts gamma;
    std::uint64_t events = 0;

    const SpeciesCounts& counts(Species s) const { return s == Species::Muon ? muon : gamma; }

    //! Rate k/T with binomial error sqrt(k(1 - k/N))/T.
    Measurement rate_of(std::uint64_t k, std::uint64_t n) const
    {
        if (!(livetime_s > 0)) return {0.0, 0.0};
        double kk = static_cast<double>(k);
        double p = n > 0 ? kk / static_cast<double>(n) : 0.0;
        return {kk / livetime_s, std::sqrt(std::max(0.0, kk * (1.0 - p))) / livetime_s};
    }
    Measurement single_rate(Species s, DetectorId id) const
    {
        const auto& c = counts(s);
        return rate_of(c.singles[index_of(id)], c.generated);
    }
    Measurement top_bottom_rate(Species s) const
    {
        const auto& c = counts(s);
        return rate_of(c.top_bottom, c.generated);
    }
    Measurement single_rate(DetectorId id) const
    {
        return single_rate(Species::Muon, id) + single_rate(Species::Gamma, id);
    }
    Measurement top_bottom_rate() const
    {
        return top_bottom_rate(Species::Muon) + top_bottom_rate(Species::Gamma);
    }
};

struct SimulationResult
{
    std::vector<SimEvent> events;
    SimulationSummary summary;
};

namespace detail {
inline void count_event(SpeciesCounts& c, const std::vector<EnergyDeposit>& deposits)
{
    bool hit[kNumDetectors] = {false, false, false};
    for (const auto& d : deposits) hit[index_of(d.detector)] = true;
    for (int i = 0; i < kNumDetectors; ++i)
        if (hit[i]) ++c.singles[i];
    bool t = hit[0], m = hit[1], b = hit[2];
    if (t && b) ++c.top_bottom;
    if (m) ++c.center;
    if (m && t && b) ++c.center_tagged;
}

struct SliceOutput
{
    std::vector<SimEvent> muons;
    std::vector<SimEvent> gammas;
    SpeciesCounts muon_counts;
    SpeciesCounts gamma_counts;
};

template<class Source>
void run_species_slice(const Source& source, double rate, double t_lo, double t_hi,
                       Engine rng, const StackGeometry& geometry, const Slab& bounds,
                       const TransportConfig& tcfg, std::vector<SimEvent>& events,
                       SpeciesCounts& counts)
{
    double mean = rate * (t_hi - t_lo);
    if (!(mean > 0)) return;
    std::poisson_distribution<std::uint64_t> pois(mean);
    std::uint64_t n = pois(rng);
    std::vector<double> times(n);
    for (auto& t : times) t = t_lo + (t_hi - t_lo) * uniform01(rng);
    std::sort(times.begin(), times.end());
    counts.generated += n;
    for (double t : times)
    {
        Primary p = source.sample(rng);
        p.time_s = t;
        auto deposits = transport_primary(p, geometry, bounds, tcfg, rng);
        if (deposits.empty()) continue;
        count_event(counts, deposits);
        events.push_back({0, p, std::move(deposits)});
    }
}
}  // namespace detail

/*!
 * Generate and transport both species over a common exposure.
 *
 * Primaries form two independent Poisson processes. The exposure is cut into
 * time slices holding about `slice_primaries` primaries; each slice draws
 * from its own (seed, species, slice) stream, so the output does not depend on
 * the worker count. With `n_primaries` the exposure is n / (total rate).
 * When the cancel flag is raised, the completed prefix of slices is returned
 * and the summary is marked incomplete.
 */
inline SimulationResult run_simulation(const SimulationConfig& cfg, const RunControl& run)
{
    StackGeometry geometry(cfg.geometry);
    MuonSource muons(cfg.flux, cfg.angular, cfg.muon_spectrum);
    GammaSource gammas(cfg.flux, cfg.gamma_spectrum, cfg.gamma_cutoff_mev);
    double r_needed = geometry.bounding_radius();
    if (cfg.flux.hemisphere_radius_cm < r_needed || cfg.flux.gamma_shell_radius_cm < r_needed)
        throw ConfigError("generation surfaces must enclose the full geometry");
    if (!(cfg.slice_primaries >= 1)) throw ConfigError("slice_primaries must be >= 1");

    double r_mu = muons.generation_rate();
    double r_g = gammas.generation_rate();
    double r_total = r_mu + r_g;

    double livetime = 0.0;
    if (run.n_primaries && run.livetime_s)
        throw InvalidArgument("give either n_primaries or livetime_s, not both");
    if (run.n_primaries)
    {
        if (*run.n_primaries > 0 && !(r_total > 0))
            throw InvalidArgument("n_primaries requested but every flux is zero");
        livetime = *run.n_primaries == 0 ? 0.0 : static_cast<double>(*run.n_primaries) / r_total;
    }
    else if (run.livetime_s)
    {
        if (!(*run.livetime_s >= 0)) throw InvalidArgument("livetime must be non-negative");
        livetime = *run.livetime_s;
    }
    else
    {
        throw InvalidArgument("either n_primaries or livetime_s is required");
    }

    double slice_len = r_total > 0 ? cfg.slice_primaries / r_total : livetime;
    std::size_t n_slices = 0;
    if (livetime > 0) n_slices = static_cast<std::size_t>(std::ceil(livetime / slice_len));
    auto slice_lo = [&](std::size_t i) { return static_cast<double>(i) * slice_len; };
    auto slice_hi = [&](std::size_t i) { return std::min(livetime, static_cast<double>(i + 1) * slice_len); };

    Slab bounds = geometry.silicon_bounds();
    std::vector<detail::SliceOutput> slices(n_slices);
    std::vector<char> done(n_slices, 0);
    parallel_for(n_slices, run.workers, [&](std::size_t i) {
        if (run.cancel && run.cancel->load()) return;
        auto& out = slices[i];
        detail::run_species_slice(muons, r_mu, slice_lo(i), slice_hi(i),
                                  make_engine(run.seed, Stream::MuonSlice, i), geometry, bounds,
                                  cfg.transport, out.muons, out.muon_counts);
        detail::run_species_slice(gammas, r_g, slice_lo(i), slice_hi(i),
                                  make_engine(run.seed, Stream::GammaSlice, i), geometry, bounds,
                                  cfg.transport, out.gammas, out.gamma_counts);
        done[i] = 1;
    });

    std::size_t kept = 0;
    while (kept < n_slices && done[kept]) ++kept;

    SimulationResult result;
    auto& s = result.summary;
    s.complete = kept == n_slices;
    s.seed = run.seed;
    s.livetime_s = kept == n_slices ? livetime : (kept == 0 ? 0.0 : slice_hi(kept - 1));
    s.muon_generation_rate = r_mu;
    s.gamma_generation_rate = r_g;

    std::vector<SimEvent> mu_events, g_events;
    for (std::size_t i = 0; i < kept; ++i)
    {
        s.muon += slices[i].muon_counts;
        s.gamma += slices[i].gamma_counts;
        for (auto& e : slices[i].muons) mu_events.push_back(std::move(e));
        for (auto& e : slices[i].gammas) g_events.push_back(std::move(e));
    }
    if (r_mu > 0)
        s.muon_equivalent_livetime_s = equivalent_livetime(
            static_cast<double>(s.muon.generated), cfg.flux.muon_flux_per_cm2_s,
            muons.generation_surface_cm2(), muons.geometry_factor());
    if (r_g > 0)
        s.gamma_equivalent_livetime_s = equivalent_livetime(
            static_cast<double>(s.gamma.generated),
            cfg.flux.gamma_flux_per_cm2_s * cfg.gamma_spectrum.fraction_above(cfg.gamma_cutoff_mev),
            gammas.generation_surface_cm2(), gammas.geometry_factor());

    result.events.reserve(mu_events.size() + g_events.size());
    std::merge(std::make_move_iterator(mu_events.begin()), std::make_move_iterator(mu_events.end()),
               std::make_move_iterator(g_events.begin()), std::make_move_iterator(g_events.end()),
               std::back_inserter(result.events), [](const SimEvent& a, const SimEvent& b) {
                   return a.primary.time_s < b.primary.time_s;
               });
    for (std::size_t i = 0; i < result.events.size(); ++i) result.events[i].event_id = i;
    s.events = result.events.size();
    return result;
}

}  // namespace muontag
