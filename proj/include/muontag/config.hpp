// Run configuration: one JSON document with geometry, flux, transport, daq,
// analysis and run sections. Unknown keys are rejected.
#pragma once

#include <json.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "analysis.hpp"
#include "daq.hpp"
#include "geometry.hpp"
#include "transport.hpp"

namespace muontag {

struct RunSection
{
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> n_primaries;
    std::optional<double> livetime_s = 3600.0;
    std::string out_dir = "out";
    unsigned workers = 1;
    bool write_primaries = false;
};

struct RunConfig
{
    SimulationConfig simulation;
    DaqConfig daq;
    AnalysisConfig analysis;
    RunSection run;

    //! Throws ConfigError when any section is inconsistent.
    void validate() const
    {
        StackGeometry geometry(simulation.geometry);
        const auto& f = simulation.flux;
        if (!(f.muon_flux_per_cm2_s >= 0 && f.gamma_flux_per_cm2_s >= 0))
            throw ConfigError("fluxes must be non-negative");
        if (f.hemisphere_radius_cm < geometry.bounding_radius() || f.gamma_shell_radius_cm < geometry.bounding_radius())
            throw ConfigError("generation surfaces must enclose the full geometry");
        const auto& m = simulation.muon_spectrum;
        if (!(m.e_min_gev > 0 && m.e_max_gev > m.e_min_gev && m.index > 1 && m.epsilon_gev > 0 && m.e0_gev >= 0))
            throw ConfigError("invalid muon spectrum parameters");
        const auto& a = simulation.angular;
        if (a.kind == AngularModel::Kind::Parametric && !(a.spectral_index > 1 && a.earth_ratio > 0))
            throw ConfigError("invalid parametric angular model");
        if (!(simulation.gamma_cutoff_mev >= GammaSpectrum::kMinEnergyMeV
              && simulation.gamma_cutoff_mev < GammaSpectrum::kMaxEnergyMeV))
            throw ConfigError("gamma_cutoff_mev outside the tabulated range");
        const auto& t = simulation.transport;
        if (!(t.threshold_kev >= 0 && t.muon_max_deposit_kev > 0))
            throw ConfigError("invalid transport thresholds");
        if (!(simulation.slice_primaries >= 1)) throw ConfigError("slice_primaries must be >= 1");
        daq.validate();
        analysis.validate();
        if (run.n_primaries && run.livetime_s) throw ConfigError("run: give n_primaries or livetime_s, not both");
        if (!run.n_primaries && !run.livetime_s) throw ConfigError("run: n_primaries or livetime_s is required");
        if (run.livetime_s && !(*run.livetime_s >= 0)) throw ConfigError("run.livetime_s must be non-negative");
        if (run.workers < 1) throw ConfigError("run.workers must be >= 1");
    }
};

namespace detail {

inline const char* kDetectorKeys[kNumDetectors] = {"TOP", "CENTER", "BOTTOM"};

//! Reads the keys of one JSON object, remembering which were consumed.
class ObjectReader
{
  public:
    ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try
        {
            out = it->template get<T>();
        }
        catch (const nlohmann::json::exception&)
        {
            throw ConfigError(join(key) + " has the wrong type");
        }
    }

    template <class T>
    void get_optional(const char* key, std::optional<T>& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (it->is_null())
        {
            out.reset();
            return;
        }
        T v{};
        try
        {
            v = it->template get<T>();
        }
        catch (const nlohmann::json::exception&)
        {
            throw ConfigError(join(key) + " has the wrong type");
        }
        out = v;
    }

    //! Sub-object, or nullopt when absent.
    std::optional<ObjectReader> sub(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return std::nullopt;
        return ObjectReader(*it, join(key));
    }

    const nlohmann::json* raw(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key '" + join(k) + "'");
    }

    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read_geometry(ObjectReader& r, GeometryConfig& g)
{
    r.get("silicon_thickness_cm", g.silicon_thickness_cm);
    r.get("layer_gap_cm", g.layer_gap_cm);
    r.get("top_size_cm", g.top_size_cm);
    r.get("center_size_cm", g.center_size_cm);
    r.get("bottom_size_cm", g.bottom_size_cm);
    r.get("center_offset_cm", g.center_offset_cm);
    r.get("center_box", g.center_box);
    r.get("box_wall_cm", g.box_wall_cm);
    r.get("box_lid_cm", g.box_lid_cm);
    r.get("box_clearance_cm", g.box_clearance_cm);
    r.get("holders", g.holders);
    r.get("holder_frame_width_cm", g.holder_frame_width_cm);
    r.get("holder_thickness_cm", g.holder_thickness_cm);
    if (const auto* shields = r.raw("shields"))
    {
        if (!shields->is_array()) throw ConfigError(r.join("shields") + " must be an array");
        g.shields.clear();
        for (std::size_t i = 0; i < shields->size(); ++i)
        {
            ObjectReader s((*shields)[i], r.join("shields[" + std::to_string(i) + "]"));
            GeometryConfig::Shield sh;
            std::string material(to_string(sh.material));
            s.get("material", material);
            sh.material = material_from_string(material);
            s.get("half_extents_cm", sh.half_extents_cm);
            s.get("thickness_cm", sh.thickness_cm);
            s.finish();
            g.shields.push_back(sh);
        }
    }
}

inline void read_gamma_spectrum(ObjectReader& r, GammaSpectrum& spectrum)
{
    auto lines = spectrum.lines();
    auto segments = spectrum.segments();
    if (const auto* jl = r.raw("lines"))
    {
        if (!jl->is_array()) throw ConfigError(r.join("lines") + " must be an array");
        lines.clear();
        for (std::size_t i = 0; i < jl->size(); ++i)
        {
            ObjectReader s((*jl)[i], r.join("lines[" + std::to_string(i) + "]"));
            GammaSpectrum::Line l;
            s.get("energy_mev", l.energy_mev);
            s.get("weight", l.weight);
            s.finish();
            lines.push_back(l);
        }
    }
    if (const auto* js = r.raw("segments"))
    {
        if (!js->is_array()) throw ConfigError(r.join("segments") + " must be an array");
        segments.clear();
        for (std::size_t i = 0; i < js->size(); ++i)
        {
            ObjectReader s((*js)[i], r.join("segments[" + std::to_string(i) + "]"));
            GammaSpectrum::Segment g;
            s.get("lo_mev", g.lo_mev);
            s.get("hi_mev", g.hi_mev);
            s.get("slope", g.slope);
            s.get("weight", g.weight);
            s.finish();
            segments.push_back(g);
        }
    }
    spectrum = GammaSpectrum(std::move(lines), std::move(segments));
}

inline void read_flux(ObjectReader& r, SimulationConfig& sim)
{
    r.get("muon_flux_per_cm2_s", sim.flux.muon_flux_per_cm2_s);
    r.get("gamma_flux_per_cm2_s", sim.flux.gamma_flux_per_cm2_s);
    r.get("hemisphere_radius_cm", sim.flux.hemisphere_radius_cm);
    r.get("gamma_shell_radius_cm", sim.flux.gamma_shell_radius_cm);
    r.get("gamma_cutoff_mev", sim.gamma_cutoff_mev);
    if (auto a = r.sub("angular"))
    {
        std::string model = sim.angular.kind == AngularModel::Kind::Cos2 ? "cos2" : "parametric";
        a->get("model", model);
        if (model == "cos2")
            sim.angular.kind = AngularModel::Kind::Cos2;
        else if (model == "parametric")
            sim.angular.kind = AngularModel::Kind::Parametric;
        else
            throw ConfigError("unknown angular model '" + model + "'");
        a->get("spectral_index", sim.angular.spectral_index);
        a->get("earth_ratio", sim.angular.earth_ratio);
        a->finish();
    }
    if (auto m = r.sub("muon_spectrum"))
    {
        m->get("e0_gev", sim.muon_spectrum.e0_gev);
        m->get("index", sim.muon_spectrum.index);
        m->get("epsilon_gev", sim.muon_spectrum.epsilon_gev);
        m->get("e_min_gev", sim.muon_spectrum.e_min_gev);
        m->get("e_max_gev", sim.muon_spectrum.e_max_gev);
        m->finish();
    }
    if (auto g = r.sub("gamma_spectrum"))
    {
        read_gamma_spectrum(*g, sim.gamma_spectrum);
        g->finish();
    }
}

inline void read_transport(ObjectReader& r, SimulationConfig& sim)
{
    r.get("threshold_kev", sim.transport.threshold_kev);
    r.get("muon_max_deposit_kev", sim.transport.muon_max_deposit_kev);
    r.get("compton_continuation", sim.transport.compton_continuation);
    r.get("slice_primaries", sim.slice_primaries);
}

inline void read_daq(ObjectReader& r, DaqConfig& d)
{
    r.get("sampling_rate_hz", d.sampling_rate_hz);
    r.get("record_samples", d.record_samples);
    r.get("pre_trigger_samples", d.pre_trigger_samples);
    if (auto t = r.sub("templates"))
    {
        for (int c = 0; c < kNumDetectors; ++c)
        {
            if (auto s = t->sub(kDetectorKeys[c]))
            {
                s->get("rise_time_us", d.templates[c].rise_time_us);
                s->get("decay_time_us", d.templates[c].decay_time_us);
                s->get("gain_per_kev", d.templates[c].gain_per_kev);
                s->finish();
            }
        }
        t->finish();
    }
    if (auto n = r.sub("noise"))
    {
        n->get("white_rms", d.noise.white_rms);
        n->get("low_freq_knee_hz", d.noise.low_freq_knee_hz);
        n->finish();
    }
    if (auto t = r.sub("trigger"))
    {
        t->get("threshold_sigma", d.trigger.threshold_sigma);
        t->get("bandpass_low_hz", d.trigger.bandpass_low_hz);
        t->get("bandpass_high_hz", d.trigger.bandpass_high_hz);
        t->get("rms_estimation_s", d.trigger.rms_estimation_s);
        t->get("rearm_holdoff_us", d.trigger.rearm_holdoff_us);
        t->finish();
    }
    r.get("onset_jitter_us", d.onset_jitter_us);
    r.get("block_samples", d.block_samples);
    r.get("pulse_cutoff_decays", d.pulse_cutoff_decays);
}

inline std::string to_string(WindowMode m) { return m == WindowMode::Fixed ? "fixed" : "fit"; }

inline std::string to_string(AccidentalSource s)
{
    switch (s)
    {
        case AccidentalSource::Simulation: return "simulation";
        case AccidentalSource::MeasuredAnalytic: return "analytic";
        case AccidentalSource::Sideband: return "sideband";
    }
    return "simulation";
}

inline void read_analysis(ObjectReader& r, AnalysisConfig& a)
{
    r.get("select_threshold_sigma", a.select_threshold_sigma);
    r.get("bin_width_us", a.bin_width_us);
    r.get("histogram_lo_us", a.histogram_lo_us);
    r.get("histogram_hi_us", a.histogram_hi_us);
    r.get("fit_range_us", a.fit_range_us);
    r.get("window_sigmas", a.window_sigmas);
    r.get("min_significance", a.min_significance);
    std::string mode = to_string(a.window_mode);
    r.get("window_mode", mode);
    if (mode == "fixed")
        a.window_mode = WindowMode::Fixed;
    else if (mode == "fit")
        a.window_mode = WindowMode::Fit;
    else
        throw ConfigError("unknown window_mode '" + mode + "'");
    r.get("window_half_width_us", a.window_half_width_us);
    r.get("sideband_lo_us", a.sideband_lo_us);
    r.get("sideband_hi_us", a.sideband_hi_us);
    r.get("dedup_tolerance_us", a.dedup_tolerance_us);
    r.get("veto_s", a.veto_s);
    std::string src = to_string(a.accidental_source);
    r.get("accidental_source", src);
    if (src == "simulation")
        a.accidental_source = AccidentalSource::Simulation;
    else if (src == "analytic")
        a.accidental_source = AccidentalSource::MeasuredAnalytic;
    else if (src == "sideband")
        a.accidental_source = AccidentalSource::Sideband;
    else
        throw ConfigError("unknown accidental_source '" + src + "'");
    r.get("simulation_systematic", a.simulation_systematic);
    r.get("min_noise_records", a.min_noise_records);
    r.get("psd_max_records", a.psd_max_records);
    r.get("psd_veto_sigma", a.psd_veto_sigma);
    if (auto f = r.sub("filter"))
    {
        f->get("baseline_exclusion_decays", a.filter.baseline_exclusion_decays);
        f->get("min_separation_rises", a.filter.min_separation_rises);
        f->get("max_extra_pulses", a.filter.max_extra_pulses);
        f->get("extra_threshold_sigma", a.filter.extra_threshold_sigma);
        f->finish();
    }
}

inline void read_run(ObjectReader& r, RunSection& run)
{
    r.get("seed", run.seed);
    bool has_n = false, has_t = false;
    std::optional<std::uint64_t> n = run.n_primaries;
    std::optional<double> t = run.livetime_s;
    if (r.raw("n_primaries")) has_n = true;
    if (r.raw("livetime_s")) has_t = true;
    r.get_optional("n_primaries", n);
    r.get_optional("livetime_s", t);
    // giving only one of the two replaces the default choice
    if (has_n && !has_t && n) t.reset();
    if (has_t && !has_n && t) n.reset();
    run.n_primaries = n;
    run.livetime_s = t;
    r.get("out_dir", run.out_dir);
    r.get("workers", run.workers);
    r.get("write_primaries", run.write_primaries);
}

}  // namespace detail

namespace detail {
inline RunConfig parse_config(const nlohmann::json& j);
}

//! Parse a config document over the built-in defaults and validate it.
inline RunConfig config_from_json(const nlohmann::json& j)
{
    try
    {
        return detail::parse_config(j);
    }
    catch (const ConfigError&)
    {
        throw;
    }
    catch (const InvalidArgument& e)
    {
        throw ConfigError(e.what());
    }
}

namespace detail {
inline RunConfig parse_config(const nlohmann::json& j)
{
    RunConfig cfg;
    detail::ObjectReader root(j, "");
    auto section = [&](const char* key, auto&& fn) {
        if (auto s = root.sub(key))
        {
            fn(*s);
            s->finish();
        }
    };
    section("geometry", [&](auto& r) { detail::read_geometry(r, cfg.simulation.geometry); });
    section("flux", [&](auto& r) { detail::read_flux(r, cfg.simulation); });
    section("transport", [&](auto& r) { detail::read_transport(r, cfg.simulation); });
    section("daq", [&](auto& r) { detail::read_daq(r, cfg.daq); });
    section("analysis", [&](auto& r) { detail::read_analysis(r, cfg.analysis); });
    section("run", [&](auto& r) { detail::read_run(r, cfg.run); });
    root.raw("$schema");
    root.finish();
    cfg.validate();
    return cfg;
}
}  // namespace detail

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

inline nlohmann::json to_json(const RunConfig& cfg)
{
    using nlohmann::json;
    const auto& g = cfg.simulation.geometry;
    json shields = json::array();
    for (const auto& s : g.shields)
        shields.push_back({{"material", std::string(to_string(s.material))},
                           {"half_extents_cm", s.half_extents_cm},
                           {"thickness_cm", s.thickness_cm}});
    json geometry = {{"silicon_thickness_cm", g.silicon_thickness_cm},
                     {"layer_gap_cm", g.layer_gap_cm},
                     {"top_size_cm", g.top_size_cm},
                     {"center_size_cm", g.center_size_cm},
                     {"bottom_size_cm", g.bottom_size_cm},
                     {"center_offset_cm", g.center_offset_cm},
                     {"center_box", g.center_box},
                     {"box_wall_cm", g.box_wall_cm},
                     {"box_lid_cm", g.box_lid_cm},
                     {"box_clearance_cm", g.box_clearance_cm},
                     {"holders", g.holders},
                     {"holder_frame_width_cm", g.holder_frame_width_cm},
                     {"holder_thickness_cm", g.holder_thickness_cm},
                     {"shields", shields}};

    const auto& sim = cfg.simulation;
    json lines = json::array(), segments = json::array();
    for (const auto& l : sim.gamma_spectrum.lines()) lines.push_back({{"energy_mev", l.energy_mev}, {"weight", l.weight}});
    for (const auto& s : sim.gamma_spectrum.segments())
        segments.push_back({{"lo_mev", s.lo_mev}, {"hi_mev", s.hi_mev}, {"slope", s.slope}, {"weight", s.weight}});
    json flux = {
        {"muon_flux_per_cm2_s", sim.flux.muon_flux_per_cm2_s},
        {"gamma_flux_per_cm2_s", sim.flux.gamma_flux_per_cm2_s},
        {"hemisphere_radius_cm", sim.flux.hemisphere_radius_cm},
        {"gamma_shell_radius_cm", sim.flux.gamma_shell_radius_cm},
        {"gamma_cutoff_mev", sim.gamma_cutoff_mev},
        {"angular",
         {{"model", sim.angular.kind == AngularModel::Kind::Cos2 ? "cos2" : "parametric"},
          {"spectral_index", sim.angular.spectral_index},
          {"earth_ratio", sim.angular.earth_ratio}}},
        {"muon_spectrum",
         {{"e0_gev", sim.muon_spectrum.e0_gev},
          {"index", sim.muon_spectrum.index},
          {"epsilon_gev", sim.muon_spectrum.epsilon_gev},
          {"e_min_gev", sim.muon_spectrum.e_min_gev},
          {"e_max_gev", sim.muon_spectrum.e_max_gev}}},
        {"gamma_spectrum", {{"lines", lines}, {"segments", segments}}},
    };
    json transport = {{"threshold_kev", sim.transport.threshold_kev},
                      {"muon_max_deposit_kev", sim.transport.muon_max_deposit_kev},
                      {"compton_continuation", sim.transport.compton_continuation},
                      {"slice_primaries", sim.slice_primaries}};

    const auto& d = cfg.daq;
    json templates = json::object();
    for (int c = 0; c < kNumDetectors; ++c)
        templates[detail::kDetectorKeys[c]] = {{"rise_time_us", d.templates[c].rise_time_us},
                                               {"decay_time_us", d.templates[c].decay_time_us},
                                               {"gain_per_kev", d.templates[c].gain_per_kev}};
    json daq = {{"sampling_rate_hz", d.sampling_rate_hz},
                {"record_samples", d.record_samples},
                {"pre_trigger_samples", d.pre_trigger_samples},
                {"templates", templates},
                {"noise", {{"white_rms", d.noise.white_rms}, {"low_freq_knee_hz", d.noise.low_freq_knee_hz}}},
                {"trigger",
                 {{"threshold_sigma", d.trigger.threshold_sigma},
                  {"bandpass_low_hz", d.trigger.bandpass_low_hz},
                  {"bandpass_high_hz", d.trigger.bandpass_high_hz},
                  {"rms_estimation_s", d.trigger.rms_estimation_s},
                  {"rearm_holdoff_us", d.trigger.rearm_holdoff_us}}},
                {"onset_jitter_us", d.onset_jitter_us},
                {"block_samples", d.block_samples},
                {"pulse_cutoff_decays", d.pulse_cutoff_decays}};

    const auto& a = cfg.analysis;
    json analysis = {{"select_threshold_sigma", a.select_threshold_sigma},
                     {"bin_width_us", a.bin_width_us},
                     {"histogram_lo_us", a.histogram_lo_us},
                     {"histogram_hi_us", a.histogram_hi_us},
                     {"fit_range_us", a.fit_range_us},
                     {"window_sigmas", a.window_sigmas},
                     {"min_significance", a.min_significance},
                     {"window_mode", detail::to_string(a.window_mode)},
                     {"window_half_width_us", a.window_half_width_us},
                     {"sideband_lo_us", a.sideband_lo_us},
                     {"sideband_hi_us", a.sideband_hi_us},
                     {"dedup_tolerance_us", a.dedup_tolerance_us},
                     {"veto_s", a.veto_s},
                     {"accidental_source", detail::to_string(a.accidental_source)},
                     {"simulation_systematic", a.simulation_systematic},
                     {"min_noise_records", a.min_noise_records},
                     {"psd_max_records", a.psd_max_records},
                     {"psd_veto_sigma", a.psd_veto_sigma},
                     {"filter",
                      {{"baseline_exclusion_decays", a.filter.baseline_exclusion_decays},
                       {"min_separation_rises", a.filter.min_separation_rises},
                       {"max_extra_pulses", a.filter.max_extra_pulses},
                       {"extra_threshold_sigma", a.filter.extra_threshold_sigma}}}};

    const auto& r = cfg.run;
    json run = {{"seed", r.seed},
                {"n_primaries", r.n_primaries ? json(*r.n_primaries) : json(nullptr)},
                {"livetime_s", r.livetime_s ? json(*r.livetime_s) : json(nullptr)},
                {"out_dir", r.out_dir},
                {"workers", r.workers},
                {"write_primaries", r.write_primaries}};

    return {{"geometry", geometry}, {"flux", flux},         {"transport", transport},
            {"daq", daq},           {"analysis", analysis}, {"run", run}};
}

//! Config content that determines outputs: everything except worker count and output directory.
inline nlohmann::json output_relevant_json(const RunConfig& cfg)
{
    auto j = to_json(cfg);
    j["run"].erase("workers");
    j["run"].erase("out_dir");
    return j;
}

namespace detail {

inline const std::map<std::string, std::string>& config_descriptions()
{
    static const std::map<std::string, std::string> d = {
        {"geometry", "Detector stack. Lengths in cm, z is vertical, CENTER wafer at z = 0."},
        {"geometry.silicon_thickness_cm", "Thickness of every silicon wafer."},
        {"geometry.layer_gap_cm", "Vertical gap between adjacent wafer surfaces."},
        {"geometry.top_size_cm", "Lateral size (x, y) of the TOP wafer."},
        {"geometry.center_size_cm", "Lateral size (x, y) of the CENTER wafer."},
        {"geometry.bottom_size_cm", "Lateral size (x, y) of the BOTTOM wafer."},
        {"geometry.center_offset_cm", "Lateral offset (x, y) of the CENTER wafer."},
        {"geometry.center_box", "Copper box around the CENTER wafer."},
        {"geometry.box_wall_cm", "Side-wall thickness of the CENTER box."},
        {"geometry.box_lid_cm", "Lid and floor thickness of the CENTER box."},
        {"geometry.box_clearance_cm", "Clearance between the CENTER wafer and its box."},
        {"geometry.holders", "Copper frames holding the TOP and BOTTOM wafers."},
        {"geometry.holder_frame_width_cm", "Width of each holder frame."},
        {"geometry.holder_thickness_cm", "Thickness of each holder frame."},
        {"geometry.shields", "Closed rectangular shells around the stack, innermost first."},
        {"geometry.shields[].material", "aluminum, copper, or cryophy (treated as copper)."},
        {"geometry.shields[].half_extents_cm", "Outer half extents (x, y, z) of the shell."},
        {"geometry.shields[].thickness_cm", "Wall thickness of the shell."},
        {"flux", "Primary fluxes and spectra."},
        {"flux.muon_flux_per_cm2_s", "Muons crossing a horizontal 1 cm^2 plate per second."},
        {"flux.gamma_flux_per_cm2_s",
         "Gammas crossing a 1 cm^2 plate of any orientation per second (isotropic field; "
         "equals half the fluence rate), counted above gamma_cutoff_mev."},
        {"flux.hemisphere_radius_cm", "Radius of the muon generation sphere."},
        {"flux.gamma_shell_radius_cm", "Radius of the gamma generation sphere."},
        {"flux.gamma_cutoff_mev", "Lowest generated gamma energy."},
        {"flux.angular", "Muon zenith-angle model."},
        {"flux.angular.model", "cos2 (intensity proportional to cos^2) or parametric."},
        {"flux.angular.spectral_index", "Spectral index of the parametric model."},
        {"flux.angular.earth_ratio", "Earth radius over production height for the parametric model."},
        {"flux.muon_spectrum", "Sea-level muon energy spectrum (E0 + E)^-index / (1 + E/epsilon)."},
        {"flux.muon_spectrum.e0_gev", "Low-energy flattening scale."},
        {"flux.muon_spectrum.index", "Power-law index."},
        {"flux.muon_spectrum.epsilon_gev", "High-energy cutoff scale."},
        {"flux.muon_spectrum.e_min_gev", "Lowest sampled energy."},
        {"flux.muon_spectrum.e_max_gev", "Highest sampled energy."},
        {"flux.gamma_spectrum", "Ambient gamma spectrum: lines plus power-law segments, weights normalized."},
        {"flux.gamma_spectrum.lines", "Discrete lines."},
        {"flux.gamma_spectrum.lines[].energy_mev", "Line energy."},
        {"flux.gamma_spectrum.lines[].weight", "Relative weight."},
        {"flux.gamma_spectrum.segments", "Continuum segments with density proportional to E^slope."},
        {"flux.gamma_spectrum.segments[].lo_mev", "Segment lower edge."},
        {"flux.gamma_spectrum.segments[].hi_mev", "Segment upper edge."},
        {"flux.gamma_spectrum.segments[].slope", "Power-law slope."},
        {"flux.gamma_spectrum.segments[].weight", "Relative weight."},
        {"transport", "Energy deposition."},
        {"transport.threshold_kev", "Deposits below this energy are not counted as hits."},
        {"transport.muon_max_deposit_kev", "Truncation of the muon straggling distribution."},
        {"transport.compton_continuation", "Follow Compton-scattered photons to later wafers."},
        {"transport.slice_primaries", "Mean primaries per simulation time slice (parallel work unit)."},
        {"daq", "Waveform synthesis and trigger."},
        {"daq.sampling_rate_hz", "Sampling rate of every channel."},
        {"daq.record_samples", "Samples per recorded trace."},
        {"daq.pre_trigger_samples", "Samples recorded before the trigger sample."},
        {"daq.templates", "Pulse templates per channel (TOP, CENTER, BOTTOM)."},
        {"daq.templates.*.rise_time_us", "Rise time constant."},
        {"daq.templates.*.decay_time_us", "Decay time constant."},
        {"daq.templates.*.gain_per_kev", "Pulse peak height per keV deposited."},
        {"daq.noise", "Additive noise per channel."},
        {"daq.noise.white_rms", "White-noise standard deviation per sample."},
        {"daq.noise.low_freq_knee_hz", "Knee of an added 1/f component; 0 disables it."},
        {"daq.trigger", "Software trigger."},
        {"daq.trigger.threshold_sigma", "Threshold in units of the band-passed baseline RMS."},
        {"daq.trigger.bandpass_low_hz", "Band-pass lower corner."},
        {"daq.trigger.bandpass_high_hz", "Band-pass upper corner."},
        {"daq.trigger.rms_estimation_s", "Leading stream length used to estimate the baseline RMS."},
        {"daq.trigger.rearm_holdoff_us", "Time every channel must stay below threshold before the trigger re-arms."},
        {"daq.onset_jitter_us", "Uniform +- jitter of the pulse onset relative to the event time."},
        {"daq.block_samples", "Streaming block length (parallel work unit)."},
        {"daq.pulse_cutoff_decays", "Pulses are truncated after this many decay times."},
        {"analysis", "Pulse selection and coincidence analysis."},
        {"analysis.select_threshold_sigma", "Minimum amplitude in units of the filter resolution."},
        {"analysis.bin_width_us", "Delay histogram bin width."},
        {"analysis.histogram_lo_us", "Delay histogram lower edge."},
        {"analysis.histogram_hi_us", "Delay histogram upper edge."},
        {"analysis.fit_range_us", "Half range of the Gaussian-plus-constant window fit."},
        {"analysis.window_sigmas", "Fitted window half width in fitted sigmas."},
        {"analysis.min_significance", "Minimum peak significance for the window fit."},
        {"analysis.window_mode", "fixed (use window_half_width_us) or fit."},
        {"analysis.window_half_width_us", "Half width of the fixed coincidence window."},
        {"analysis.sideband_lo_us", "Sideband lower edge for the accidental estimate."},
        {"analysis.sideband_hi_us", "Sideband upper edge for the accidental estimate."},
        {"analysis.dedup_tolerance_us", "Pulses closer than this on one channel are one physical pulse."},
        {"analysis.veto_s", "Veto durations for the dead-time fraction."},
        {"analysis.accidental_source", "simulation, analytic (measured singles), or sideband."},
        {"analysis.simulation_systematic", "Relative systematic added to simulated rates."},
        {"analysis.min_noise_records", "Minimum pulse-free traces for a noise PSD."},
        {"analysis.psd_max_records", "Leading records searched for pulse-free traces."},
        {"analysis.psd_veto_sigma", "Traces with excursions above this many sigma are not pulse-free."},
        {"analysis.filter", "Matched-filter pile-up handling."},
        {"analysis.filter.baseline_exclusion_decays", "Baseline excludes +- this many decay times around a pulse."},
        {"analysis.filter.min_separation_rises", "Minimum separation of extra pulses in rise times."},
        {"analysis.filter.max_extra_pulses", "Extra pulses searched per trace."},
        {"analysis.filter.extra_threshold_sigma", "Threshold for extra pulses in filter resolutions."},
        {"run", "Run control. Command-line flags override these."},
        {"run.seed", "64-bit master seed."},
        {"run.n_primaries", "Expected number of generated primaries; exclusive with livetime_s."},
        {"run.livetime_s", "Simulated livetime; exclusive with n_primaries."},
        {"run.out_dir", "Output directory."},
        {"run.workers", "Worker threads; never changes outputs."},
        {"run.write_primaries", "Also write generated primaries of recorded events."},
    };
    return d;
}

inline nlohmann::json schema_of(const nlohmann::json& value, const std::string& path)
{
    using nlohmann::json;
    json s;
    const auto& desc = config_descriptions();
    if (auto it = desc.find(path); it != desc.end()) s["description"] = it->second;
    if (value.is_object())
    {
        s["type"] = "object";
        s["additionalProperties"] = false;
        json props = json::object();
        for (const auto& [k, v] : value.items())
        {
            std::string child = path.empty() ? k : path + "." + k;
            if (path == "daq.templates") child = "daq.templates.*";
            props[k] = schema_of(v, child);
        }
        s["properties"] = props;
    }
    else if (value.is_array())
    {
        s["type"] = "array";
        if (!value.empty())
        {
            if (value[0].is_object())
                s["items"] = schema_of(value[0], path + "[]");
            else
                s["items"] = {{"type", value[0].is_boolean() ? "boolean" : value[0].is_string() ? "string" : "number"}};
            if (!value[0].is_object() && (path.ends_with("_cm") || path.ends_with("_size_cm")))
                s["minItems"] = s["maxItems"] = value.size();
        }
        s["default"] = value;
    }
    else
    {
        if (value.is_boolean())
            s["type"] = "boolean";
        else if (value.is_string())
            s["type"] = "string";
        else if (value.is_number_unsigned() || value.is_number_integer())
            s["type"] = "integer";
        else if (value.is_number())
            s["type"] = "number";
        if (path == "run.n_primaries" || path == "run.livetime_s")
            s["type"] = json::array({path == "run.n_primaries" ? "integer" : "number", "null"});
        if (path == "flux.angular.model") s["enum"] = {"cos2", "parametric"};
        if (path == "analysis.window_mode") s["enum"] = {"fixed", "fit"};
        if (path == "analysis.accidental_source") s["enum"] = {"simulation", "analytic", "sideband"};
        if (path.ends_with(".material")) s["enum"] = {"aluminum", "copper", "cryophy"};
        s["default"] = value;
    }
    return s;
}

}  // namespace detail

//! JSON Schema of the config document, with every default.
inline nlohmann::json config_schema()
{
    auto s = detail::schema_of(to_json(RunConfig{}), "");
    s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    s["title"] = "muontag run configuration";
    s["properties"]["$schema"] = {{"type", "string"}};
    return s;
}

}  // namespace muontag
