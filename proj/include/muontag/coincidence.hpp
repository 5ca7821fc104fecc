// T–B coincidence analysis: delay histogram, Gaussian window fit, sideband
// and analytic accidentals, dead time, efficiency and muon-rate extraction.
#pragma once

#include <gsl/gsl_blas.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "core.hpp"
#include "pulse.hpp"

namespace muontag {

//! Independent-stream accidental rate r_t · r_b · Δt.
inline double analytic_accidentals(double r_t, double r_b, double window_s)
{
    if (r_t < 0 || r_b < 0 || window_s < 0) throw InvalidArgument("accidental inputs must be non-negative");
    return r_t * r_b * window_s;
}

//! Fraction of time vetoed: (coincidence rate + accidental rate) × veto.
inline double dead_time_fraction(double r_gamma_coinc, double r_acc, double veto_s)
{
    if (r_gamma_coinc < 0 || r_acc < 0 || veto_s < 0) throw InvalidArgument("dead-time inputs must be non-negative");
    return (r_gamma_coinc + r_acc) * veto_s;
}

//! tagged/total with binomial error sqrt(p(1-p)/n).
inline Measurement tagging_efficiency(std::uint64_t tagged, std::uint64_t total)
{
    if (total == 0) throw InvalidArgument("tagging efficiency needs total > 0");
    if (tagged > total) throw InvalidArgument("tagged exceeds total");
    double p = static_cast<double>(tagged) / static_cast<double>(total);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(total))};
}

struct ExtractedRate
{
    Measurement rate;
    bool negative = false;
};

//! R_TB - R_TB^γγ - R_acc with quadrature errors; negative values are flagged.
inline ExtractedRate extract_muon_rate(const Measurement& r_tb_total, const Measurement& r_tb_gamma_gamma,
                                       const Measurement& r_acc)
{
    Measurement m = r_tb_total - r_tb_gamma_gamma - r_acc;
    return {m, m.value < 0};
}

/*!
 * Histogram of Δt = t(BOTTOM) - t(TOP), µs.
 *
 * The raw delays are kept alongside the counts so that window integrals do
 * not depend on binning.
 */
class DelayHistogram
{
  public:
    DelayHistogram(double lo_us = -6000.0, double hi_us = 18000.0, double bin_width_us = 20.0)
        : lo_(lo_us), width_(bin_width_us)
    {
        if (!(bin_width_us > 0 && hi_us > lo_us)) throw InvalidArgument("invalid histogram binning");
        counts_.assign(static_cast<std::size_t>(std::llround((hi_us - lo_us) / bin_width_us)), 0);
    }

    void add(double delay_us)
    {
        delays_.push_back(delay_us);
        double x = (delay_us - lo_) / width_;
        if (x < 0 || x >= static_cast<double>(counts_.size()))
        {
            ++overflow_;
            return;
        }
        ++counts_[static_cast<std::size_t>(x)];
    }

    //! Associative merge of a partial histogram with identical binning.
    void merge(const DelayHistogram& o)
    {
        if (o.lo_ != lo_ || o.width_ != width_ || o.counts_.size() != counts_.size())
            throw InvalidArgument("histogram binning mismatch");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
        delays_.insert(delays_.end(), o.delays_.begin(), o.delays_.end());
        overflow_ += o.overflow_;
    }

    std::size_t n_bins() const { return counts_.size(); }
    double bin_width() const { return width_; }
    double lo() const { return lo_; }
    double hi() const { return lo_ + width_ * static_cast<double>(counts_.size()); }
    double bin_low(std::size_t i) const { return lo_ + width_ * static_cast<double>(i); }
    double bin_center(std::size_t i) const { return bin_low(i) + 0.5 * width_; }
    std::uint64_t count(std::size_t i) const { return counts_[i]; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    const std::vector<double>& delays() const { return delays_; }
    std::uint64_t entries() const { return delays_.size(); }
    std::uint64_t overflow() const { return overflow_; }

    //! Entries with lo <= Δt < hi, from the raw delays.
    std::uint64_t count_between(double lo_us, double hi_us) const
    {
        std::uint64_t n = 0;
        for (double d : delays_)
            if (d >= lo_us && d < hi_us) ++n;
        return n;
    }

  private:
    double lo_;
    double width_;
    std::vector<std::uint64_t> counts_;
    std::vector<double> delays_;
    std::uint64_t overflow_ = 0;
};

struct CoincidenceWindow
{
    double center_us = 0.0;
    double half_width_us = 170.0;
    double total_width_us() const { return 2.0 * half_width_us; }
    double lo_us() const { return center_us - half_width_us; }
    double hi_us() const { return center_us + half_width_us; }
};

struct WindowFit
{
    CoincidenceWindow window;
    double amplitude = 0.0;
    double mean_us = 0.0;
    double sigma_us = 0.0;
    double sigma_error_us = 0.0;
    double flat = 0.0;
    double significance = 0.0;
    double chi2_ndf = 0.0;
};

/*!
 * Peak significance: excess in |Δt| < core over the flat level measured at
 * side <= |Δt| <= range, in units of the expected background fluctuation.
 */
inline double peak_significance(const DelayHistogram& h, double range_us = 2500.0, double core_us = 200.0,
                                double side_us = 400.0)
{
    double side_counts = 0.0, side_bins = 0.0, core_counts = 0.0, core_bins = 0.0;
    for (std::size_t i = 0; i < h.n_bins(); ++i)
    {
        double c = h.bin_center(i);
        if (std::abs(c) < core_us)
        {
            core_counts += static_cast<double>(h.count(i));
            core_bins += 1.0;
        }
        else if (std::abs(c) >= side_us && std::abs(c) <= range_us)
        {
            side_counts += static_cast<double>(h.count(i));
            side_bins += 1.0;
        }
    }
    if (core_bins == 0 || side_bins == 0) return 0.0;
    double expected = side_counts / side_bins * core_bins;
    double var = expected + expected * expected / std::max(side_counts, 1.0);
    return (core_counts - expected) / std::sqrt(std::max(var, 1.0));
}

namespace detail {
struct FitData
{
    std::vector<double> x, y, w;
};

inline int gauss_flat_f(const gsl_vector* p, void* data, gsl_vector* f)
{
    auto* d = static_cast<FitData*>(data);
    double a = gsl_vector_get(p, 0), mu = gsl_vector_get(p, 1), s = gsl_vector_get(p, 2),
           c = gsl_vector_get(p, 3);
    for (std::size_t i = 0; i < d->x.size(); ++i)
    {
        double z = (d->x[i] - mu) / s;
        double model = a * std::exp(-0.5 * z * z) + c;
        gsl_vector_set(f, i, (model - d->y[i]) * d->w[i]);
    }
    return GSL_SUCCESS;
}

inline int gauss_flat_df(const gsl_vector* p, void* data, gsl_matrix* jac)
{
    auto* d = static_cast<FitData*>(data);
    double a = gsl_vector_get(p, 0), mu = gsl_vector_get(p, 1), s = gsl_vector_get(p, 2);
    for (std::size_t i = 0; i < d->x.size(); ++i)
    {
        double z = (d->x[i] - mu) / s;
        double e = std::exp(-0.5 * z * z);
        gsl_matrix_set(jac, i, 0, e * d->w[i]);
        gsl_matrix_set(jac, i, 1, a * e * z / s * d->w[i]);
        gsl_matrix_set(jac, i, 2, a * e * z * z / s * d->w[i]);
        gsl_matrix_set(jac, i, 3, d->w[i]);
    }
    return GSL_SUCCESS;
}
}  // namespace detail

/*!
 * Gaussian-plus-constant least-squares fit over |Δt| <= range; the window is
 * mean ± n_sigma·σ. Bins are weighted by 1/sqrt(max(count, 1)).
 */
inline WindowFit fit_coincidence_window(const DelayHistogram& h, double range_us = 2500.0,
                                        double n_sigma = 3.0, double min_significance = 5.0)
{
    WindowFit fit;
    fit.significance = peak_significance(h, range_us);
    if (!(fit.significance >= min_significance))
        throw FitError("insufficient peak significance (" + std::to_string(fit.significance) + " sigma)");

    detail::FitData data;
    std::vector<double> side;
    double best_y = -1, best_x = 0;
    for (std::size_t i = 0; i < h.n_bins(); ++i)
    {
        double x = h.bin_center(i);
        if (std::abs(x) > range_us) continue;
        double y = static_cast<double>(h.count(i));
        data.x.push_back(x);
        data.y.push_back(y);
        data.w.push_back(1.0 / std::sqrt(std::max(y, 1.0)));
        if (std::abs(x) >= 400.0) side.push_back(y);
        if (y > best_y)
        {
            best_y = y;
            best_x = x;
        }
    }
    if (data.x.size() < 8) throw FitError("too few bins in the fit range");
    double c0 = 0.0;
    if (!side.empty())
    {
        std::nth_element(side.begin(), side.begin() + static_cast<std::ptrdiff_t>(side.size() / 2), side.end());
        c0 = side[side.size() / 2];
    }

    const std::size_t n = data.x.size(), p = 4;
    gsl_multifit_nlinear_fdf fdf;
    fdf.f = detail::gauss_flat_f;
    fdf.df = detail::gauss_flat_df;
    fdf.fvv = nullptr;
    fdf.n = n;
    fdf.p = p;
    fdf.params = &data;
    gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
    gsl_multifit_nlinear_workspace* ws =
        gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, n, p);
    gsl_vector* x0 = gsl_vector_alloc(p);
    gsl_vector_set(x0, 0, std::max(best_y - c0, 1.0));
    gsl_vector_set(x0, 1, best_x);
    gsl_vector_set(x0, 2, std::max(3.0 * h.bin_width(), 50.0));
    gsl_vector_set(x0, 3, c0);
    gsl_multifit_nlinear_init(x0, &fdf, ws);
    int info = 0;
    int status = gsl_multifit_nlinear_driver(200, 1e-10, 1e-10, 1e-10, nullptr, nullptr, &info, ws);
    gsl_vector* sol = ws->x;
    fit.amplitude = gsl_vector_get(sol, 0);
    fit.mean_us = gsl_vector_get(sol, 1);
    fit.sigma_us = std::abs(gsl_vector_get(sol, 2));
    fit.flat = gsl_vector_get(sol, 3);

    gsl_matrix* jac = gsl_multifit_nlinear_jac(ws);
    gsl_matrix* covar = gsl_matrix_alloc(p, p);
    gsl_multifit_nlinear_covar(jac, 0.0, covar);
    double chi2 = 0.0;
    gsl_blas_ddot(ws->f, ws->f, &chi2);
    fit.chi2_ndf = chi2 / static_cast<double>(n - p);
    fit.sigma_error_us = std::sqrt(std::max(0.0, gsl_matrix_get(covar, 2, 2)) * std::max(1.0, fit.chi2_ndf));
    gsl_matrix_free(covar);
    gsl_vector_free(x0);
    gsl_multifit_nlinear_free(ws);

    if (status != GSL_SUCCESS) throw FitError("Gaussian window fit did not converge");
    if (!(fit.sigma_us > 0) || !(fit.amplitude > 0) || std::abs(fit.mean_us) > range_us)
        throw FitError("Gaussian window fit returned unphysical parameters");
    fit.window = {fit.mean_us, n_sigma * fit.sigma_us};
    return fit;
}

/*!
 * Accidental rate from a sideband of the delay histogram, scaled to the
 * window width. Zero counts give zero with the 68 % upper-limit error
 * (1.148 counts).
 */
inline Measurement sideband_accidentals(const DelayHistogram& h, double lo_us, double hi_us,
                                        double window_width_us, double livetime_s)
{
    if (!(hi_us > lo_us)) throw InvalidArgument("empty sideband range");
    if (!(livetime_s > 0)) throw InvalidArgument("livetime must be positive");
    if (lo_us < h.lo() || hi_us > h.hi()) throw InvalidArgument("sideband outside the histogram range");
    double n = static_cast<double>(h.count_between(lo_us, hi_us));
    double scale = window_width_us / (hi_us - lo_us) / livetime_s;
    double err = n > 0 ? std::sqrt(n) * scale : 1.148 * scale;
    return {n * scale, err};
}

//! Pulse with an absolute time and a per-channel physical identifier.
struct TimedPulse
{
    Pulse pulse;
    double time_s = 0.0;
    std::uint64_t physical_id = 0;
};

/*!
 * Assign physical ids: pulses on one channel whose absolute times lie within
 * `tolerance_us` of the previous one (in time order) are the same physical
 * pulse seen in overlapping records.
 */
inline std::vector<TimedPulse> assign_physical_ids(const std::vector<Pulse>& pulses, double tolerance_us)
{
    std::vector<TimedPulse> out;
    out.reserve(pulses.size());
    for (const auto& p : pulses) out.push_back({p, p.t0_s + 1e-6 * p.peak_time_us, 0});
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out[a].pulse.channel != out[b].pulse.channel) return out[a].pulse.channel < out[b].pulse.channel;
        return out[a].time_s < out[b].time_s;
    });
    std::uint64_t next = 0;
    for (std::size_t k = 0; k < order.size(); ++k)
    {
        auto& cur = out[order[k]];
        if (k > 0)
        {
            const auto& prev = out[order[k - 1]];
            if (prev.pulse.channel == cur.pulse.channel
                && (cur.time_s - prev.time_s) * 1e6 < tolerance_us && prev.pulse.record_id != cur.pulse.record_id)
            {
                cur.physical_id = prev.physical_id;
                continue;
            }
        }
        cur.physical_id = next++;
    }
    return out;
}

//! Number of distinct physical pulses per channel.
inline std::array<std::uint64_t, kNumDetectors> unique_pulse_counts(const std::vector<TimedPulse>& pulses)
{
    std::array<std::set<std::uint64_t>, kNumDetectors> ids;
    for (const auto& p : pulses) ids[index_of(p.pulse.channel)].insert(p.physical_id);
    return {ids[0].size(), ids[1].size(), ids[2].size()};
}

/*!
 * Delay histogram from selected pulses.
 *
 * Per record the largest TOP and the largest BOTTOM pulse are paired; a pair
 * of physical pulses already counted from an overlapping record is skipped.
 */
inline DelayHistogram build_delay_histogram(const std::vector<TimedPulse>& pulses, double bin_width_us = 20.0,
                                            double lo_us = -6000.0, double hi_us = 18000.0)
{
    DelayHistogram h(lo_us, hi_us, bin_width_us);
    std::map<std::uint64_t, std::pair<const TimedPulse*, const TimedPulse*>> per_record;
    for (const auto& p : pulses)
    {
        auto& slot = per_record[p.pulse.record_id];
        if (p.pulse.channel == DetectorId::Top)
        {
            if (!slot.first || p.pulse.amplitude > slot.first->pulse.amplitude) slot.first = &p;
        }
        else if (p.pulse.channel == DetectorId::Bottom)
        {
            if (!slot.second || p.pulse.amplitude > slot.second->pulse.amplitude) slot.second = &p;
        }
    }
    std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
    for (const auto& [id, slot] : per_record)
    {
        if (!slot.first || !slot.second) continue;
        if (!seen.insert({slot.first->physical_id, slot.second->physical_id}).second) continue;
        h.add(slot.second->pulse.peak_time_us - slot.first->pulse.peak_time_us);
    }
    return h;
}

//! Convenience overload for plain pulses from distinct records.
inline DelayHistogram build_delay_histogram(const std::vector<Pulse>& pulses, double bin_width_us = 20.0,
                                            double lo_us = -6000.0, double hi_us = 18000.0)
{
    return build_delay_histogram(assign_physical_ids(pulses, 0.0), bin_width_us, lo_us, hi_us);
}

}  // namespace muontag
