// Noise spectra, optimal (matched) filtering and pulse selection.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

#include "core.hpp"
#include "daq.hpp"
#include "fft.hpp"

namespace muontag {

//! One-sided noise power spectral density, amplitude²/Hz, on bins 0..N/2.
struct NoisePSD
{
    double sampling_rate_hz = 0.0;
    std::size_t n_samples = 0;
    std::vector<double> density;
    std::size_t records_used = 0;

    double frequency(std::size_t k) const
    {
        return static_cast<double>(k) * sampling_rate_hz / static_cast<double>(n_samples);
    }

    //! ∫ S(f) df over the grid, i.e. the variance it represents.
    double integrated_power() const
    {
        double df = sampling_rate_hz / static_cast<double>(n_samples);
        return std::accumulate(density.begin(), density.end(), 0.0) * df;
    }
};

struct Pulse
{
    DetectorId channel = DetectorId::Top;
    std::uint64_t record_id = 0;
    double t0_s = 0.0;          //!< start time of the record
    double peak_time_us = 0.0;  //!< time of the pulse maximum within the record
    double amplitude = 0.0;
    double baseline_rms = 0.0;
};

/*!
 * True when the trace has no excursion beyond `veto_sigma` robust standard
 * deviations from its median.
 */
inline bool is_pulse_free(const std::vector<float>& trace, double veto_sigma = 5.5)
{
    std::vector<double> x(trace.begin(), trace.end());
    if (x.empty()) return false;
    std::vector<double> tmp(x);
    auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
    std::nth_element(tmp.begin(), mid, tmp.end());
    double med = *mid;
    double sigma = robust_sigma(x);
    if (!(sigma > 0)) return false;
    for (double v : x)
        if (std::abs(v - med) > veto_sigma * sigma) return false;
    return true;
}

/*!
 * Hann-windowed averaged periodogram of the pulse-free records of a channel.
 *
 * Each trace has its mean removed. The one-sided density is normalised so
 * that its integral equals the trace variance (Parseval with the window
 * power). Records failing the pulse veto are skipped.
 */
inline NoisePSD estimate_noise_psd(const std::vector<WaveformRecord>& records, DetectorId channel,
                                   double sampling_rate_hz, std::size_t min_records = 20,
                                   double veto_sigma = 5.5)
{
    int c = index_of(channel);
    std::vector<const std::vector<float>*> clean;
    std::size_t n = 0;
    for (const auto& r : records)
    {
        const auto& tr = r.channels[c];
        if (n == 0) n = tr.size();
        if (tr.size() != n) throw InvalidArgument("records differ in length");
        if (is_pulse_free(tr, veto_sigma)) clean.push_back(&tr);
    }
    if (clean.size() < min_records)
        throw InvalidArgument("noise PSD needs at least " + std::to_string(min_records)
                              + " pulse-free records, found " + std::to_string(clean.size()));

    RealFft fft(n);
    std::vector<double> w(n);
    double w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
        w2 += w[i] * w[i];
    }
    NoisePSD psd;
    psd.sampling_rate_hz = sampling_rate_hz;
    psd.n_samples = n;
    psd.density.assign(n / 2 + 1, 0.0);
    psd.records_used = clean.size();
    std::vector<double> x(n);
    for (const auto* tr : clean)
    {
        double mean = std::accumulate(tr->begin(), tr->end(), 0.0) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = ((*tr)[i] - mean) * w[i];
        auto spec = fft.forward(x);
        for (std::size_t k = 0; k < spec.size(); ++k)
        {
            bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
            psd.density[k] += (edge ? 1.0 : 2.0) * std::norm(spec[k]) / (sampling_rate_hz * w2);
        }
    }
    for (auto& d : psd.density) d /= static_cast<double>(clean.size());
    // keep the spectrum strictly positive for the filter weights
    std::vector<double> sorted(psd.density.begin() + 1, psd.density.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    double floor = 1e-9 * sorted[sorted.size() / 2];
    for (auto& d : psd.density) d = std::max(d, floor);
    return psd;
}

//! Flat PSD for white noise of standard deviation `sigma`.
inline NoisePSD white_noise_psd(double sigma, std::size_t n_samples, double sampling_rate_hz)
{
    NoisePSD psd;
    psd.sampling_rate_hz = sampling_rate_hz;
    psd.n_samples = n_samples;
    psd.density.assign(n_samples / 2 + 1, 2.0 * sigma * sigma / sampling_rate_hz);
    psd.density.front() = sigma * sigma / sampling_rate_hz;
    if (n_samples % 2 == 0) psd.density.back() = sigma * sigma / sampling_rate_hz;
    return psd;
}

struct MatchedFilterResult
{
    double amplitude = 0.0;
    double peak_time_us = 0.0;
    double baseline_rms = 0.0;
    std::vector<std::pair<double, double>> extras;  //!< (amplitude, peak_time_us)
};

struct MatchedFilterConfig
{
    double baseline_exclusion_decays = 5.0;  //!< ± this many decay times around a peak
    double min_separation_rises = 3.0;       //!< extra pulses must be this far apart
    std::size_t max_extra_pulses = 3;
    double extra_threshold_sigma = 5.0;
};

/*!
 * Frequency-domain optimal filter for one channel.
 *
 * With template spectrum S_k and per-bin noise power J_k, the filtered trace
 * is y(m) = Σ_k S_k* X_k e^{2πikm/N} / J_k / Σ_k |S_k|²/J_k with the DC bin
 * removed, so a noiseless template of amplitude A starting at lag m gives
 * y(m) = A. The template starts at sample 0; the reported peak time adds the
 * template rise-to-peak time to the fitted lag.
 */
class MatchedFilter
{
  public:
    MatchedFilter(const PulseTemplate& tmpl, const NoisePSD& psd, MatchedFilterConfig cfg = {})
        : tmpl_(tmpl), cfg_(cfg), n_(psd.n_samples), fs_(psd.sampling_rate_hz),
          fft_(std::make_shared<RealFft>(psd.n_samples))
    {
        tmpl.validate();
        if (psd.density.size() != n_ / 2 + 1) throw InvalidArgument("PSD grid does not match its length");
        std::vector<double> s(n_);
        double dt_us = 1e6 / fs_;
        for (std::size_t i = 0; i < n_; ++i) s[i] = tmpl.shape(static_cast<double>(i) * dt_us);
        auto spec = fft_->forward(s);
        weights_.assign(spec.size(), {0.0, 0.0});
        response_spec_.assign(spec.size(), {0.0, 0.0});
        double g = 0.0;
        for (std::size_t k = 1; k < spec.size(); ++k)
        {
            bool edge = n_ % 2 == 0 && k == n_ / 2;
            double j = psd.density[k] * static_cast<double>(n_) * fs_ * (edge ? 1.0 : 0.5);
            weights_[k] = std::conj(spec[k]) / j;
            double contrib = std::norm(spec[k]) / j;
            response_spec_[k] = contrib;
            g += (edge ? 1.0 : 2.0) * contrib;
        }
        if (!(g > 0)) throw InvalidArgument("template has no power above DC");
        g_ = g;
        norm_ = g / static_cast<double>(n_);
        for (auto& wk : weights_) wk /= norm_;
        for (auto& rk : response_spec_) rk /= norm_;
        response_ = fft_->backward(response_spec_);
        for (auto& v : response_) v /= static_cast<double>(n_);
    }

    std::size_t n_samples() const { return n_; }
    double sampling_rate_hz() const { return fs_; }

    //! Expected amplitude resolution, 1/sqrt(Σ|S|²/J).
    double resolution() const { return 1.0 / std::sqrt(g_); }

    //! Filter output for every lag.
    std::vector<double> filter(const std::vector<double>& x) const
    {
        if (x.size() != n_) throw InvalidArgument("trace length does not match the filter grid");
        auto spec = fft_->forward(x);
        for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= weights_[k];
        auto y = fft_->backward(spec);
        for (auto& v : y) v /= static_cast<double>(n_);
        return y;
    }

    MatchedFilterResult apply(const std::vector<float>& trace) const
    {
        return apply(std::vector<double>(trace.begin(), trace.end()));
    }

    MatchedFilterResult apply(const std::vector<double>& trace) const
    {
        auto y = filter(trace);
        MatchedFilterResult out;
        double dt_us = 1e6 / fs_;
        double t_peak = tmpl_.peak_time_us();
        auto excl = static_cast<std::ptrdiff_t>(
            std::ceil(cfg_.baseline_exclusion_decays * tmpl_.decay_time_us / dt_us));
        auto min_sep = cfg_.min_separation_rises * tmpl_.rise_time_us / dt_us;

        auto [m0, a0, frac0] = refined_max(y, {});
        out.amplitude = std::max(0.0, a0);
        out.peak_time_us = (static_cast<double>(m0) + frac0) * dt_us + t_peak;

        std::vector<char> excluded(n_, 0);
        auto exclude_around = [&](std::ptrdiff_t m) {
            for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, m - excl);
                 i <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n_) - 1, m + excl); ++i)
                excluded[static_cast<std::size_t>(i)] = 1;
        };
        exclude_around(m0);
        out.baseline_rms = rms_outside(y, excluded);

        std::vector<double> found{static_cast<double>(m0) + frac0};
        std::vector<double> resid = y;
        subtract(resid, m0, a0);
        for (std::size_t e = 0; e < cfg_.max_extra_pulses; ++e)
        {
            auto [m, a, frac] = refined_max(resid, found, min_sep);
            if (m < 0 || !(out.baseline_rms > 0) || a <= cfg_.extra_threshold_sigma * out.baseline_rms) break;
            found.push_back(static_cast<double>(m) + frac);
            out.extras.emplace_back(a, (static_cast<double>(m) + frac) * dt_us + t_peak);
            subtract(resid, m, a);
        }
        return out;
    }

  private:
    struct Peak
    {
        std::ptrdiff_t lag;
        double value;
        double frac;
    };

    Peak refined_max(const std::vector<double>& y, const std::vector<double>& avoid, double min_sep = 0.0) const
    {
        std::ptrdiff_t best = -1;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < y.size(); ++i)
        {
            bool near = false;
            for (double a : avoid)
                if (std::abs(static_cast<double>(i) - a) <= min_sep) near = true;
            if (near) continue;
            if (y[i] > best_v)
            {
                best_v = y[i];
                best = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (best < 0) return {-1, 0.0, 0.0};
        double frac = 0.0, value = best_v;
        if (best > 0 && best + 1 < static_cast<std::ptrdiff_t>(y.size()))
        {
            double ym = y[static_cast<std::size_t>(best - 1)], yp = y[static_cast<std::size_t>(best + 1)];
            double den = ym - 2.0 * best_v + yp;
            if (den < 0)
            {
                frac = std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
                value = best_v - 0.25 * (ym - yp) * frac;
            }
        }
        return {best, value, frac};
    }

    //! Remove a fitted template of amplitude a at integer lag m from the output.
    void subtract(std::vector<double>& y, std::ptrdiff_t m, double a) const
    {
        auto n = static_cast<std::ptrdiff_t>(n_);
        for (std::ptrdiff_t i = 0; i < n; ++i)
        {
            std::ptrdiff_t d = ((i - m) % n + n) % n;
            y[static_cast<std::size_t>(i)] -= a * response_[static_cast<std::size_t>(d)];
        }
    }

    static double rms_outside(const std::vector<double>& y, const std::vector<char>& excluded)
    {
        double s = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
        {
            if (excluded[i]) continue;
            s += y[i] * y[i];
            ++count;
        }
        return count ? std::sqrt(s / static_cast<double>(count)) : 0.0;
    }

    PulseTemplate tmpl_;
    MatchedFilterConfig cfg_;
    std::size_t n_;
    double fs_;
    std::shared_ptr<RealFft> fft_;
    std::vector<std::complex<double>> weights_;
    std::vector<std::complex<double>> response_spec_;
    std::vector<double> response_;
    double norm_ = 0.0;
    double g_ = 0.0;
};

//! Matched-filter a record channel; spec-level convenience over MatchedFilter.
inline MatchedFilterResult matched_filter(const WaveformRecord& record, const PulseTemplate& tmpl,
                                          const NoisePSD& psd, DetectorId channel)
{
    const auto& tr = record.channels[index_of(channel)];
    if (tr.size() != psd.n_samples) throw InvalidArgument("record length does not match the PSD grid");
    return MatchedFilter(tmpl, psd).apply(tr);
}

//! All pulses (main and extras) found in one record.
inline std::vector<Pulse> reconstruct_record(const WaveformRecord& record,
                                             const std::array<const MatchedFilter*, kNumDetectors>& filters)
{
    std::vector<Pulse> out;
    for (int c = 0; c < kNumDetectors; ++c)
    {
        if (!filters[c]) continue;
        auto res = filters[c]->apply(record.channels[c]);
        auto id = static_cast<DetectorId>(c);
        out.push_back({id, record.record_id, record.t0_s(), res.peak_time_us, res.amplitude, res.baseline_rms});
        for (auto [a, t] : res.extras)
            out.push_back({id, record.record_id, record.t0_s(), t, a, res.baseline_rms});
    }
    return out;
}

inline std::vector<Pulse> select_pulses(const std::vector<Pulse>& pulses, double threshold_sigma = 5.0)
{
    std::vector<Pulse> out;
    for (const auto& p : pulses)
        if (p.amplitude > threshold_sigma * p.baseline_rms) out.push_back(p);
    return out;
}

}  // namespace muontag
