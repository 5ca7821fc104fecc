// Zenith-angle models for sea-level cosmic-ray muons.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace muontag {

/*!
 * Angular intensity of downward-going muons, I(cos θ) per steradian.
 *
 * COS2 is the textbook sea-level cos²θ law. PARAMETRIC uses the
 * curvature-corrected form I ∝ D(θ)^-(n-1) with
 * D(θ) = sqrt(r² cos²θ + 2r + 1) - r cosθ, where r is the ratio of the Earth
 * radius to the muon production height; it reduces to cos^(n-1)θ away from the
 * horizon.
 */
struct AngularModel
{
    enum class Kind
    {
        Cos2,
        Parametric,
    };

    Kind kind = Kind::Cos2;
    double spectral_index = 3.01;
    double earth_ratio = 174.0;

    double intensity(double cos_zenith) const
    {
        double c = std::clamp(cos_zenith, 0.0, 1.0);
        if (kind == Kind::Cos2) return c * c;
        double r = earth_ratio;
        double d = std::sqrt(r * r * c * c + 2.0 * r + 1.0) - r * c;
        return std::pow(d, -(spectral_index - 1.0));
    }
};

//! Tabulated inverse-CDF sampler over cos θ ∈ [0, 1] for an AngularModel.
class AngularSampler
{
  public:
    explicit AngularSampler(const AngularModel& model, int grid = 4096)
        : model_(model)
    {
        cos_.resize(grid + 1);
        cdf_.resize(grid + 1);
        std::vector<double> f(grid + 1);
        for (int i = 0; i <= grid; ++i)
        {
            cos_[i] = static_cast<double>(i) / grid;
            f[i] = model.intensity(cos_[i]);
        }
        cdf_[0] = 0.0;
        double first_moment = 0.0;
        for (int i = 1; i <= grid; ++i)
        {
            double h = cos_[i] - cos_[i - 1];
            cdf_[i] = cdf_[i - 1] + 0.5 * h * (f[i] + f[i - 1]);
            first_moment += 0.5 * h * (f[i] * cos_[i] + f[i - 1] * cos_[i - 1]);
        }
        norm_ = cdf_.back();
        for (double& v : cdf_) v /= norm_;
        mean_cos_ = first_moment / norm_;
        if (model.kind == AngularModel::Kind::Cos2)
        {
            norm_ = 1.0 / 3.0;
            mean_cos_ = 0.75;
        }
    }

    const AngularModel& model() const { return model_; }

    //! Normalised probability density over cos θ on [0, 1].
    double density(double cos_zenith) const
    {
        return model_.intensity(cos_zenith) / norm_;
    }

    //! Density per steradian over the downward hemisphere.
    double solid_angle_density(double cos_zenith) const
    {
        return density(cos_zenith) / (2.0 * kPi);
    }

    //! Mean cos θ of generated directions; converts generation rate into
    //! flux through a horizontal plane.
    double mean_cos() const { return mean_cos_; }

    double sample_cos(double u) const
    {
        if (model_.kind == AngularModel::Kind::Cos2) return std::cbrt(u);
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return 0.0;
        if (it == cdf_.end()) return 1.0;
        auto i = static_cast<std::size_t>(it - cdf_.begin());
        double t = (u - cdf_[i - 1]) / (cdf_[i] - cdf_[i - 1]);
        return cos_[i - 1] + t * (cos_[i] - cos_[i - 1]);
    }

    //! Downward unit direction (z is up).
    Vec3 sample_direction(Engine& rng) const
    {
        double c = sample_cos(uniform01(rng));
        double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        double phi = 2.0 * kPi * uniform01(rng);
        return {s * std::cos(phi), s * std::sin(phi), -c};
    }

  private:
    AngularModel model_;
    std::vector<double> cos_;
    std::vector<double> cdf_;
    double norm_ = 1.0;
    double mean_cos_ = 0.0;
};

//! Two unit vectors completing `d` to a right-handed orthonormal basis.
inline void orthonormal_basis(const Vec3& d, Vec3& u, Vec3& v)
{
    Vec3 a = std::abs(d.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    u = d.cross(a).normalized();
    v = d.cross(u);
}

}  // namespace muontag
