// Detector stack geometry: axis-aligned slabs, ray chords and traversal.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "angular.hpp"
#include "core.hpp"
#include "rng.hpp"

namespace muontag {

enum class Material : std::uint8_t
{
    Silicon,
    Copper,
    Aluminum,
};

inline std::string_view to_string(Material m)
{
    switch (m)
    {
        case Material::Silicon: return "silicon";
        case Material::Copper: return "copper";
        case Material::Aluminum: return "aluminum";
    }
    return "unknown";
}

inline Material material_from_string(std::string_view s)
{
    if (s == "silicon") return Material::Silicon;
    // Cryophy (Ni-Fe) attenuates like copper to a few percent over 20 keV-3 MeV.
    if (s == "copper" || s == "cryophy") return Material::Copper;
    if (s == "aluminum") return Material::Aluminum;
    throw ConfigError("unknown material '" + std::string(s) + "'");
}

//! Axis-aligned box. `id` is meaningful for silicon slabs only.
struct Slab
{
    DetectorId id = DetectorId::Top;
    Vec3 center;
    Vec3 half_extents;
    Material material = Material::Silicon;

    Vec3 lo() const { return center - half_extents; }
    Vec3 hi() const { return center + half_extents; }
    double bounding_radius() const { return half_extents.norm(); }
};

struct Ray
{
    Vec3 origin;
    Vec3 direction;  //!< unit norm
};

struct SlabHit
{
    Vec3 entry_point;
    double entry_distance = 0.0;  //!< along the ray from its origin
    double path_length = 0.0;
};

/*!
 * Chord of a ray (t >= 0) inside an axis-aligned box.
 *
 * Returns nothing on a miss or a grazing touch (zero-length chord).
 */
inline std::optional<SlabHit> intersect_slab(const Ray& ray, const Slab& slab)
{
    double t_near = 0.0;
    double t_far = std::numeric_limits<double>::infinity();
    Vec3 lo = slab.lo();
    Vec3 hi = slab.hi();
    for (int axis = 0; axis < 3; ++axis)
    {
        double o = ray.origin[axis];
        double d = ray.direction[axis];
        if (d == 0.0)
        {
            if (o < lo[axis] || o > hi[axis]) return std::nullopt;
            continue;
        }
        double t1 = (lo[axis] - o) / d;
        double t2 = (hi[axis] - o) / d;
        if (t1 > t2) std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
        if (t_far <= t_near) return std::nullopt;
    }
    return SlabHit{ray.origin + ray.direction * t_near, t_near, t_far - t_near};
}

struct GeometryConfig
{
    double silicon_thickness_cm = 0.0525;
    double layer_gap_cm = 0.45;
    std::array<double, 2> top_size_cm{4.5, 4.5};
    std::array<double, 2> center_size_cm{4.0, 2.0};
    std::array<double, 2> bottom_size_cm{4.5, 4.5};
    std::array<double, 2> center_offset_cm{0.0, 0.0};

    bool center_box = true;
    double box_wall_cm = 0.5;
    double box_lid_cm = 0.2;
    double box_clearance_cm = 0.05;

    bool holders = true;
    double holder_frame_width_cm = 0.5;
    double holder_thickness_cm = 0.3;

    struct Shield
    {
        Material material = Material::Copper;
        std::array<double, 3> half_extents_cm{4.0, 4.0, 2.0};
        double thickness_cm = 0.1;
    };
    std::vector<Shield> shields{
        {Material::Aluminum, {3.6, 3.6, 1.6}, 0.1},
        {Material::Copper, {3.8, 3.8, 1.8}, 0.1},
        {Material::Copper, {4.0, 4.0, 2.0}, 0.1},
    };
};

namespace detail {
inline bool boxes_overlap(const Slab& a, const Slab& b, double tol = 1e-9)
{
    for (int axis = 0; axis < 3; ++axis)
    {
        if (a.hi()[axis] <= b.lo()[axis] + tol) return false;
        if (b.hi()[axis] <= a.lo()[axis] + tol) return false;
    }
    return true;
}

//! Six plates forming a hollow box shell of the given outer half extents.
inline void append_shell(std::vector<Slab>& out, Vec3 center, Vec3 outer,
                         Vec3 thickness, Material material)
{
    Vec3 inner = outer - thickness;
    // lids span the full footprint, x walls the inner z range, y walls the
    // inner x and z ranges
    for (double s : {-1.0, 1.0})
    {
        out.push_back({DetectorId::Top,
                       center + Vec3{0, 0, s * (inner.z + 0.5 * thickness.z)},
                       {outer.x, outer.y, 0.5 * thickness.z}, material});
        out.push_back({DetectorId::Top,
                       center + Vec3{s * (inner.x + 0.5 * thickness.x), 0, 0},
                       {0.5 * thickness.x, outer.y, inner.z}, material});
        out.push_back({DetectorId::Top,
                       center + Vec3{0, s * (inner.y + 0.5 * thickness.y), 0},
                       {inner.x, 0.5 * thickness.y, inner.z}, material});
    }
}
}  // namespace detail

/*!
 * Three silicon wafers (TOP, CENTER, BOTTOM) plus passive copper/aluminium.
 *
 * z is the vertical axis. CENTER sits at z = 0; TOP and BOTTOM are displaced
 * by one wafer thickness plus layer_gap, so layer_gap is the clearance between
 * facing silicon surfaces.
 */
class StackGeometry
{
  public:
    StackGeometry() : StackGeometry(GeometryConfig{}) {}

    explicit StackGeometry(const GeometryConfig& cfg) : layer_gap_(cfg.layer_gap_cm)
    {
        double t = cfg.silicon_thickness_cm;
        if (!(t > 0)) throw ConfigError("silicon thickness must be positive");
        for (auto size : {cfg.top_size_cm, cfg.center_size_cm, cfg.bottom_size_cm})
        {
            if (!(size[0] > 0 && size[1] > 0))
                throw ConfigError("wafer lateral sizes must be positive");
        }
        double pitch = t + cfg.layer_gap_cm;
        Vec3 off{cfg.center_offset_cm[0], cfg.center_offset_cm[1], 0.0};
        slabs_.push_back({DetectorId::Top, {0, 0, pitch},
                          {0.5 * cfg.top_size_cm[0], 0.5 * cfg.top_size_cm[1], 0.5 * t},
                          Material::Silicon});
        slabs_.push_back({DetectorId::Center, off,
                          {0.5 * cfg.center_size_cm[0], 0.5 * cfg.center_size_cm[1], 0.5 * t},
                          Material::Silicon});
        slabs_.push_back({DetectorId::Bottom, {0, 0, -pitch},
                          {0.5 * cfg.bottom_size_cm[0], 0.5 * cfg.bottom_size_cm[1], 0.5 * t},
                          Material::Silicon});

        if (cfg.center_box)
        {
            const Slab& c = slabs_[1];
            double cl = cfg.box_clearance_cm;
            Vec3 wall{cfg.box_wall_cm, cfg.box_wall_cm, cfg.box_lid_cm};
            Vec3 outer = c.half_extents + Vec3{cl, cl, cl} + wall;
            detail::append_shell(passive_, c.center, outer, wall, Material::Copper);
        }
        if (cfg.holders)
        {
            double f = cfg.holder_frame_width_cm;
            double h = 0.5 * cfg.holder_thickness_cm;
            for (int k : {0, 2})
            {
                const Slab& w = slabs_[k];
                Vec3 e = w.half_extents;
                for (double s : {-1.0, 1.0})
                {
                    passive_.push_back({DetectorId::Top, w.center + Vec3{s * (e.x + 0.5 * f), 0, 0},
                                        {0.5 * f, e.y + f, h}, Material::Copper});
                    passive_.push_back({DetectorId::Top, w.center + Vec3{0, s * (e.y + 0.5 * f), 0},
                                        {e.x, 0.5 * f, h}, Material::Copper});
                }
            }
        }
        for (const auto& sh : cfg.shields)
        {
            Vec3 outer{sh.half_extents_cm[0], sh.half_extents_cm[1], sh.half_extents_cm[2]};
            double th = sh.thickness_cm;
            if (!(th > 0) || outer.x <= th || outer.y <= th || outer.z <= th)
                throw ConfigError("shield thickness must be positive and below its half extents");
            detail::append_shell(passive_, {0, 0, 0}, outer, {th, th, th}, sh.material);
        }
        validate();
    }

    //! Build from explicit slab lists (tests, custom stacks).
    StackGeometry(std::vector<Slab> silicon, std::vector<Slab> passive, double layer_gap)
        : slabs_(std::move(silicon)), passive_(std::move(passive)), layer_gap_(layer_gap)
    {
        validate();
    }

    const std::vector<Slab>& slabs() const { return slabs_; }
    const std::vector<Slab>& passive() const { return passive_; }
    double layer_gap() const { return layer_gap_; }

    const Slab& slab(DetectorId id) const
    {
        for (const auto& s : slabs_)
            if (s.id == id) return s;
        throw InvalidArgument("no slab with id " + std::string(to_string(id)));
    }

    //! Radius of the smallest origin-centred sphere enclosing every element.
    double bounding_radius() const
    {
        double r = 0.0;
        for (const auto* list : {&slabs_, &passive_})
            for (const auto& s : *list)
            {
                Vec3 corner{std::abs(s.center.x) + s.half_extents.x,
                            std::abs(s.center.y) + s.half_extents.y,
                            std::abs(s.center.z) + s.half_extents.z};
                r = std::max(r, corner.norm());
            }
        return r;
    }

    //! Axis-aligned box around the silicon only.
    Slab silicon_bounds() const
    {
        Vec3 lo = slabs_.front().lo(), hi = slabs_.front().hi();
        for (const auto& s : slabs_)
        {
            lo = {std::min(lo.x, s.lo().x), std::min(lo.y, s.lo().y), std::min(lo.z, s.lo().z)};
            hi = {std::max(hi.x, s.hi().x), std::max(hi.y, s.hi().y), std::max(hi.z, s.hi().z)};
        }
        return {DetectorId::Top, (lo + hi) * 0.5, (hi - lo) * 0.5, Material::Silicon};
    }

  private:
    void validate() const
    {
        if (slabs_.empty()) throw ConfigError("geometry has no silicon slabs");
        for (const auto& s : slabs_)
        {
            if (s.material != Material::Silicon)
                throw ConfigError("detector slabs must be silicon");
            if (!(s.half_extents.x > 0 && s.half_extents.y > 0 && s.half_extents.z > 0))
                throw ConfigError("slab extents must be positive");
        }
        // vertical ordering only applies to the named three-layer stack
        auto find = [&](DetectorId id) -> const Slab* {
            for (const auto& s : slabs_)
                if (s.id == id) return &s;
            return nullptr;
        };
        const Slab* top = find(DetectorId::Top);
        const Slab* center = find(DetectorId::Center);
        const Slab* bottom = find(DetectorId::Bottom);
        if (top && center && bottom && slabs_.size() == 3)
        {
            if (!(top->lo().z > center->hi().z && center->lo().z > bottom->hi().z))
                throw ConfigError("slabs must be ordered TOP above CENTER above BOTTOM without overlap");
        }
        std::vector<const Slab*> all;
        for (const auto& s : slabs_) all.push_back(&s);
        for (const auto& s : passive_) all.push_back(&s);
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j)
                if (detail::boxes_overlap(*all[i], *all[j]))
                    throw ConfigError("geometry elements overlap");
    }

    std::vector<Slab> slabs_;
    std::vector<Slab> passive_;
    double layer_gap_ = 0.0;
};

struct Traversal
{
    DetectorId id = DetectorId::Top;
    double path_length = 0.0;
    double entry_distance = 0.0;
};

//! Silicon slabs crossed by the ray, ordered by entry distance.
inline std::vector<Traversal> stack_traversal(const Ray& ray, const StackGeometry& geometry)
{
    std::vector<Traversal> out;
    for (const auto& s : geometry.slabs())
    {
        if (auto hit = intersect_slab(ray, s))
            out.push_back({s.id, hit->path_length, hit->entry_distance});
    }
    std::stable_sort(out.begin(), out.end(), [](const Traversal& a, const Traversal& b) {
        return a.entry_distance < b.entry_distance;
    });
    return out;
}

/*!
 * Fraction of muon rays crossing CENTER that also cross TOP and BOTTOM.
 *
 * Rays are drawn as a uniform parallel beam per direction over a disk that
 * covers CENTER, with directions from the angular model, which reproduces the
 * crossing rate of an isotropic-in-azimuth muon field. Sampling continues
 * until `n_samples` CENTER-crossing rays have been collected.
 */
inline double geometric_tagging_fraction(const StackGeometry& geometry,
                                         const AngularModel& model,
                                         std::uint64_t n_samples, std::uint64_t seed)
{
    if (n_samples == 0) throw InvalidArgument("n_samples must be positive");
    AngularSampler sampler(model);
    const Slab& center = geometry.slab(DetectorId::Center);
    const Slab& top = geometry.slab(DetectorId::Top);
    const Slab& bottom = geometry.slab(DetectorId::Bottom);
    double radius = center.bounding_radius() * 1.0001;
    double reach = geometry.bounding_radius() + 1.0;

    Engine rng = make_engine(seed, Stream::TaggingFraction);
    std::uint64_t hits = 0, tagged = 0;
    while (hits < n_samples)
    {
        Vec3 d = sampler.sample_direction(rng);
        Vec3 u, v;
        orthonormal_basis(d, u, v);
        double r = radius * std::sqrt(uniform01(rng));
        double psi = 2.0 * kPi * uniform01(rng);
        Vec3 p = center.center + u * (r * std::cos(psi)) + v * (r * std::sin(psi));
        Ray ray{p - d * reach, d};
        if (!intersect_slab(ray, center)) continue;
        ++hits;
        if (intersect_slab(ray, top) && intersect_slab(ray, bottom)) ++tagged;
    }
    return static_cast<double>(tagged) / static_cast<double>(hits);
}

}  // namespace muontag
