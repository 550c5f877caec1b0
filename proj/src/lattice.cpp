#include "kernelrepr/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "kernelrepr/analysis.hpp"

namespace kernelrepr {

namespace {

constexpr double kPi = std::numbers::pi;

// ceil that ignores a relative excess of 1e-12, so M / (1 - r) landing a hair
// above an integer through rounding does not add a point.
std::size_t guarded_ceil(double x)
{
    return static_cast<std::size_t>(std::ceil(x * (1.0 - 1e-12)));
}

void check_radii(std::span<const double> radii)
{
    if (radii.empty()) {
        throw std::invalid_argument("schedule needs at least one radius");
    }
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double r = radii[k];
        if (!(r > 0.0 && r < 1.0)) {
            throw std::invalid_argument("layer radius " + std::to_string(r) + " is outside (0, 1)");
        }
        if (k > 0 && !(r > radii[k - 1])) {
            throw std::invalid_argument("layer radii must be strictly increasing");
        }
    }
}

std::size_t checked_count(double x, std::size_t cap, std::size_t layer)
{
    if (!std::isfinite(x) || x > static_cast<double>(cap)) {
        throw std::length_error("layer " + std::to_string(layer + 1) + " needs " + std::to_string(x) +
                                " points, above the cap of " + std::to_string(cap));
    }
    return std::max<std::size_t>(1, guarded_ceil(x));
}

// Uniform double in (0, 1) straight from the engine bits, so the offsets are
// identical on every standard library.
double unit_open(std::mt19937_64& gen)
{
    return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

std::string to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::hardy:
        return "hp";
    case LayerKind::hardy1:
        return "h1";
    case LayerKind::weighted:
        return "weighted";
    }
    return "hp";
}

std::string to_string(PhaseMode mode)
{
    return mode == PhaseMode::random ? "random" : "centered";
}

LayerKind parse_layer_kind(const std::string& tag)
{
    if (tag == "hp") {
        return LayerKind::hardy;
    }
    if (tag == "h1") {
        return LayerKind::hardy1;
    }
    if (tag == "weighted") {
        return LayerKind::weighted;
    }
    throw std::invalid_argument("unknown lattice kind '" + tag + "' (expected hp, h1 or weighted)");
}

PhaseMode parse_phase_mode(const std::string& tag)
{
    if (tag == "centered") {
        return PhaseMode::centered;
    }
    if (tag == "random") {
        return PhaseMode::random;
    }
    throw std::invalid_argument("unknown phase mode '" + tag + "' (expected centered or random)");
}

std::vector<double> LatticeLayer::angle_offsets(std::size_t l) const
{
    if (l >= rings()) {
        throw std::out_of_range("ring index out of range");
    }
    const double N = static_cast<double>(n_points);
    std::vector<double> u(n_points, 0.0);
    if (kind == LayerKind::hardy1) {
        const double M = static_cast<double>(multiplicity);
        const double shift = -kPi / N + 2.0 * kPi * static_cast<double>(l + 1) / (N * (M + 1.0));
        std::fill(u.begin(), u.end(), shift);
    } else if (phases == PhaseMode::random) {
        std::mt19937_64 gen(seed);
        for (double& x : u) {
            x = (2.0 * unit_open(gen) - 1.0) * kPi / N;
        }
    }
    return u;
}

void LatticeLayer::validate() const
{
    if (n_points == 0 || multiplicity == 0) {
        throw std::invalid_argument("layer needs at least one point per ring");
    }
    if (kind == LayerKind::weighted) {
        if (radii.size() != multiplicity) {
            throw std::invalid_argument("weighted layer needs one radius per ring");
        }
    } else if (radii.size() != 1) {
        throw std::invalid_argument("hp and h1 layers carry a single radius");
    }
    if (kind == LayerKind::hardy && multiplicity != 1) {
        throw std::invalid_argument("hp layers have multiplicity 1");
    }
    if (kind != LayerKind::hardy && phases == PhaseMode::random) {
        throw std::invalid_argument("random phases are only defined for hp layers");
    }
    check_radii(radii);
}

std::size_t LatticeSchedule::size() const
{
    std::size_t total = 0;
    for (const auto& layer : layers) {
        total += layer.size();
    }
    return total;
}

std::vector<double> default_radii(std::size_t count)
{
    std::vector<double> r(count);
    for (std::size_t k = 0; k < count; ++k) {
        r[k] = 1.0 - std::ldexp(1.0, -static_cast<int>(k + 1));
    }
    return r;
}

LatticeSchedule build_hp_schedule(double M, std::span<const double> radii, PhaseMode phases, std::uint64_t seed,
                                  std::size_t max_points)
{
    if (!(M > 0.0) || !std::isfinite(M)) {
        throw std::invalid_argument("density constant M must be positive");
    }
    check_radii(radii);
    LatticeSchedule s;
    s.kind = LayerKind::hardy;
    s.M = M;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        LatticeLayer layer;
        layer.kind = LayerKind::hardy;
        layer.radii = {radii[k]};
        layer.n_points = checked_count(M / (1.0 - radii[k]), max_points, k);
        layer.phases = phases;
        layer.seed = seed + k;
        s.layers.push_back(std::move(layer));
    }
    return s;
}

LatticeSchedule build_h1_schedule(double M, double c_mult, std::span<const double> radii, std::size_t max_points)
{
    if (!(M > 0.0) || !std::isfinite(M)) {
        throw std::invalid_argument("density constant M must be positive");
    }
    if (!(c_mult > 0.0) || !std::isfinite(c_mult)) {
        throw std::invalid_argument("multiplicity constant must be positive");
    }
    check_radii(radii);
    LatticeSchedule s;
    s.kind = LayerKind::hardy1;
    s.M = M;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double R = radii[k];
        LatticeLayer layer;
        layer.kind = LayerKind::hardy1;
        layer.radii = {R};
        layer.n_points = checked_count(M / (1.0 - R), max_points, k);
        layer.multiplicity = std::max<std::size_t>(1, guarded_ceil(c_mult * std::log(1.0 / (1.0 - R))));
        if (static_cast<double>(layer.n_points) * static_cast<double>(layer.multiplicity) > static_cast<double>(max_points)) {
            throw std::length_error("layer " + std::to_string(k + 1) + " exceeds the point cap");
        }
        s.layers.push_back(std::move(layer));
    }
    return s;
}

LatticeSchedule build_weighted_schedule(const Weight& weight, std::span<const double> radii, double safety,
                                        std::size_t max_points)
{
    if (!(safety >= 1.0) || !std::isfinite(safety)) {
        throw std::invalid_argument("safety factor must be at least 1");
    }
    check_radii(radii);
    LatticeSchedule s;
    s.kind = LayerKind::weighted;
    double previous_top = 0.0;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        const double R = radii[k];
        double w1 = 0.0;
        double w2 = 0.0;
        double w3 = 0.0;
        try {
            w1 = omega1(weight, R);
            w2 = omega2(weight, R);
            w3 = omega3(weight, R);
        } catch (const WeightOverflow& e) {
            throw WeightOverflow("weight moduli at R = " + std::to_string(R) + ": " + e.what());
        }
        const double n = safety * std::sqrt(w1 * w2) * static_cast<double>(k + 1);
        const double m = safety * std::sqrt(w1 * w3);
        if (!std::isfinite(n) || n > static_cast<double>(max_points) || !std::isfinite(m) ||
            m > static_cast<double>(max_points)) {
            throw std::length_error("layer " + std::to_string(k + 1) + " exceeds the point cap");
        }
        LatticeLayer layer;
        layer.kind = LayerKind::weighted;
        layer.n_points = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(n)));
        layer.multiplicity = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(m)));
        if (static_cast<double>(layer.n_points) * static_cast<double>(layer.multiplicity) > static_cast<double>(max_points)) {
            throw std::length_error("layer " + std::to_string(k + 1) + " exceeds the point cap");
        }
        const double Mk = static_cast<double>(layer.multiplicity);
        double eps = (1.0 - R) / (2.0 * Mk);
        if (k > 0) {
            eps = std::min(eps, (R - previous_top) / (2.0 * Mk));
        }
        layer.radii.resize(layer.multiplicity);
        for (std::size_t l = 0; l < layer.multiplicity; ++l) {
            layer.radii[l] = R - static_cast<double>(layer.multiplicity - 1 - l) * eps;
        }
        if (!(layer.radii.front() > previous_top)) {
            throw std::invalid_argument("weighted rings of layer " + std::to_string(k + 1) + " overlap the previous layer");
        }
        previous_top = R;
        s.layers.push_back(std::move(layer));
    }
    return s;
}

std::vector<std::complex<double>> layer_points(const LatticeLayer& layer)
{
    std::vector<std::complex<double>> pts;
    pts.reserve(layer.size());
    const double N = static_cast<double>(layer.n_points);
    for (std::size_t l = 0; l < layer.rings(); ++l) {
        const double R = layer.ring_radius(l);
        const auto u = layer.angle_offsets(l);
        for (std::size_t j = 0; j < layer.n_points; ++j) {
            pts.push_back(std::polar(R, 2.0 * kPi * static_cast<double>(j) / N + u[j]));
        }
    }
    return pts;
}

std::vector<std::pair<double, double>> density_profile(const LatticeSchedule& schedule, std::span<const double> r_grid)
{
    std::vector<std::pair<double, double>> rows;
    rows.reserve(r_grid.size());
    for (double r : r_grid) {
        double count = 0.0;
        for (const auto& layer : schedule.layers) {
            const double per_ring = static_cast<double>(layer.kind == LayerKind::hardy1 ? layer.size() : layer.n_points);
            for (std::size_t l = 0; l < (layer.kind == LayerKind::hardy1 ? 1 : layer.rings()); ++l) {
                if (layer.ring_radius(l) < r) {
                    count += per_ring;
                }
            }
        }
        rows.emplace_back(r, (1.0 - r) * count);
    }
    return rows;
}

double density_upper(const LatticeSchedule& schedule, std::span<const double> r_grid)
{
    double best = 0.0;
    for (const auto& [r, v] : density_profile(schedule, r_grid)) {
        best = std::max(best, v);
    }
    return best;
}

} // namespace kernelrepr
