#ifndef KERNELREPR_LATTICE_HPP
#define KERNELREPR_LATTICE_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kernelrepr/weight.hpp"

namespace kernelrepr {

/// Any M above pi sqrt(pi^2 + 1) / 2 makes the one-circle-per-layer Cauchy
/// schedule representing in every H^p, 1 < p < inf.
inline const double kHardyDensityThreshold = std::numbers::pi * std::sqrt(std::numbers::pi * std::numbers::pi + 1.0) / 2.0;

/// One circle of N_k points per layer (H^p), one circle with M_k points per
/// arc (H^1, A(D)), or M_k concentric circles of N_k points (H_beta).
enum class LayerKind { hardy, hardy1, weighted };

enum class PhaseMode { centered, random };

std::string to_string(LayerKind kind);
std::string to_string(PhaseMode mode);
LayerKind parse_layer_kind(const std::string& tag);
PhaseMode parse_phase_mode(const std::string& tag);

struct LatticeLayer {
    LayerKind kind = LayerKind::hardy;
    /// A single radius, or R_{k,1} < ... < R_{k,M} for weighted layers.
    std::vector<double> radii;
    std::size_t n_points = 1;
    std::size_t multiplicity = 1;
    PhaseMode phases = PhaseMode::centered;
    std::uint64_t seed = 0;

    double top_radius() const { return radii.back(); }
    double inner_radius() const { return radii.front(); }

    /// Number of radius indices l (rings in the alphabetical order).
    std::size_t rings() const { return kind == LayerKind::hardy ? 1 : multiplicity; }
    double ring_radius(std::size_t l) const { return kind == LayerKind::weighted ? radii.at(l) : radii.front(); }
    std::size_t size() const { return n_points * multiplicity; }

    /// Offsets u_{l,j} with node angle 2 pi j / N + u_{l,j}; |u| < pi / N.
    std::vector<double> angle_offsets(std::size_t l) const;

    /// True when every node sits at its arc centre.
    bool centered_nodes() const { return kind != LayerKind::hardy1 && phases == PhaseMode::centered; }

    /// Throws std::invalid_argument on a broken layer.
    void validate() const;
};

struct LatticeSchedule {
    LayerKind kind = LayerKind::hardy;
    /// Density constant of the generator (n_k (1 - r_k) >= M); 0 for weighted.
    double M = 0.0;
    std::vector<LatticeLayer> layers;

    std::size_t size() const;
};

/// r_k = 1 - 2^{-k}, k = 1..count.
std::vector<double> default_radii(std::size_t count);

/// Layers r_k with n_k = ceil(M / (1 - r_k)) points 2 pi j / n_k (or one
/// uniformly random point inside each arc I_{k,j}).
LatticeSchedule build_hp_schedule(double M, std::span<const double> radii, PhaseMode phases = PhaseMode::centered,
                                  std::uint64_t seed = 0, std::size_t max_points = std::size_t(1) << 24);

/// N_k = ceil(M / (1 - R_k)) arcs, M_k = max(1, ceil(c_mult log(1 / (1 - R_k))))
/// equispaced interior points per arc.
LatticeSchedule build_h1_schedule(double M, double c_mult, std::span<const double> radii,
                                  std::size_t max_points = std::size_t(1) << 24);

/// Layers sized from the weight moduli:
///   N_k = ceil(safety sqrt(w1(R_k) w2(R_k)) k),  M_k = ceil(safety sqrt(w1(R_k) w3(R_k))),
/// rings R_{k,l} = R_k - (M_k - l) eps_k.
LatticeSchedule build_weighted_schedule(const Weight& weight, std::span<const double> radii, double safety = 2.0,
                                        std::size_t max_points = std::size_t(1) << 26);

/// Nodes of a layer in alphabetical order (l outer, j inner).
std::vector<std::complex<double>> layer_points(const LatticeLayer& layer);

/// max over r in r_grid of (1 - r) #{lambda : |lambda| < r}; a finite-sample
/// stand-in for D_+ = limsup (1 - r) #(Lambda ∩ {|z| < r}).
double density_upper(const LatticeSchedule& schedule, std::span<const double> r_grid);

/// (r, (1 - r) count) rows behind density_upper.
std::vector<std::pair<double, double>> density_profile(const LatticeSchedule& schedule, std::span<const double> r_grid);

} // namespace kernelrepr

#endif // KERNELREPR_LATTICE_HPP
