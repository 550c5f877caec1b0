#ifndef KERNELREPR_ENGINE_HPP
#define KERNELREPR_ENGINE_HPP

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernelrepr/lattice.hpp"
#include "kernelrepr/series.hpp"

namespace kernelrepr {

/// No layer of the schedule (or of the allowed degree budget) reaches the
/// requested dilation error.
class ScheduleExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class KernelKind { cauchy, beta };

/// weight * K(node, z); the Cauchy kernel 1/(1 - conj(node) z) or the
/// reproducing kernel of the decomposition's weighted space.
struct KernelAtom {
    std::complex<double> node;
    std::complex<double> weight;
    KernelKind kernel = KernelKind::cauchy;
    std::size_t layer = 0;
    std::size_t ring = 0;
    std::size_t angle = 0;
};

struct StepOptions {
    /// Kernel series are truncated where the tail drops below this.
    double truncation = 1e-15;
    std::size_t max_degree = std::size_t(1) << 22;
    /// Partial-ring cut points per ring in the prefix sweep.
    std::size_t prefix_cuts = 3;
    unsigned threads = 1;
};

struct StepResult {
    std::vector<KernelAtom> atoms;
    /// The synthesized sum S.
    Series synthesis;
    /// f - S for hp and h1 steps, f_r - S for weighted steps.
    Series residual;
    double ratio = 0.0;
    /// ||f_rho - S|| / ||f|| with rho the layer radius (or the weighted r).
    double discretization_error = 0.0;
    double bound = 0.0;
    bool bound_violated = false;
    /// max over alphabetical prefixes inside the layer of ||prefix|| / ||f||.
    double prefix_max = 0.0;
    std::size_t degree = 0;
};

/// Relative H^p bound on ||f_r - S|| for one circle of n points at radius r:
/// M2 / (n (1 - r^2)) with M2 = pi sqrt(pi^2 + 1) for centred nodes, and
/// 2 pi sqrt(4 pi^2 + 1) / (n (1 - r^2)) once nodes move off the arc centres.
double discretization_error_bound(const LatticeLayer& layer, double p);

/// pi sqrt(w1(R) w2(R)) / N for a weighted layer with top radius R.
double weighted_discretization_bound(const LatticeLayer& layer, const Weight& weight);

/// r_k for Hardy layers, nextafter(R_{k,1}^2, 0) for weighted layers.
double dilation_radius(const LatticeLayer& layer, const Space& space);

/// Smallest k >= start_k with ||f - f_{r_k}|| <= delta ||f||.
std::size_t select_layer(const Series& f, const LatticeSchedule& schedule, double delta, const Space& space,
                         std::size_t start_k = 0);

StepResult hp_step(const Series& f, const LatticeLayer& layer, double p, std::size_t layer_index = 0,
                   const StepOptions& options = {});

StepResult h1_step(const Series& f, const LatticeLayer& layer, const Space& space, std::size_t layer_index = 0,
                   const StepOptions& options = {});

/// Requires r < R_{k,1}^2; the residual is f_r - S.
StepResult weighted_step(const Series& f, const LatticeLayer& layer, const Weight& weight, double r,
                         std::size_t layer_index = 0, const StepOptions& options = {});

struct Decomposition {
    std::vector<KernelAtom> atoms;
    /// ||f||, then the residual norm after every accepted step.
    std::vector<double> residual_norms;
    Space space = Space::hardy(2.0);
    std::string schedule_ref;
    std::size_t degree = 0;
    double reconstruction_error = 0.0;
};

enum class Termination { tolerance_reached, max_layers, schedule_exhausted, contraction_failure };

std::string to_string(Termination t);

struct LayerReport {
    std::size_t step = 0;
    std::size_t k_selected = 0;
    double delta = 0.0;
    double ratio = 0.0;
    double bound = 0.0;
    double discretization_error = 0.0;
    double prefix_max = 0.0;
    double dilation_radius = 0.0;
    std::size_t degree = 0;
    bool bound_violated = false;
    bool accepted = true;
};

struct ConvergenceReport {
    std::vector<LayerReport> layers;
    Termination termination = Termination::tolerance_reached;
    std::string diagnostic;
    std::optional<std::size_t> failing_layer;
    double reconstruction_error = 0.0;

    bool success() const { return termination == Termination::tolerance_reached; }
    double max_ratio() const;
    double max_prefix() const;
};

struct DecomposeOptions {
    double tol = 1e-3;
    std::size_t max_layers = 20;
    double delta = 0.05;
    std::size_t max_degree = std::size_t(1) << 22;
    std::size_t prefix_cuts = 3;
    unsigned threads = 1;
    /// Deeper layers tried when a step fails to contract.
    std::size_t max_retries = 3;
    /// Use these layer indices in order instead of select_layer.
    std::vector<std::size_t> forced_layers;
    std::string schedule_ref;
};

struct DecomposeResult {
    Decomposition decomposition;
    ConvergenceReport report;
    Series residual;
};

/// Greedy loop: pick a layer by dilation error, discretize the current
/// residual on it, subtract, repeat. Failures end the loop and are recorded
/// in the report; only invalid input throws.
DecomposeResult decompose(const Series& f, const Space& space, const LatticeSchedule& schedule,
                          const DecomposeOptions& options = {});

/// Sum of the first n_terms atoms as a series of degree D.
Series reconstruct_partial(const Decomposition& d, std::size_t n_terms, std::size_t degree,
                           unsigned threads = 1);

/// sup over 64 points (8 radii up to 0.9, 8 angles) of |f - sum of atoms|,
/// with kernels evaluated in closed form.
double reconstruction_error(const Series& f, const Decomposition& d, unsigned threads = 1);

/// max over alphabetical prefixes inside each layer of ||prefix - earlier
/// layers||, one entry per layer present in the decomposition.
std::vector<double> prefix_sweep(const Decomposition& d, std::size_t degree, std::size_t cuts = 3);

/// Layer indices present in the decomposition, in order of appearance.
std::vector<std::size_t> decomposition_layers(const Decomposition& d);

} // namespace kernelrepr

#endif // KERNELREPR_ENGINE_HPP
