#include "kernelrepr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "kernelrepr/analysis.hpp"
#include "kernelrepr/detail/fft.hpp"

namespace kernelrepr {

namespace {

using CVec = detail::ComplexVector<double>;
using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Offsets this small are rounding noise from polar(); snapping them to the
// lattice angle keeps centred rings on the single-FFT path.
constexpr double kOffsetSnap = 1e-14;

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn)
{
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
}

// A run of atoms sharing (layer, ring): nodes R e^{i(2 pi j / N + u_j)}.
struct Ring {
    std::size_t begin = 0;
    std::size_t end = 0;
    KernelKind kernel = KernelKind::cauchy;
    double radius = 0.0;
    std::size_t n = 0;       // DFT length; 0 means sum directly
    double u_ref = 0.0;      // common part of the offsets
    std::vector<double> v;   // per-atom offset minus u_ref
    double spread = 0.0;     // max |v|
};

bool fit_ring(Ring& ring, std::span<const KernelAtom> atoms, std::size_t n)
{
    if (n == 0) {
        return false;
    }
    const double N = static_cast<double>(n);
    std::vector<double> u(ring.end - ring.begin);
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = ring.begin; i < ring.end; ++i) {
        const auto& a = atoms[i];
        if (a.angle >= n) {
            return false;
        }
        const double x = std::remainder(std::arg(a.node) - 2.0 * kPi * static_cast<double>(a.angle) / N, 2.0 * kPi);
        u[i - ring.begin] = x;
        lo = i == ring.begin ? x : std::min(lo, x);
        hi = i == ring.begin ? x : std::max(hi, x);
    }
    const double half = 0.5 * (hi - lo);
    // past this the Taylor expansion in the block offset needs too many terms
    if (half * 0.5 * (N - 1.0) > 3.0) {
        return false;
    }
    ring.n = n;
    ring.u_ref = 0.5 * (hi + lo);
    ring.spread = 0.0;
    ring.v.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = u[i] - ring.u_ref;
        if (std::abs(d) <= kOffsetSnap) {
            d = 0.0;
        }
        ring.v[i] = d;
        ring.spread = std::max(ring.spread, std::abs(d));
    }
    if (std::abs(ring.u_ref) <= kOffsetSnap) {
        ring.u_ref = 0.0;
    }
    return true;
}

std::vector<Ring> extract_rings(std::span<const KernelAtom> atoms)
{
    std::vector<Ring> rings;
    std::size_t i = 0;
    while (i < atoms.size()) {
        Ring ring;
        ring.begin = i;
        ring.kernel = atoms[i].kernel;
        std::size_t e = i + 1;
        while (e < atoms.size() && atoms[e].layer == atoms[i].layer && atoms[e].ring == atoms[i].ring &&
               atoms[e].kernel == atoms[i].kernel) {
            ++e;
        }
        ring.end = e;
        ring.radius = std::abs(atoms[i].node);
        bool same_radius = true;
        std::size_t jmax = 0;
        std::vector<bool> seen;
        bool distinct = true;
        for (std::size_t t = i; t < e; ++t) {
            if (std::abs(std::abs(atoms[t].node) - ring.radius) > 1e-13 * ring.radius) {
                same_radius = false;
            }
            jmax = std::max(jmax, atoms[t].angle);
        }
        if (same_radius && jmax < 4 * (e - i) + 16) {
            seen.assign(jmax + 1, false);
            for (std::size_t t = i; t < e; ++t) {
                distinct = distinct && !seen[atoms[t].angle];
                seen[atoms[t].angle] = true;
            }
        } else {
            distinct = false;
        }
        if (same_radius && distinct && jmax > 0 && !fit_ring(ring, atoms, jmax + 1)) {
            // a ring cut short: recover N from the angle of its last node
            const auto& last = *std::max_element(atoms.begin() + static_cast<std::ptrdiff_t>(i),
                                                 atoms.begin() + static_cast<std::ptrdiff_t>(e),
                                                 [](const KernelAtom& a, const KernelAtom& b) { return a.angle < b.angle; });
            double theta = std::arg(last.node);
            if (theta <= 0.0) {
                theta += 2.0 * kPi;
            }
            const double est = 2.0 * kPi * static_cast<double>(last.angle) / theta;
            if (std::isfinite(est) && est < 1e9) {
                const auto guess = static_cast<std::size_t>(std::llround(est));
                for (std::size_t n : {guess, guess + 1, guess > 1 ? guess - 1 : guess}) {
                    if (n > jmax && fit_ring(ring, atoms, n)) {
                        break;
                    }
                }
            }
        }
        rings.push_back(std::move(ring));
        i = e;
    }
    return rings;
}

// sum_{atoms t of the ring, t < begin + count} weight_t conj(node_t)^n, n = 0..D
CVec ring_sum(const Ring& ring, std::span<const KernelAtom> atoms, std::size_t count, std::size_t degree,
              detail::Dft<double>& dft)
{
    const std::size_t D1 = degree + 1;
    CVec out = CVec::Zero(detail::idx(D1));
    const std::size_t stop = ring.begin + std::min(count, ring.end - ring.begin);
    if (stop == ring.begin) {
        return out;
    }
    if (ring.n == 0) {
        for (std::size_t t = ring.begin; t < stop; ++t) {
            const auto p = detail::complex_powers(std::conj(atoms[t].node), degree);
            out += atoms[t].weight * p;
        }
        return out;
    }
    const std::size_t N = ring.n;
    const double c = 0.5 * static_cast<double>(N - 1);
    CVec g = CVec::Zero(detail::idx(N));
    if (ring.spread == 0.0) {
        for (std::size_t t = ring.begin; t < stop; ++t) {
            g[detail::idx(atoms[t].angle)] += atoms[t].weight;
        }
        const CVec C = dft.minus(g);
        for (std::size_t n = 0; n < D1; ++n) {
            out[detail::idx(n)] = C[detail::idx(n % N)];
        }
    } else {
        // e^{-i n v} = e^{-i n_c v} sum_p (-i t v)^p / p!, n = n_c + t, |t| <= (N-1)/2
        const double x = ring.spread * c;
        std::size_t P = 0;
        double term = x;
        while (term > 1e-17 && P < 60) {
            ++P;
            term *= x / static_cast<double>(P + 1);
        }
        std::vector<double> tpow(N);
        const std::size_t blocks = (D1 + N - 1) / N;
        for (std::size_t q = 0; q < blocks; ++q) {
            const double nc = static_cast<double>(q * N) + c;
            CVec base = CVec::Zero(detail::idx(N));
            for (std::size_t t = ring.begin; t < stop; ++t) {
                const double v = ring.v[t - ring.begin];
                base[detail::idx(atoms[t].angle)] += atoms[t].weight * std::polar(1.0, -nc * v);
            }
            std::fill(tpow.begin(), tpow.end(), 1.0);
            const std::size_t m_end = std::min(N, D1 - q * N);
            CVec factor = base;
            for (std::size_t p = 0; p <= P; ++p) {
                if (p > 0) {
                    for (std::size_t t = ring.begin; t < stop; ++t) {
                        const double v = ring.v[t - ring.begin];
                        const auto k = detail::idx(atoms[t].angle);
                        factor[k] *= cd(0.0, -v) / static_cast<double>(p);
                    }
                }
                const CVec G = dft.minus(factor);
                for (std::size_t m = 0; m < m_end; ++m) {
                    out[detail::idx(q * N + m)] += tpow[m] * G[detail::idx(m)];
                    tpow[m] *= static_cast<double>(m) - c;
                }
            }
        }
    }
    const auto scale = detail::complex_powers(std::polar(ring.radius, -ring.u_ref), degree);
    out.array() *= scale.array();
    return out;
}

double weight_sum(std::span<const KernelAtom> atoms, const Ring& ring, std::size_t count)
{
    double s = 0.0;
    const std::size_t stop = ring.begin + std::min(count, ring.end - ring.begin);
    for (std::size_t t = ring.begin; t < stop; ++t) {
        s += std::abs(atoms[t].weight);
    }
    return s;
}

double kernel_tail(const Ring& ring, const Weight& weight, std::size_t degree)
{
    if (ring.kernel == KernelKind::beta) {
        return beta_kernel_tail(ring.radius, weight, degree);
    }
    return std::pow(ring.radius, static_cast<double>(degree + 1)) / (1.0 - ring.radius);
}

// Adds the ring's contribution (first `count` atoms) to acc; returns the tail bound.
double add_ring(CVec& acc, const Ring& ring, std::span<const KernelAtom> atoms, std::size_t count, std::size_t degree,
                const Weight& weight, const Eigen::VectorXd* inv_beta, detail::Dft<double>& dft)
{
    CVec s = ring_sum(ring, atoms, count, degree, dft);
    if (ring.kernel == KernelKind::beta && inv_beta != nullptr) {
        s.array() *= inv_beta->array().cast<cd>();
    }
    acc += s;
    return weight_sum(atoms, ring, count) * kernel_tail(ring, weight, degree);
}

Eigen::VectorXd inverse_beta(const Weight& weight, std::size_t degree)
{
    const auto b = weight.values(degree);
    Eigen::VectorXd inv = b.cwiseInverse();
    if (!inv.allFinite()) {
        throw WeightOverflow("1 / beta_n overflows below degree " + std::to_string(degree));
    }
    return inv;
}

Series synthesize(std::span<const KernelAtom> atoms, std::size_t n_terms, std::size_t degree, const Weight& weight)
{
    CVec acc = CVec::Zero(detail::idx(degree + 1));
    double tail = 0.0;
    const auto rings = extract_rings(atoms);
    const bool need_beta = std::any_of(atoms.begin(), atoms.end(), [](const KernelAtom& a) { return a.kernel == KernelKind::beta; });
    Eigen::VectorXd inv;
    if (need_beta && !weight.is_hardy()) {
        inv = inverse_beta(weight, degree);
    }
    detail::Dft<double> dft;
    for (const auto& ring : rings) {
        if (ring.begin >= n_terms) {
            break;
        }
        tail += add_ring(acc, ring, atoms, n_terms - ring.begin, degree, weight, inv.size() ? &inv : nullptr, dft);
    }
    return Series(std::move(acc), tail);
}

double space_norm(const CVec& coeffs, const Space& space)
{
    return norm(Series(coeffs), space);
}

// max over prefixes (partial first and last rings, every complete ring) of the
// norm of the partial sum of one layer's atoms.
double layer_prefix_max(std::span<const KernelAtom> atoms, std::size_t degree, const Space& space, std::size_t cuts)
{
    const auto rings = extract_rings(atoms);
    const Weight weight = space.is_weighted() ? space.weight() : Weight::hardy();
    Eigen::VectorXd inv;
    if (!weight.is_hardy()) {
        inv = inverse_beta(weight, degree);
    }
    const Eigen::VectorXd* pinv = inv.size() ? &inv : nullptr;
    detail::Dft<double> dft;
    CVec acc = CVec::Zero(detail::idx(degree + 1));
    double best = 0.0;
    for (std::size_t r = 0; r < rings.size(); ++r) {
        const auto& ring = rings[r];
        const std::size_t size = ring.end - ring.begin;
        if (r == 0 || r + 1 == rings.size()) {
            for (std::size_t s = 1; s <= cuts; ++s) {
                const std::size_t J = size * s / (cuts + 1);
                if (J == 0 || J >= size) {
                    continue;
                }
                CVec partial = acc;
                add_ring(partial, ring, atoms, J, degree, weight, pinv, dft);
                best = std::max(best, space_norm(partial, space));
            }
        }
        add_ring(acc, ring, atoms, size, degree, weight, pinv, dft);
        best = std::max(best, space_norm(acc, space));
    }
    return best;
}

std::size_t step_degree(const Series& f, double radius, const Weight& weight, const StepOptions& options)
{
    std::size_t D = 0;
    try {
        D = std::max(f.degree(), kernel_truncation_degree(radius, weight, options.truncation));
    } catch (const WeightOverflow& e) {
        throw ScheduleExhausted(std::string("kernel truncation degree: ") + e.what());
    }
    if (D > options.max_degree) {
        throw ScheduleExhausted("layer at radius " + std::to_string(radius) + " needs degree " + std::to_string(D) +
                                ", above the cap " + std::to_string(options.max_degree));
    }
    return D;
}

void finish_prefix(StepResult& out, const Space& space, double nf, const StepOptions& options)
{
    out.prefix_max = layer_prefix_max(out.atoms, out.degree, space, options.prefix_cuts) / nf;
}

double checked_norm(const Series& f, const Space& space)
{
    const double nf = norm(f, space);
    if (!(nf > 0.0)) {
        throw std::invalid_argument("nothing to decompose: the function has zero norm");
    }
    return nf;
}

} // namespace

double discretization_error_bound(const LatticeLayer& layer, double p)
{
    if (layer.kind == LayerKind::weighted) {
        throw std::invalid_argument("use weighted_discretization_bound for weighted layers");
    }
    if (!(p >= 1.0)) {
        throw std::invalid_argument("bound needs p >= 1");
    }
    const double r = layer.radii.front();
    const double n = static_cast<double>(layer.n_points);
    const double constant = layer.centered_nodes() ? kPi * std::sqrt(kPi * kPi + 1.0) : 2.0 * kPi * std::sqrt(4.0 * kPi * kPi + 1.0);
    return constant / (n * (1.0 - r * r));
}

double weighted_discretization_bound(const LatticeLayer& layer, const Weight& weight)
{
    const double R = layer.top_radius();
    return kPi * std::sqrt(omega1(weight, R) * omega2(weight, R)) / static_cast<double>(layer.n_points);
}

double dilation_radius(const LatticeLayer& layer, const Space& space)
{
    if (space.is_weighted() || layer.kind == LayerKind::weighted) {
        const double r1 = layer.inner_radius();
        return std::nextafter(r1 * r1, 0.0);
    }
    return layer.radii.front();
}

std::size_t select_layer(const Series& f, const LatticeSchedule& schedule, double delta, const Space& space,
                         std::size_t start_k)
{
    if (!(delta > 0.0 && delta < 1.0)) {
        throw std::invalid_argument("delta must lie in (0, 1)");
    }
    const double nf = checked_norm(f, space);
    for (std::size_t k = start_k; k < schedule.layers.size(); ++k) {
        const double r = dilation_radius(schedule.layers[k], space);
        if (norm(f - dilate(f, r), space) <= delta * nf) {
            return k;
        }
    }
    throw ScheduleExhausted("no layer from " + std::to_string(start_k + 1) + " to " +
                            std::to_string(schedule.layers.size()) + " brings the dilation error under delta = " +
                            std::to_string(delta) + "; the schedule needs more layers");
}

StepResult hp_step(const Series& f, const LatticeLayer& layer, double p, std::size_t layer_index,
                   const StepOptions& options)
{
    if (layer.kind != LayerKind::hardy) {
        throw std::invalid_argument("hp_step needs a layer from an hp schedule");
    }
    if (!(p > 1.0)) {
        throw std::invalid_argument("hp_step needs 1 < p < inf; H^1 and the disk algebra use h1_step");
    }
    layer.validate();
    const Space space = Space::hardy(p);
    const double nf = checked_norm(f, space);
    const double R = layer.radii.front();
    const std::size_t N = layer.n_points;

    StepResult out;
    out.degree = step_degree(f, R, Weight::hardy(), options);
    const CVec c = uniform_arc_integrals(f, N);
    const auto u = layer.angle_offsets(0);
    out.atoms.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
        auto& a = out.atoms[j];
        a.node = std::polar(R, 2.0 * kPi * static_cast<double>(j) / static_cast<double>(N) + u[j]);
        a.weight = c[detail::idx(j)];
        a.layer = layer_index;
        a.angle = j;
    }
    out.synthesis = synthesize(out.atoms, out.atoms.size(), out.degree, Weight::hardy());
    const Series fD = f.padded(out.degree);
    out.residual = fD - out.synthesis;
    out.ratio = norm(out.residual, space) / nf;
    out.discretization_error = norm(dilate(fD, R) - out.synthesis, space) / nf;
    out.bound = discretization_error_bound(layer, p);
    out.bound_violated = out.discretization_error * nf > out.bound * nf + 1e-8;
    finish_prefix(out, space, nf, options);
    return out;
}

StepResult h1_step(const Series& f, const LatticeLayer& layer, const Space& space, std::size_t layer_index,
                   const StepOptions& options)
{
    if (!space.is_endpoint()) {
        throw std::invalid_argument("h1_step is for H^1 and the disk algebra");
    }
    if (layer.kind != LayerKind::hardy1) {
        throw std::invalid_argument("h1_step needs a layer from an h1 schedule");
    }
    layer.validate();
    const double nf = checked_norm(f, space);
    const double R = layer.radii.front();
    const std::size_t N = layer.n_points;
    const std::size_t M = layer.multiplicity;

    StepResult out;
    out.degree = step_degree(f, R, Weight::hardy(), options);
    const CVec c = uniform_arc_integrals(f, N) / static_cast<double>(M);
    out.atoms.resize(N * M);
    for (std::size_t l = 0; l < M; ++l) {
        const double shift = layer.angle_offsets(l).front();
        for (std::size_t j = 0; j < N; ++j) {
            auto& a = out.atoms[l * N + j];
            a.node = std::polar(R, 2.0 * kPi * static_cast<double>(j) / static_cast<double>(N) + shift);
            a.weight = c[detail::idx(j)];
            a.layer = layer_index;
            a.ring = l;
            a.angle = j;
        }
    }
    out.synthesis = synthesize(out.atoms, out.atoms.size(), out.degree, Weight::hardy());
    const Series fD = f.padded(out.degree);
    out.residual = fD - out.synthesis;
    out.ratio = norm(out.residual, space) / nf;
    out.discretization_error = norm(dilate(fD, R) - out.synthesis, space) / nf;
    out.bound = discretization_error_bound(layer, 1.0);
    finish_prefix(out, space, nf, options);
    return out;
}

StepResult weighted_step(const Series& f, const LatticeLayer& layer, const Weight& weight, double r,
                         std::size_t layer_index, const StepOptions& options)
{
    if (layer.kind != LayerKind::weighted) {
        throw std::invalid_argument("weighted_step needs a layer from a weighted schedule");
    }
    layer.validate();
    const double r1 = layer.inner_radius();
    if (!(r > 0.0) || !(r < r1 * r1)) {
        throw std::invalid_argument("weighted_step needs 0 < r < R_{k,1}^2");
    }
    const Space space = Space::weighted(weight);
    const double nf = checked_norm(f, space);
    const std::size_t N = layer.n_points;
    const std::size_t M = layer.multiplicity;

    StepResult out;
    out.degree = step_degree(f, layer.top_radius(), weight, options);
    out.atoms.resize(N * M);
    for (std::size_t l = 0; l < M; ++l) {
        const double Rl = layer.radii[l];
        const CVec c = uniform_arc_integrals(f_rho_transform(f, weight, r / Rl), N) / static_cast<double>(M);
        for (std::size_t j = 0; j < N; ++j) {
            auto& a = out.atoms[l * N + j];
            a.node = std::polar(Rl, 2.0 * kPi * static_cast<double>(j) / static_cast<double>(N));
            a.weight = c[detail::idx(j)];
            a.kernel = KernelKind::beta;
            a.layer = layer_index;
            a.ring = l;
            a.angle = j;
        }
    }
    out.synthesis = synthesize(out.atoms, out.atoms.size(), out.degree, weight);
    out.residual = dilate(f.padded(out.degree), r) - out.synthesis;
    out.ratio = norm(out.residual, space) / nf;
    out.discretization_error = out.ratio;
    out.bound = weighted_discretization_bound(layer, weight);
    out.bound_violated = out.discretization_error > out.bound;
    finish_prefix(out, space, nf, options);
    return out;
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::tolerance_reached:
        return "tolerance_reached";
    case Termination::max_layers:
        return "max_layers";
    case Termination::schedule_exhausted:
        return "schedule_exhausted";
    case Termination::contraction_failure:
        return "contraction_failure";
    }
    return "unknown";
}

double ConvergenceReport::max_ratio() const
{
    double m = 0.0;
    for (const auto& row : layers) {
        if (row.accepted) {
            m = std::max(m, row.ratio);
        }
    }
    return m;
}

double ConvergenceReport::max_prefix() const
{
    double m = 0.0;
    for (const auto& row : layers) {
        if (row.accepted) {
            m = std::max(m, row.prefix_max);
        }
    }
    return m;
}

DecomposeResult decompose(const Series& f, const Space& space, const LatticeSchedule& schedule,
                          const DecomposeOptions& options)
{
    if (!(options.tol > 0.0)) {
        throw std::invalid_argument("tol must be positive");
    }
    if (!(options.delta > 0.0 && options.delta < 1.0)) {
        throw std::invalid_argument("delta must lie in (0, 1)");
    }
    const LayerKind expected = space.is_weighted() ? LayerKind::weighted
                               : space.is_endpoint() ? LayerKind::hardy1
                                                     : LayerKind::hardy;
    if (schedule.kind != expected) {
        throw std::invalid_argument("space " + space.tag() + " needs a " + to_string(expected) + " schedule, got " +
                                    to_string(schedule.kind));
    }
    for (const auto& layer : schedule.layers) {
        if (layer.kind != expected) {
            throw std::invalid_argument("schedule mixes layer kinds");
        }
        layer.validate();
    }
    const double nf = checked_norm(f, space);

    StepOptions step_options;
    step_options.truncation = 1e-12 * options.tol;
    step_options.max_degree = options.max_degree;
    step_options.prefix_cuts = options.prefix_cuts;
    step_options.threads = options.threads;

    DecomposeResult result;
    auto& d = result.decomposition;
    auto& report = result.report;
    d.space = space;
    d.schedule_ref = options.schedule_ref;
    d.residual_norms.push_back(nf);
    Series residual = f;
    double residual_norm = nf;
    std::size_t next_k = 0;
    bool stopped = false;

    for (std::size_t step = 0; step < options.max_layers; ++step) {
        if (residual_norm <= options.tol * nf) {
            break;
        }
        std::size_t k = 0;
        try {
            if (!options.forced_layers.empty()) {
                if (step >= options.forced_layers.size()) {
                    throw ScheduleExhausted("forced layer list ran out after " + std::to_string(step) + " steps");
                }
                k = options.forced_layers[step];
                if (k >= schedule.layers.size()) {
                    throw ScheduleExhausted("forced layer " + std::to_string(k + 1) + " is not in the schedule");
                }
            } else {
                k = select_layer(residual, schedule, options.delta, space, next_k);
            }
        } catch (const ScheduleExhausted& e) {
            report.termination = Termination::schedule_exhausted;
            report.diagnostic = e.what();
            stopped = true;
            break;
        }

        bool accepted = false;
        for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
            const auto& layer = schedule.layers[k];
            const double r = dilation_radius(layer, space);
            StepResult s;
            try {
                if (expected == LayerKind::hardy) {
                    s = hp_step(residual, layer, space.p(), k, step_options);
                } else if (expected == LayerKind::hardy1) {
                    s = h1_step(residual, layer, space, k, step_options);
                } else {
                    s = weighted_step(residual, layer, space.weight(), r, k, step_options);
                }
            } catch (const ScheduleExhausted& e) {
                report.termination = Termination::schedule_exhausted;
                report.diagnostic = e.what();
                report.failing_layer = k;
                stopped = true;
                break;
            } catch (const WeightOverflow& e) {
                report.termination = Termination::schedule_exhausted;
                report.diagnostic = std::string("weight overflow: ") + e.what();
                report.failing_layer = k;
                stopped = true;
                break;
            }
            Series next = residual.padded(s.degree) - s.synthesis;
            const double next_norm = norm(next, space);
            LayerReport row;
            row.step = step + 1;
            row.k_selected = k + 1;
            row.delta = norm(residual - dilate(residual, r), space) / residual_norm;
            row.ratio = next_norm / residual_norm;
            row.bound = s.bound;
            row.discretization_error = s.discretization_error;
            row.prefix_max = s.prefix_max;
            row.dilation_radius = r;
            row.degree = s.degree;
            row.bound_violated = s.bound_violated;
            if (row.ratio < 1.0) {
                report.layers.push_back(row);
                d.atoms.insert(d.atoms.end(), s.atoms.begin(), s.atoms.end());
                residual = std::move(next);
                residual_norm = next_norm;
                d.residual_norms.push_back(next_norm);
                next_k = k + 1;
                accepted = true;
                break;
            }
            row.accepted = false;
            report.layers.push_back(row);
            if (attempt == options.max_retries || k + 1 >= schedule.layers.size() || !options.forced_layers.empty()) {
                std::ostringstream msg;
                msg << "contraction failure at layer " << k + 1 << ": ratio " << row.ratio << " >= 1";
                report.termination = Termination::contraction_failure;
                report.diagnostic = msg.str();
                report.failing_layer = k;
                stopped = true;
                break;
            }
            ++k;
        }
        if (stopped || !accepted) {
            break;
        }
    }
    if (!stopped) {
        report.termination = residual_norm <= options.tol * nf ? Termination::tolerance_reached : Termination::max_layers;
        if (report.termination == Termination::max_layers) {
            report.diagnostic = "max_layers reached with relative residual " + std::to_string(residual_norm / nf);
        }
    }
    d.degree = residual.degree();
    d.reconstruction_error = reconstruction_error(f, d, options.threads);
    report.reconstruction_error = d.reconstruction_error;
    result.residual = std::move(residual);
    return result;
}

Series reconstruct_partial(const Decomposition& d, std::size_t n_terms, std::size_t degree, unsigned /*threads*/)
{
    if (n_terms > d.atoms.size()) {
        throw std::out_of_range("n_terms exceeds the number of atoms");
    }
    const Weight weight = d.space.is_weighted() ? d.space.weight() : Weight::hardy();
    return synthesize(d.atoms, n_terms, degree, weight);
}

double reconstruction_error(const Series& f, const Decomposition& d, unsigned threads)
{
    const Weight weight = d.space.is_weighted() ? d.space.weight() : Weight::hardy();
    std::vector<cd> points;
    for (int i = 0; i < 8; ++i) {
        for (int m = 0; m < 8; ++m) {
            points.push_back(std::polar(0.9 * (i + 1) / 8.0, 2.0 * kPi * m / 8.0));
        }
    }
    std::vector<double> err(points.size());
    parallel_for(points.size(), threads, [&](std::size_t i) {
        const cd z = points[i];
        cd acc = 0.0;
        for (const auto& a : d.atoms) {
            const cd k = a.kernel == KernelKind::beta ? kernel_value(weight, a.node, z) : 1.0 / (1.0 - std::conj(a.node) * z);
            acc += a.weight * k;
        }
        err[i] = std::abs(eval(f, z) - acc);
    });
    return *std::max_element(err.begin(), err.end());
}

std::vector<std::size_t> decomposition_layers(const Decomposition& d)
{
    std::vector<std::size_t> layers;
    for (const auto& a : d.atoms) {
        if (layers.empty() || layers.back() != a.layer) {
            layers.push_back(a.layer);
        }
    }
    return layers;
}

std::vector<double> prefix_sweep(const Decomposition& d, std::size_t degree, std::size_t cuts)
{
    std::vector<double> out;
    std::size_t i = 0;
    const std::span<const KernelAtom> all(d.atoms);
    while (i < all.size()) {
        std::size_t e = i;
        while (e < all.size() && all[e].layer == all[i].layer) {
            ++e;
        }
        out.push_back(layer_prefix_max(all.subspan(i, e - i), degree, d.space, cuts));
        i = e;
    }
    return out;
}

} // namespace kernelrepr
