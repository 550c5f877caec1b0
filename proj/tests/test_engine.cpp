#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "kernelrepr/analysis.hpp"
#include "kernelrepr/engine.hpp"

using namespace kernelrepr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using cd = std::complex<double>;

namespace {

constexpr double pi = std::numbers::pi;
const double M2 = pi * std::sqrt(pi * pi + 1.0);

Series geometric(double q, std::size_t degree = 0)
{
    if (degree == 0) {
        degree = static_cast<std::size_t>(std::ceil(std::log(1e-17 * (1.0 - q)) / std::log(q)));
    }
    Series::Coeffs c(static_cast<Eigen::Index>(degree + 1));
    for (std::size_t n = 0; n <= degree; ++n) {
        c[static_cast<Eigen::Index>(n)] = std::pow(q, static_cast<double>(n));
    }
    return Series(c);
}

Series power_law(double s, std::size_t degree)
{
    Series::Coeffs c(static_cast<Eigen::Index>(degree + 1));
    for (std::size_t n = 0; n <= degree; ++n) {
        c[static_cast<Eigen::Index>(n)] = std::pow(n + 1.0, -s);
    }
    return Series(c);
}

// sum of weight * kernel series, one atom at a time
Series direct_sum(const std::vector<KernelAtom>& atoms, std::size_t count, std::size_t degree, const Weight& w)
{
    Series::Coeffs acc = Series::Coeffs::Zero(static_cast<Eigen::Index>(degree + 1));
    for (std::size_t t = 0; t < count; ++t) {
        const auto& a = atoms[t];
        const auto k = a.kernel == KernelKind::beta ? beta_kernel_series(a.node, w, degree) : cauchy_kernel_series(a.node, degree);
        acc += a.weight * k.coeffs();
    }
    return Series(acc);
}

double max_abs_diff(const Series& a, const Series& b)
{
    const std::size_t D = std::max(a.degree(), b.degree());
    return (a.padded(D).coeffs() - b.padded(D).coeffs()).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("select_layer picks the first layer under delta")
{
    const auto s = build_hp_schedule(6.0, default_radii(12));
    const Space h2 = Space::hardy(2.0);
    Series::Coeffs c = Series::Coeffs::Zero(3);
    c[0] = 2.0;
    CHECK(select_layer(Series(c), s, 0.05, h2, 0) == 0);
    CHECK(select_layer(Series(c), s, 0.05, h2, 4) == 4);

    // 1 - r^10 <= 0.25 first holds at r = 1 - 2^-6
    const auto z10 = Series::monomial(10);
    std::size_t oracle = 0;
    while (1.0 - std::pow(s.layers[oracle].top_radius(), 10) > 0.25) {
        ++oracle;
    }
    CHECK(select_layer(z10, s, 0.25, h2, 0) == oracle);
    CHECK(oracle == 5);

    std::size_t previous = 0;
    for (double delta : {0.5, 0.25, 0.1, 0.05, 0.01}) {
        const auto k = select_layer(geometric(0.9), s, delta, h2, 0);
        CHECK(k >= previous);
        previous = k;
    }
    CHECK_THROWS_AS(select_layer(z10, s, 1e-9, h2, 0), ScheduleExhausted);
    CHECK_THROWS_AS(select_layer(z10, s, 1.5, h2, 0), std::invalid_argument);
}

TEST_CASE("discretization bound")
{
    LatticeLayer layer;
    layer.radii = {0.96875};
    layer.n_points = 192;
    CHECK_THAT(discretization_error_bound(layer, 2.0), WithinAbs(10.3575 / (192.0 * (1.0 - 0.96875 * 0.96875)), 1e-4));
    CHECK_THAT(discretization_error_bound(layer, 2.0), WithinAbs(0.877, 1e-3));

    // n (1 - r^2) = 2 M2 gives exactly 1/2
    layer.n_points = 100;
    layer.radii = {std::sqrt(1.0 - 2.0 * M2 / 100.0)};
    CHECK_THAT(discretization_error_bound(layer, 3.0), WithinAbs(0.5, 1e-13));

    double previous = INFINITY;
    for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
        layer.n_points = n;
        const double b = discretization_error_bound(layer, 2.0);
        CHECK(b < previous);
        previous = b;
    }
    CHECK(previous < 1e-2);
}

TEST_CASE("hp_step on a constant")
{
    const auto s = build_hp_schedule(6.0, default_radii(4));
    Series::Coeffs c = Series::Coeffs::Zero(1);
    c[0] = 1.0;
    const auto out = hp_step(Series(c), s.layers[2], 2.0, 2);
    REQUIRE(out.atoms.size() == 48);
    for (const auto& a : out.atoms) {
        CHECK_THAT(std::abs(a.weight - 1.0 / 48.0), WithinAbs(0.0, 1e-16));
        CHECK(a.layer == 2);
    }
    CHECK(std::abs(out.residual[0]) <= 1e-15);
}

TEST_CASE("hp_step respects the discretization bound")
{
    const auto f = geometric(0.7);
    const auto s = build_hp_schedule(6.0, default_radii(8));
    for (std::size_t k = 2; k < 8; ++k) {
        const auto out = hp_step(f, s.layers[k], 2.0, k);
        const double nf = norm(f, Space::hardy(2.0));
        const Series fD = f.padded(out.degree);
        const double measured = norm(dilate(fD, s.layers[k].top_radius()) - out.synthesis, Space::hardy(2.0));
        CHECK(measured <= discretization_error_bound(s.layers[k], 2.0) * nf + 1e-8);
        CHECK_FALSE(out.bound_violated);
        CHECK(out.ratio < 1.0);
    }
    const auto out = hp_step(f, s.layers[4], 2.0);
    CHECK(out.discretization_error <= M2 / (192.0 * (1.0 - 0.96875 * 0.96875)));
}

TEST_CASE("hp_step synthesis matches direct kernel sums")
{
    const auto f = geometric(0.8, 60);
    for (PhaseMode mode : {PhaseMode::centered, PhaseMode::random}) {
        const auto s = build_hp_schedule(6.0, default_radii(5), mode, 7);
        const auto out = hp_step(f, s.layers[3], 2.0);
        REQUIRE(out.degree > out.atoms.size());
        const auto direct = direct_sum(out.atoms, out.atoms.size(), out.degree, Weight::hardy());
        CHECK(max_abs_diff(direct, out.synthesis) <= 1e-13);
        // the residual is f - S with S the same sum
        CHECK(max_abs_diff(f.padded(out.degree) - direct, out.residual) <= 1e-13);
    }
}

TEST_CASE("hp_step is linear in f")
{
    const auto f = geometric(0.6);
    const auto s = build_hp_schedule(6.0, default_radii(6));
    const cd alpha(2.5, -1.0);
    const auto a = hp_step(f, s.layers[3], 2.0);
    const auto b = hp_step(f * alpha, s.layers[3], 2.0);
    REQUIRE(a.atoms.size() == b.atoms.size());
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        CHECK(std::abs(b.atoms[i].weight - alpha * a.atoms[i].weight) <= 1e-15);
        CHECK(b.atoms[i].node == a.atoms[i].node);
    }
}

TEST_CASE("hp_step rejects the endpoint spaces and zero input")
{
    const auto s = build_hp_schedule(6.0, default_radii(3));
    const auto h1 = build_h1_schedule(6.0, 2.0, default_radii(3));
    CHECK_THROWS_AS(hp_step(geometric(0.5), s.layers[0], 1.0), std::invalid_argument);
    CHECK_THROWS_AS(hp_step(geometric(0.5), h1.layers[0], 2.0), std::invalid_argument);
    CHECK_THROWS_AS(hp_step(Series::zero(3), s.layers[0], 2.0), std::invalid_argument);
}

TEST_CASE("h1_step with one point per arc has hp weights")
{
    LatticeLayer hp;
    hp.radii = {0.875};
    hp.n_points = 48;
    LatticeLayer h1 = hp;
    h1.kind = LayerKind::hardy1;
    const auto f = geometric(0.9);
    const auto a = hp_step(f, hp, 2.0);
    const auto b = h1_step(f, h1, Space::hardy(1.0));
    REQUIRE(a.atoms.size() == b.atoms.size());
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        CHECK(a.atoms[i].weight == b.atoms[i].weight);
    }
    Series::Coeffs c = Series::Coeffs::Zero(1);
    c[0] = 1.0;
    const auto h1s = build_h1_schedule(6.0, 2.0, default_radii(4));
    const auto one = h1_step(Series(c), h1s.layers[3], Space::disk_algebra());
    CHECK(std::abs(one.residual[0]) <= 1e-15);
    CHECK_THROWS_AS(h1_step(f, h1s.layers[0], Space::hardy(2.0)), std::invalid_argument);
}

TEST_CASE("h1_step prefix norms")
{
    const auto f = geometric(0.9);
    const Space h1 = Space::hardy(1.0);
    const auto s = build_h1_schedule(8.0, 2.0, default_radii(6));
    const auto& layer = s.layers[4];
    StepOptions opt;
    opt.prefix_cuts = 3;
    const auto out = h1_step(f, layer, h1, 4, opt);
    CHECK(out.ratio < 1.0);

    // same prefixes summed atom by atom
    const double nf = norm(f, h1);
    const std::size_t N = layer.n_points;
    const std::size_t M = layer.multiplicity;
    std::vector<std::size_t> cuts;
    for (std::size_t l = 1; l <= M; ++l) {
        cuts.push_back(l * N);
    }
    for (std::size_t s2 = 1; s2 <= 3; ++s2) {
        cuts.push_back(N * s2 / 4);
        cuts.push_back((M - 1) * N + N * s2 / 4);
    }
    double oracle = 0.0;
    for (std::size_t n : cuts) {
        const auto partial = direct_sum(out.atoms, n, out.degree, Weight::hardy());
        oracle = std::max(oracle, norm(partial, h1) / nf);
    }
    CHECK_THAT(out.prefix_max, WithinRel(oracle, 1e-9));
    CHECK(out.prefix_max < 10.0);
}

TEST_CASE("weighted_step with the Hardy weight reduces to dilated hp weights")
{
    LatticeLayer layer;
    layer.kind = LayerKind::weighted;
    layer.radii = {0.9};
    layer.n_points = 64;
    layer.multiplicity = 1;
    const auto f = geometric(0.7, 80);
    const double r = 0.75;
    const auto out = weighted_step(f, layer, Weight::hardy(), r);
    const auto expect = uniform_arc_integrals(dilate(f, r / 0.9), 64);
    for (std::size_t j = 0; j < 64; ++j) {
        CHECK(std::abs(out.atoms[j].weight - expect[static_cast<Eigen::Index>(j)]) <= 1e-15);
    }
    CHECK_THROWS_AS(weighted_step(f, layer, Weight::hardy(), 0.81), std::invalid_argument);
}

TEST_CASE("weighted_step residual coefficient for f(z) = z")
{
    const auto s = build_weighted_schedule(Weight::dirichlet(), default_radii(3), 2.0);
    const auto& layer = s.layers[2];
    const double r = dilation_radius(layer, Space::weighted(Weight::dirichlet()));
    const auto out = weighted_step(Series::monomial(1), layer, Weight::dirichlet(), r);
    // c_1 = r - sum weight * conj(w) / beta_1
    cd c1 = r;
    for (const auto& a : out.atoms) {
        c1 -= a.weight * std::conj(a.node) / 2.0;
    }
    CHECK(std::abs(out.residual[1] - c1) <= 1e-12);
    const auto direct = direct_sum(out.atoms, out.atoms.size(), out.degree, Weight::dirichlet());
    CHECK(max_abs_diff(direct, out.synthesis) <= 1e-13);
}

TEST_CASE("decompose in H2")
{
    const auto f = geometric(0.7);
    const Space h2 = Space::hardy(2.0);
    const auto s = build_hp_schedule(6.0, default_radii(16));
    DecomposeOptions opt;
    opt.tol = 1e-3;
    const auto res = decompose(f, h2, s, opt);
    REQUIRE(res.report.success());
    const auto& d = res.decomposition;
    const double nf = norm(f, h2);
    CHECK(d.residual_norms.front() == nf);
    CHECK(d.residual_norms.back() <= 1e-3 * nf);

    double gamma = res.report.max_ratio();
    CHECK(gamma < 1.0);
    for (std::size_t i = 1; i < d.residual_norms.size(); ++i) {
        CHECK(d.residual_norms[i] > 0.0);
        CHECK(d.residual_norms[i] <= gamma * d.residual_norms[i - 1] * (1.0 + 1e-12));
    }
    const std::size_t steps = d.residual_norms.size() - 1;
    CHECK(d.residual_norms.back() <= std::pow(gamma, steps) * nf * 1.05);

    // independent recomputation of the final residual
    const auto recon = reconstruct_partial(d, d.atoms.size(), d.degree);
    const auto resid = f.padded(d.degree) - recon;
    CHECK_THAT(std::sqrt(resid.coeffs().squaredNorm()), WithinRel(d.residual_norms.back(), 1e-8));
    CHECK(max_abs_diff(resid, res.residual) <= 1e-10 * nf);
    CHECK(d.reconstruction_error <= 1e-3 * nf);

    const auto zero = reconstruct_partial(d, 0, 10);
    CHECK(zero.coeffs().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(reconstruct_partial(d, d.atoms.size() + 1, 10), std::out_of_range);

    // atoms come out in alphabetical order
    for (std::size_t i = 1; i < d.atoms.size(); ++i) {
        const auto& a = d.atoms[i - 1];
        const auto& b = d.atoms[i];
        CHECK((a.layer < b.layer || (a.layer == b.layer && (a.ring < b.ring || (a.ring == b.ring && a.angle < b.angle)))));
    }
}

TEST_CASE("decompose rejects bad input")
{
    const auto s = build_hp_schedule(6.0, default_radii(8));
    CHECK_THROWS_AS(decompose(Series::zero(4), Space::hardy(2.0), s), std::invalid_argument);
    CHECK_THROWS_AS(decompose(geometric(0.5), Space::hardy(1.0), s), std::invalid_argument);
    DecomposeOptions opt;
    opt.delta = 0.0;
    CHECK_THROWS_AS(decompose(geometric(0.5), Space::hardy(2.0), s, opt), std::invalid_argument);
}

TEST_CASE("decompose reports schedule exhaustion")
{
    const auto s = build_hp_schedule(6.0, default_radii(6));
    DecomposeOptions opt;
    opt.tol = 1e-12;
    const auto res = decompose(geometric(0.7), Space::hardy(2.0), s, opt);
    CHECK(res.report.termination == Termination::schedule_exhausted);
    CHECK_FALSE(res.report.diagnostic.empty());
    CHECK(res.decomposition.residual_norms.size() == res.report.layers.size() + 1);
}

TEST_CASE("decompose with forced layers is linear")
{
    const auto s = build_hp_schedule(6.0, default_radii(12));
    DecomposeOptions opt;
    opt.tol = 1e-9;
    opt.forced_layers = {4, 7, 10};
    const auto f = geometric(0.8);
    const cd alpha(-0.75, 3.0);
    const auto a = decompose(f, Space::hardy(2.0), s, opt);
    const auto b = decompose(f * alpha, Space::hardy(2.0), s, opt);
    REQUIRE(a.decomposition.atoms.size() == b.decomposition.atoms.size());
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < a.decomposition.atoms.size(); ++i) {
        worst = std::max(worst, std::abs(b.decomposition.atoms[i].weight - alpha * a.decomposition.atoms[i].weight));
        scale = std::max(scale, std::abs(alpha * a.decomposition.atoms[i].weight));
    }
    CHECK(worst <= 1e-12 * scale);
}

TEST_CASE("atom order does not change the total")
{
    const auto s = build_hp_schedule(6.0, default_radii(5));
    DecomposeOptions opt;
    opt.tol = 1e-2;
    opt.delta = 0.3;
    const auto res = decompose(geometric(0.5, 30), Space::hardy(2.0), s, opt);
    const auto& d = res.decomposition;
    const std::size_t D = 300;
    const auto ordered = reconstruct_partial(d, d.atoms.size(), D);
    auto shuffled = d.atoms;
    std::mt19937_64 gen(1);
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto direct = direct_sum(shuffled, shuffled.size(), D, Weight::hardy());
    CHECK(max_abs_diff(ordered, direct) <= 1e-12);
}

TEST_CASE("prefix sweep stays bounded across layers")
{
    const auto s = build_hp_schedule(6.0, default_radii(14));
    const auto res = decompose(geometric(0.9), Space::hardy(2.0), s);
    const auto& d = res.decomposition;
    const auto sweep = prefix_sweep(d, d.degree);
    REQUIRE(sweep.size() == res.report.layers.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        const double amp = sweep[i] / d.residual_norms[i];
        CHECK(std::isfinite(amp));
        CHECK(amp < 3.0);
        CHECK_THAT(amp, WithinRel(res.report.layers[i].prefix_max, 1e-9));
    }
}

TEST_CASE("random phases still contract")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto s = build_hp_schedule(8.0, default_radii(14), PhaseMode::random, seed);
        DecomposeOptions opt;
        opt.tol = 1e-4;
        const auto res = decompose(geometric(0.7), Space::hardy(2.0), s, opt);
        CHECK(res.report.layers.size() >= 2);
        CHECK(res.report.max_ratio() < 1.0);
    }
}

TEST_CASE("decompose in the Dirichlet space")
{
    const Space space = Space::weighted(Weight::dirichlet());
    const auto f = power_law(2.0, 200);
    const auto s = build_weighted_schedule(Weight::dirichlet(), default_radii(7), 2.0);
    DecomposeOptions opt;
    opt.tol = 1e-2;
    opt.delta = 0.5;
    opt.max_layers = 3;
    const auto res = decompose(f, space, s, opt);
    const auto& norms = res.decomposition.residual_norms;
    REQUIRE(norms.size() >= 3);
    for (std::size_t i = 1; i < norms.size(); ++i) {
        CHECK(norms[i] < norms[i - 1]);
    }
    // each recorded norm against an independent beta-norm of f minus the partial reconstruction
    std::size_t atoms = 0;
    for (std::size_t i = 0; i + 1 < norms.size(); ++i) {
        const auto layer = res.decomposition.atoms[atoms].layer;
        while (atoms < res.decomposition.atoms.size() && res.decomposition.atoms[atoms].layer == layer) {
            ++atoms;
        }
        const auto part = reconstruct_partial(res.decomposition, atoms, res.decomposition.degree);
        const auto resid = f.padded(res.decomposition.degree) - part;
        double acc = 0.0;
        for (std::size_t n = 0; n <= resid.degree(); ++n) {
            acc += std::norm(resid[n]) * (n + 1.0);
        }
        CHECK_THAT(std::sqrt(acc), WithinRel(norms[i + 1], 1e-8));
    }
}
