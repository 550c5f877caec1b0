#ifndef KERNELREPR_ANALYSIS_HPP
#define KERNELREPR_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

#include "kernelrepr/series.hpp"
#include "kernelrepr/weight.hpp"

namespace kernelrepr {

/// Boundary data g on the unit circle, stored as Fourier coefficients
/// g_n, n = -D..D.
template <typename Real = double>
class BoundaryFunction {
public:
    explicit BoundaryFunction(std::size_t half_degree)
        : coeffs_(ComplexVector<Real>::Zero(detail::idx(2 * half_degree + 1))), half_degree_(half_degree)
    {
    }

    static BoundaryFunction from_series(const PowerSeries<Real>& f)
    {
        BoundaryFunction g(f.degree());
        for (std::size_t n = 0; n <= f.degree(); ++n) {
            g.at(static_cast<long>(n)) = f[n];
        }
        return g;
    }

    /// Fourier coefficients |n| <= D from samples g(exp(2 pi i m / G)), G > 2D.
    static BoundaryFunction from_samples(const ComplexVector<Real>& samples, std::size_t half_degree)
    {
        const std::size_t G = static_cast<std::size_t>(samples.size());
        if (G <= 2 * half_degree) {
            throw std::invalid_argument("need more than 2D samples to resolve |n| <= D");
        }
        detail::Dft<Real> dft;
        const ComplexVector<Real> hat = dft.minus(samples) / Real(G);
        BoundaryFunction g(half_degree);
        for (long n = -static_cast<long>(half_degree); n <= static_cast<long>(half_degree); ++n) {
            const long m = n >= 0 ? n : static_cast<long>(G) + n;
            g.at(n) = hat[m];
        }
        return g;
    }

    std::size_t half_degree() const { return half_degree_; }
    std::complex<Real>& at(long n) { return coeffs_[offset(n)]; }
    std::complex<Real> at(long n) const { return coeffs_[offset(n)]; }

private:
    Eigen::Index offset(long n) const
    {
        if (std::abs(n) > static_cast<long>(half_degree_)) {
            throw std::out_of_range("Fourier index outside the stored range");
        }
        return static_cast<Eigen::Index>(n + static_cast<long>(half_degree_));
    }

    ComplexVector<Real> coeffs_;
    std::size_t half_degree_;
};

/// Cauchy transform (Cg)(z) = int g(zeta) / (1 - conj(zeta) z) dm(zeta): keeps
/// the nonnegative Fourier coefficients, truncated or zero-padded to degree D.
template <typename Real>
PowerSeries<Real> cauchy_transform(const BoundaryFunction<Real>& g, std::size_t degree)
{
    auto out = PowerSeries<Real>::zero(degree);
    typename PowerSeries<Real>::Coeffs a = out.coeffs();
    const std::size_t top = std::min(degree, g.half_degree());
    for (std::size_t n = 0; n <= top; ++n) {
        a[detail::idx(n)] = g.at(static_cast<long>(n));
    }
    return PowerSeries<Real>(std::move(a));
}

/// K^beta_lambda(z) at a point, in closed form for the presets.
template <typename Real>
std::complex<Real> kernel_value(const WeightSequence<Real>& w, std::complex<Real> lambda, std::complex<Real> z)
{
    const std::complex<Real> u = std::conj(lambda) * z;
    const std::complex<Real> one(1);
    switch (w.kind()) {
    case WeightKind::hardy:
        return one / (one - u);
    case WeightKind::dirichlet:
        if (std::abs(u) < Real(1e-8)) {
            return one + u / Real(2) + u * u / Real(3);
        }
        return -std::log(one - u) / u;
    case WeightKind::bergman:
        return std::pow(one - u, -(w.alpha() + Real(2)));
    case WeightKind::table: {
        const auto& t = w.table_values();
        std::complex<Real> acc(0);
        std::complex<Real> power(1);
        for (Real b : t) {
            acc += power / b;
            power *= u;
        }
        return acc + power / (t.back() * (one - u));
    }
    }
    return one / (one - u);
}

namespace detail {

/// Sum of a positive series with terms exp(log_term(n)), n >= first, stopped
/// once a geometric tail bound with ratio max(q_n, rho2) drops below
/// 1e-13 of the running sum.
template <typename Real, typename LogTerm>
Real sum_positive_series(LogTerm log_term, std::size_t first, Real rho2)
{
    constexpr std::size_t cap = 1000000;
    Real acc = Real(0);
    Real prev = std::exp(log_term(first));
    acc += prev;
    for (std::size_t n = first + 1; n < first + cap; ++n) {
        const Real term = std::exp(log_term(n));
        acc += term;
        if (!std::isfinite(static_cast<double>(acc))) {
            break;
        }
        const Real q = std::max(prev > Real(0) ? term / prev : Real(0), rho2);
        prev = term;
        if (q < Real(1) && term * q / (Real(1) - q) <= Real(1e-17) * acc) {
            return acc;
        }
    }
    throw WeightOverflow("weight modulus series does not converge within the term cap");
}

} // namespace detail

/// omega_1(rho) = sup_n rho^{2n} beta_n.
template <typename Real>
Real omega1(const WeightSequence<Real>& w, Real rho)
{
    if (!(rho > Real(0)) || !(rho < Real(1))) {
        throw std::invalid_argument("omega_1 needs 0 < rho < 1");
    }
    const Real log_rho2 = 2 * std::log(rho);
    Real best = w.log_value(0);
    std::size_t decreasing_run = 0;
    for (std::size_t n = 0; n < 1000000; ++n) {
        const Real here = Real(n) * log_rho2 + w.log_value(n);
        const Real next = Real(n + 1) * log_rho2 + w.log_value(n + 1);
        best = std::max(best, here);
        decreasing_run = next < here ? decreasing_run + 1 : 0;
        if (decreasing_run >= 50 && next < best) {
            const Real value = std::exp(best);
            if (!std::isfinite(static_cast<double>(value))) {
                throw WeightOverflow("omega_1 overflows");
            }
            return value;
        }
    }
    throw WeightOverflow("omega_1 scan did not settle within 10^6 terms");
}

/// omega_2(rho) = sum_{n >= 1} n^2 rho^{2n} / beta_n.
template <typename Real>
Real omega2(const WeightSequence<Real>& w, Real rho)
{
    if (!(rho > Real(0)) || !(rho < Real(1))) {
        throw std::invalid_argument("omega_2 needs 0 < rho < 1");
    }
    const Real log_rho2 = 2 * std::log(rho);
    return detail::sum_positive_series<Real>(
        [&](std::size_t n) { return 2 * std::log(Real(n)) + Real(n) * log_rho2 - w.log_value(n); }, 1, rho * rho);
}

/// omega_3(rho) = sum_{n >= 0} rho^{2n} / beta_n = ||K^beta_rho||^2_beta.
template <typename Real>
Real omega3(const WeightSequence<Real>& w, Real rho)
{
    if (!(rho > Real(0)) || !(rho < Real(1))) {
        throw std::invalid_argument("omega_3 needs 0 < rho < 1");
    }
    const Real log_rho2 = 2 * std::log(rho);
    return detail::sum_positive_series<Real>([&](std::size_t n) { return Real(n) * log_rho2 - w.log_value(n); }, 0,
                                             rho * rho);
}

template <typename Real = double>
struct Lemma41Report {
    /// max_n |a_n r^n - (a_n beta_n (r/R)^n)(R^n / beta_n)|
    Real coefficient = Real(0);
    /// max over probe points of |f(r z) - grid quadrature of int F_{r/R} conj(K_z(R zeta)) dm|
    Real quadrature = Real(0);

    Real max() const { return std::max(coefficient, quadrature); }
};

/// Checks f(rz) = int F_{r/R}(zeta) conj(K_z(R zeta)) dm(zeta) coefficientwise
/// and by boundary-grid quadrature at n_probe points on |z| = 0.9.
template <typename Real>
Lemma41Report<Real> lemma41_check(const PowerSeries<Real>& f, const WeightSequence<Real>& w, Real r, Real R,
                                  std::size_t n_probe, std::size_t grid_size = 0)
{
    if (!(r > Real(0)) || !(r < R) || !(R < Real(1))) {
        throw std::invalid_argument("lemma check needs 0 < r < R < 1");
    }
    Lemma41Report<Real> report;
    const auto F = f_rho_transform(f, w, r / R);
    const auto beta = w.values(f.degree());
    using std::pow;
    for (std::size_t n = 0; n <= f.degree(); ++n) {
        const auto lhs = f[n] * pow(r, Real(n));
        const auto rhs = F[n] * (pow(R, Real(n)) / beta[detail::idx(n)]);
        report.coefficient = std::max(report.coefficient, std::abs(lhs - rhs));
    }

    const Real probe_radius = Real(0.9);
    const std::size_t kernel_degree = kernel_truncation_degree(probe_radius * R, w, Real(1e-18));
    std::size_t G = grid_size == 0 ? default_grid_size(std::max(F.degree(), kernel_degree)) : grid_size;
    if (!detail::is_power_of_two(G) || G <= std::max(F.degree(), kernel_degree)) {
        throw std::invalid_argument("quadrature grid must be a power of two above both degrees");
    }
    const auto F_values = boundary_values(F, G);
    const Real pi = std::numbers::pi_v<Real>;
    for (std::size_t p = 0; p < n_probe; ++p) {
        const auto z = std::polar(probe_radius, 2 * pi * (Real(p) + Real(0.5)) / Real(n_probe));
        // K_z(R zeta) = sum conj(z)^n R^n zeta^n / beta_n
        const auto kernel = beta_kernel_series(z * R, w, kernel_degree);
        const auto k_values = boundary_values(kernel, G);
        std::complex<Real> acc(0);
        for (Eigen::Index m = 0; m < F_values.size(); ++m) {
            acc += F_values[m] * std::conj(k_values[m]);
        }
        acc /= Real(G);
        report.quadrature = std::max(report.quadrature, std::abs(acc - eval(f, r * z)));
    }
    return report;
}

template <typename Real = double>
struct WeightValidation {
    std::size_t window_lo = 0;
    std::size_t window_hi = 0;
    /// max over the window of beta_n^{1/n} and (1/beta_n)^{1/n}
    Real max_beta_root = Real(0);
    Real max_inverse_root = Real(0);
    /// q from fitting log beta_n = c + s log n + n log q on the window
    Real fitted_rate = Real(1);
    bool growth_flag = false;
    bool decay_flag = false;

    bool ok() const { return !growth_flag && !decay_flag; }
};

/// Numerical check of limsup beta_n^{1/n} <= 1 and limsup (1/beta_n)^{1/n} <= 1.
template <typename Real>
WeightValidation<Real> validate_weight(const WeightSequence<Real>& w, std::size_t n_max)
{
    if (n_max < 100) {
        throw std::invalid_argument("weight validation needs n_max >= 100");
    }
    WeightValidation<Real> report;
    report.window_lo = n_max / 2;
    report.window_hi = n_max;
    for (std::size_t n = report.window_lo; n <= report.window_hi; ++n) {
        const Real lb = w.log_value(n) / Real(n);
        report.max_beta_root = std::max(report.max_beta_root, std::exp(lb));
        report.max_inverse_root = std::max(report.max_inverse_root, std::exp(-lb));
    }

    const std::size_t pts[3] = {n_max / 4, n_max / 2, n_max};
    Eigen::Matrix<Real, 3, 3> A;
    Eigen::Matrix<Real, 3, 1> y;
    for (int i = 0; i < 3; ++i) {
        const Real n = Real(pts[i]);
        A(i, 0) = Real(1);
        A(i, 1) = std::log(n);
        A(i, 2) = n;
        y[i] = w.log_value(pts[i]);
    }
    const Eigen::Matrix<Real, 3, 1> fit = A.partialPivLu().solve(y);
    report.fitted_rate = std::exp(fit[2]);
    const Real threshold = Real(1) + Real(1e-2);
    report.growth_flag = report.fitted_rate > threshold;
    report.decay_flag = Real(1) / report.fitted_rate > threshold;
    return report;
}

} // namespace kernelrepr

#endif // KERNELREPR_ANALYSIS_HPP
