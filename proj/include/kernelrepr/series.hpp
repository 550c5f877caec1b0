#ifndef KERNELREPR_SERIES_HPP
#define KERNELREPR_SERIES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "kernelrepr/detail/fft.hpp"
#include "kernelrepr/weight.hpp"

namespace kernelrepr {

template <typename Real>
using ComplexVector = detail::ComplexVector<Real>;

namespace detail {

inline Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

/// r^0 .. r^degree; resynchronised with pow() every 64 terms so the relative
/// error stays at a few ulp for large degrees.
template <typename Real>
Eigen::Matrix<Real, Eigen::Dynamic, 1> real_powers(Real r, std::size_t degree)
{
    Eigen::Matrix<Real, Eigen::Dynamic, 1> out(idx(degree + 1));
    Real acc = Real(1);
    for (std::size_t n = 0; n <= degree; ++n) {
        if (n % 64 == 0) {
            using std::pow;
            acc = pow(r, Real(n));
        }
        out[idx(n)] = acc;
        acc *= r;
    }
    return out;
}

/// w^0 .. w^degree, resynchronised in polar form every 64 terms.
template <typename Real>
ComplexVector<Real> complex_powers(std::complex<Real> w, std::size_t degree)
{
    ComplexVector<Real> out(idx(degree + 1));
    const Real modulus = std::abs(w);
    const Real angle = std::arg(w);
    std::complex<Real> acc(1);
    for (std::size_t n = 0; n <= degree; ++n) {
        if (n % 64 == 0) {
            using std::pow;
            acc = std::polar(pow(modulus, Real(n)), std::remainder(Real(n) * angle, 2 * std::numbers::pi_v<Real>));
        }
        out[idx(n)] = acc;
        acc *= w;
    }
    return out;
}

} // namespace detail

/// Truncated Taylor series a_0 + a_1 z + ... + a_D z^D together with a
/// certified bound on the norm of the discarded tail.
template <typename Real = double>
class PowerSeries {
public:
    using Scalar = std::complex<Real>;
    using Coeffs = ComplexVector<Real>;

    PowerSeries() : coeffs_(Coeffs::Zero(1)) {}

    explicit PowerSeries(Coeffs coeffs, Real tail_bound = Real(0))
        : coeffs_(std::move(coeffs)), tail_bound_(tail_bound)
    {
        if (coeffs_.size() == 0) {
            throw std::invalid_argument("power series needs at least one coefficient");
        }
        if (!(tail_bound_ >= Real(0)) || !std::isfinite(static_cast<double>(tail_bound_))) {
            throw std::invalid_argument("tail bound must be finite and nonnegative");
        }
    }

    static PowerSeries zero(std::size_t degree) { return PowerSeries(Coeffs::Zero(detail::idx(degree + 1))); }

    static PowerSeries monomial(std::size_t n, Scalar c = Scalar(1))
    {
        Coeffs a = Coeffs::Zero(detail::idx(n + 1));
        a[detail::idx(n)] = c;
        return PowerSeries(std::move(a));
    }

    std::size_t degree() const { return static_cast<std::size_t>(coeffs_.size() - 1); }
    const Coeffs& coeffs() const { return coeffs_; }
    Real tail_bound() const { return tail_bound_; }

    /// Coefficient n, zero past the stored degree.
    Scalar operator[](std::size_t n) const { return n <= degree() ? coeffs_[detail::idx(n)] : Scalar(0); }

    /// Same function, stored with zero coefficients up to `degree`.
    PowerSeries padded(std::size_t degree) const
    {
        if (degree <= this->degree()) {
            return *this;
        }
        Coeffs a = Coeffs::Zero(detail::idx(degree + 1));
        a.head(coeffs_.size()) = coeffs_;
        return PowerSeries(std::move(a), tail_bound_);
    }

    PowerSeries& operator+=(const PowerSeries& other) { return accumulate(other, Real(1)); }
    PowerSeries& operator-=(const PowerSeries& other) { return accumulate(other, Real(-1)); }

    PowerSeries& operator*=(Scalar c)
    {
        coeffs_ *= c;
        tail_bound_ *= std::abs(c);
        return *this;
    }

    friend PowerSeries operator+(PowerSeries a, const PowerSeries& b) { return a += b; }
    friend PowerSeries operator-(PowerSeries a, const PowerSeries& b) { return a -= b; }
    friend PowerSeries operator*(PowerSeries a, Scalar c) { return a *= c; }
    friend PowerSeries operator*(Scalar c, PowerSeries a) { return a *= c; }
    friend PowerSeries operator-(PowerSeries a) { return a *= Scalar(-1); }

    /// sqrt(sum |a_n|^2).
    Real coefficient_norm() const { return coeffs_.norm(); }

private:
    PowerSeries& accumulate(const PowerSeries& other, Real sign)
    {
        if (other.coeffs_.size() > coeffs_.size()) {
            Coeffs a = Coeffs::Zero(other.coeffs_.size());
            a.head(coeffs_.size()) = coeffs_;
            coeffs_ = std::move(a);
        }
        coeffs_.head(other.coeffs_.size()) += sign * other.coeffs_;
        tail_bound_ += other.tail_bound_;
        return *this;
    }

    Coeffs coeffs_;
    Real tail_bound_ = Real(0);
};

using Series = PowerSeries<double>;

/// Closed arc {e^{i theta} : theta_lo <= theta <= theta_hi} of the unit circle.
template <typename Real = double>
class Arc {
public:
    Arc(Real theta_lo, Real theta_hi) : lo_(theta_lo), hi_(theta_hi)
    {
        const Real len = hi_ - lo_;
        if (!(len > Real(0)) || len > 2 * std::numbers::pi_v<Real> * (Real(1) + 8 * std::numeric_limits<Real>::epsilon())) {
            throw std::invalid_argument("arc needs 0 < theta_hi - theta_lo <= 2 pi");
        }
    }

    /// The arc I_{n,j} = [exp((2j-1) pi i / n), exp((2j+1) pi i / n)].
    static Arc partition_arc(std::size_t n_arcs, std::size_t j)
    {
        const Real pi = std::numbers::pi_v<Real>;
        return Arc(Real(2 * Real(j) - 1) * pi / Real(n_arcs), Real(2 * Real(j) + 1) * pi / Real(n_arcs));
    }

    Real theta_lo() const { return lo_; }
    Real theta_hi() const { return hi_; }
    Real center() const { return (lo_ + hi_) / 2; }
    Real half_width() const { return (hi_ - lo_) / 2; }
    /// Normalized length in (0, 1].
    Real measure() const { return (hi_ - lo_) / (2 * std::numbers::pi_v<Real>); }

private:
    Real lo_;
    Real hi_;
};

enum class SpaceKind { hardy_p, disk_algebra, weighted };

/// H^p (1 <= p < inf), the disk algebra A(D), or a weighted Hardy space H_beta.
template <typename Real = double>
class SpaceSpec {
public:
    static SpaceSpec hardy(Real p)
    {
        if (!(p >= Real(1)) || !std::isfinite(static_cast<double>(p))) {
            throw std::invalid_argument("H^p requires 1 <= p < inf");
        }
        SpaceSpec s(SpaceKind::hardy_p);
        s.p_ = p;
        return s;
    }
    static SpaceSpec disk_algebra() { return SpaceSpec(SpaceKind::disk_algebra); }
    static SpaceSpec weighted(WeightSequence<Real> w)
    {
        SpaceSpec s(SpaceKind::weighted);
        s.weight_ = std::move(w);
        return s;
    }

    SpaceKind kind() const { return kind_; }
    Real p() const { return p_; }
    const WeightSequence<Real>& weight() const { return weight_; }

    bool is_weighted() const { return kind_ == SpaceKind::weighted; }
    /// H^1 and A(D): the spaces that need multiplicity layers.
    bool is_endpoint() const
    {
        return kind_ == SpaceKind::disk_algebra || (kind_ == SpaceKind::hardy_p && p_ == Real(1));
    }

    std::string tag() const
    {
        switch (kind_) {
        case SpaceKind::disk_algebra:
            return "diskalg";
        case SpaceKind::weighted:
            return weight_.tag();
        case SpaceKind::hardy_p:
            break;
        }
        if (p_ == Real(2)) {
            return "h2";
        }
        if (p_ == Real(1)) {
            return "h1";
        }
        std::string s = std::to_string(static_cast<double>(p_));
        while (s.back() == '0') {
            s.pop_back();
        }
        if (s.back() == '.') {
            s.pop_back();
        }
        return "hp:" + s;
    }

    friend bool operator==(const SpaceSpec& a, const SpaceSpec& b)
    {
        return a.kind_ == b.kind_ && a.p_ == b.p_ && a.weight_ == b.weight_;
    }

private:
    explicit SpaceSpec(SpaceKind kind) : kind_(kind) {}

    SpaceKind kind_;
    Real p_ = Real(2);
    WeightSequence<Real> weight_ = WeightSequence<Real>::hardy();
};

using Space = SpaceSpec<double>;

/// f(z) by Horner's rule on the stored coefficients.
template <typename Real>
std::complex<Real> eval(const PowerSeries<Real>& f, std::complex<Real> z)
{
    const auto& a = f.coeffs();
    std::complex<Real> acc(0);
    for (Eigen::Index n = a.size() - 1; n >= 0; --n) {
        acc = acc * z + a[n];
    }
    return acc;
}

/// f_r(z) = f(r z).
template <typename Real>
PowerSeries<Real> dilate(const PowerSeries<Real>& f, Real r)
{
    if (!(r > Real(0)) || r > Real(1)) {
        throw std::invalid_argument("dilation radius must lie in (0, 1]");
    }
    if (r == Real(1)) {
        return f;
    }
    const auto pw = detail::real_powers(r, f.degree() + 1);
    typename PowerSeries<Real>::Coeffs a = f.coeffs().cwiseProduct(pw.head(f.coeffs().size()).template cast<std::complex<Real>>());
    return PowerSeries<Real>(std::move(a), f.tail_bound() * pw[detail::idx(f.degree() + 1)]);
}

/// Values f(exp(2 pi i m / G)), m = 0..G-1, of the truncated series.
template <typename Real>
ComplexVector<Real> boundary_values(const PowerSeries<Real>& f, std::size_t grid_size)
{
    if (grid_size < f.degree() + 1) {
        throw std::invalid_argument("boundary grid smaller than the series length");
    }
    ComplexVector<Real> padded = ComplexVector<Real>::Zero(detail::idx(grid_size));
    padded.head(f.coeffs().size()) = f.coeffs();
    detail::Dft<Real> dft;
    return dft.plus(padded);
}

/// Smallest power of two >= 8 (D + 1).
inline std::size_t default_grid_size(std::size_t degree) { return detail::next_power_of_two(8 * (degree + 1)); }

/// sqrt(sum |a_n|^2 beta_n).
template <typename Real>
Real beta_norm(const PowerSeries<Real>& f, const WeightSequence<Real>& w)
{
    if (w.is_hardy()) {
        return f.coefficient_norm();
    }
    const auto beta = w.values(f.degree());
    Real acc = Real(0);
    for (Eigen::Index n = 0; n < f.coeffs().size(); ++n) {
        acc += std::norm(f.coeffs()[n]) * beta[n];
    }
    if (!std::isfinite(static_cast<double>(acc))) {
        throw WeightOverflow("beta-norm overflow");
    }
    using std::sqrt;
    return sqrt(acc);
}

/// Boundary-grid norm: (mean |f|^p)^{1/p} for H^p, max |f| for A(D).
/// Always goes through the grid, including p = 2.
template <typename Real>
Real grid_norm(const PowerSeries<Real>& f, const SpaceSpec<Real>& space, std::size_t grid_size = 0)
{
    if (space.is_weighted()) {
        throw std::invalid_argument("grid norm is defined for H^p and A(D) only");
    }
    if (grid_size == 0) {
        grid_size = default_grid_size(f.degree());
    }
    if (!detail::is_power_of_two(grid_size) || grid_size < 2 * (f.degree() + 1)) {
        throw std::invalid_argument("boundary grid must be a power of two >= 2 (D + 1)");
    }
    const auto values = boundary_values(f, grid_size);
    if (space.kind() == SpaceKind::disk_algebra) {
        return values.cwiseAbs().maxCoeff();
    }
    using std::pow;
    const Real p = space.p();
    Real acc = Real(0);
    for (Eigen::Index m = 0; m < values.size(); ++m) {
        const Real v = std::abs(values[m]);
        acc += p == Real(1) ? v : (p == Real(2) ? v * v : pow(v, p));
    }
    acc /= Real(grid_size);
    return p == Real(1) ? acc : (p == Real(2) ? std::sqrt(acc) : pow(acc, Real(1) / p));
}

/// Norm of f in `space`. H^2 uses the exact coefficient (Parseval) route;
/// other H^p and A(D) use the boundary grid; H_beta uses the beta-weighted sum.
template <typename Real>
Real norm(const PowerSeries<Real>& f, const SpaceSpec<Real>& space, std::size_t grid_size = 0)
{
    switch (space.kind()) {
    case SpaceKind::weighted:
        return beta_norm(f, space.weight());
    case SpaceKind::hardy_p:
        if (space.p() == Real(2)) {
            if (grid_size != 0 && (!detail::is_power_of_two(grid_size) || grid_size < 2 * (f.degree() + 1))) {
                throw std::invalid_argument("boundary grid must be a power of two >= 2 (D + 1)");
            }
            return f.coefficient_norm();
        }
        [[fallthrough]];
    case SpaceKind::disk_algebra:
        break;
    }
    return grid_norm(f, space, grid_size);
}

/// Integral of f over the arc against normalized Lebesgue measure, exact in
/// the coefficients:  int_I zeta^n dm = e^{i n c} sin(n h) / (pi n)  for an arc
/// with centre c and half-width h (and h / pi for n = 0).
template <typename Real>
std::complex<Real> arc_integral(const PowerSeries<Real>& f, const Arc<Real>& arc)
{
    const Real pi = std::numbers::pi_v<Real>;
    const Real c = arc.center();
    const Real h = arc.half_width();
    const auto& a = f.coeffs();
    std::complex<Real> acc = a[0] * (h / pi);
    for (Eigen::Index n = 1; n < a.size(); ++n) {
        if (a[n] == std::complex<Real>(0)) {
            continue;
        }
        const Real nn = Real(n);
        using std::sin;
        const Real amplitude = sin(std::remainder(nn * h, 2 * pi)) / (pi * nn);
        acc += a[n] * std::polar(amplitude, std::remainder(nn * c, 2 * pi));
    }
    return acc;
}

/// All n_arcs integrals int_{I_{N,j}} f dm, j = 0..N-1, at once:
/// fold a_n sin(n pi / N) / (n pi) onto residues n mod N, then one length-N DFT.
template <typename Real>
ComplexVector<Real> uniform_arc_integrals(const PowerSeries<Real>& f, std::size_t n_arcs)
{
    if (n_arcs == 0) {
        throw std::invalid_argument("need at least one arc");
    }
    const Real pi = std::numbers::pi_v<Real>;
    const std::size_t N = n_arcs;
    const auto& a = f.coeffs();
    ComplexVector<Real> folded = ComplexVector<Real>::Zero(detail::idx(N));
    folded[0] += a[0] / Real(N);
    for (Eigen::Index n = 1; n < a.size(); ++n) {
        const std::size_t nn = static_cast<std::size_t>(n);
        // sin(n pi / N) has period 2N in n
        const Real s = std::sin(pi * Real(nn % (2 * N)) / Real(N)) / (pi * Real(nn));
        folded[detail::idx(nn % N)] += a[n] * s;
    }
    detail::Dft<Real> dft;
    return dft.plus(folded);
}

/// Truncation degree for a kernel with node modulus `radius`: the smallest D
/// with radius^{D+1} / ((1 - radius) beta_{D+1}) < threshold.
template <typename Real>
std::size_t kernel_truncation_degree(Real radius, const WeightSequence<Real>& w, Real threshold)
{
    if (!(radius >= Real(0)) || !(radius < Real(1))) {
        throw std::invalid_argument("kernel node must lie in the open unit disk");
    }
    if (radius == Real(0)) {
        return 0;
    }
    using std::ceil;
    using std::log;
    const Real log_r = log(radius);
    const Real log_target = log(threshold) + log(Real(1) - radius);
    // Cauchy estimate; exact for the Hardy weight.
    Real guess = ceil(log_target / log_r) - Real(1);
    std::size_t D = guess < Real(0) ? 0 : static_cast<std::size_t>(guess);
    if (w.is_hardy()) {
        return D;
    }
    auto term_ok = [&](std::size_t d) { return Real(d + 1) * log_r - w.log_value(d + 1) < log_target; };
    // The term r^{d+1} / beta_{d+1} is eventually decreasing; bracket, then bisect.
    std::size_t hi = std::max<std::size_t>(D, 1);
    std::size_t guard = 0;
    while (!term_ok(hi)) {
        hi *= 2;
        if (++guard > 60) {
            throw WeightOverflow("kernel truncation degree does not converge for this weight");
        }
    }
    std::size_t lo = 0;
    if (term_ok(lo)) {
        return 0;
    }
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (term_ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

/// k_lambda(z) = 1 / (1 - conj(lambda) z) = sum conj(lambda)^n z^n, truncated at D.
template <typename Real>
PowerSeries<Real> cauchy_kernel_series(std::complex<Real> lambda, std::size_t degree)
{
    const Real m = std::abs(lambda);
    if (!(m < Real(1))) {
        throw std::invalid_argument("kernel node must satisfy |lambda| < 1");
    }
    using std::pow;
    const Real tail = m == Real(0) ? Real(0) : pow(m, Real(degree + 1)) / (Real(1) - m);
    return PowerSeries<Real>(detail::complex_powers(std::conj(lambda), degree), tail);
}

/// beta-norm of the discarded kernel tail: sqrt(sum_{n > D} r^{2n} / beta_n).
/// The remainder after term n is bounded geometrically with ratio
/// max(q_n, r^2), valid for every weight whose ratio beta_n / beta_{n+1}
/// tends to 1 monotonically or is eventually constant.
template <typename Real>
Real beta_kernel_tail(Real r, const WeightSequence<Real>& w, std::size_t degree)
{
    if (r == Real(0)) {
        return Real(0);
    }
    using std::exp;
    using std::log;
    const Real log_r2 = 2 * log(r);
    auto log_term = [&](std::size_t n) { return Real(n) * log_r2 - w.log_value(n); };
    Real acc = Real(0);
    Real lt = log_term(degree + 1);
    for (std::size_t n = degree + 1, count = 0; count < 1000000; ++n, ++count) {
        acc += exp(lt);
        const Real lt_next = log_term(n + 1);
        const Real q = std::max(exp(lt_next - lt), exp(log_r2));
        if (q < Real(1)) {
            const Real rest = exp(lt_next) / (Real(1) - q);
            if (rest <= Real(1e-3) * acc || rest == Real(0)) {
                return std::sqrt(acc + rest);
            }
        }
        if (!(acc <= std::numeric_limits<Real>::max())) {
            break;
        }
        lt = lt_next;
    }
    throw WeightOverflow("kernel tail does not converge for this weight");
}

/// K^beta_lambda(z) = sum conj(lambda)^n z^n / beta_n, truncated at D.
template <typename Real>
PowerSeries<Real> beta_kernel_series(std::complex<Real> lambda, const WeightSequence<Real>& w, std::size_t degree)
{
    const Real m = std::abs(lambda);
    if (!(m < Real(1))) {
        throw std::invalid_argument("kernel node must satisfy |lambda| < 1");
    }
    if (w.is_hardy()) {
        return cauchy_kernel_series(lambda, degree);
    }
    auto c = detail::complex_powers(std::conj(lambda), degree);
    const auto beta = w.values(degree);
    for (Eigen::Index n = 0; n < c.size(); ++n) {
        c[n] /= beta[n];
    }
    return PowerSeries<Real>(std::move(c), beta_kernel_tail(m, w, degree));
}

/// F_rho(z) = sum a_n beta_n rho^n z^n.
template <typename Real>
PowerSeries<Real> f_rho_transform(const PowerSeries<Real>& f, const WeightSequence<Real>& w, Real rho)
{
    if (!(rho > Real(0)) || !(rho < Real(1))) {
        throw std::invalid_argument("f_rho transform needs 0 < rho < 1");
    }
    const auto beta = w.values(f.degree() + 1);
    const auto pw = detail::real_powers(rho, f.degree() + 1);
    typename PowerSeries<Real>::Coeffs c(f.coeffs().size());
    for (Eigen::Index n = 0; n < c.size(); ++n) {
        const Real factor = beta[n] * pw[n];
        if (!std::isfinite(static_cast<double>(factor))) {
            throw WeightOverflow("beta_n rho^n overflows: degenerate weight / rho combination");
        }
        c[n] = f.coeffs()[n] * factor;
    }
    const Eigen::Index last = c.size();
    using std::sqrt;
    const Real tail_factor = sqrt(beta[last] * pw[last] * pw[last]);
    return PowerSeries<Real>(std::move(c), f.tail_bound() * (std::isfinite(static_cast<double>(tail_factor)) ? tail_factor : Real(0)));
}

/// |<f, K^beta_lambda>_beta - f(lambda)|: the inner product is taken against
/// the truncated kernel series, the point value by Horner.
template <typename Real>
Real reproducing_check(const PowerSeries<Real>& f, const WeightSequence<Real>& w, std::complex<Real> lambda)
{
    const auto kernel = beta_kernel_series(lambda, w, f.degree());
    const auto beta = w.values(f.degree());
    std::complex<Real> inner(0);
    for (Eigen::Index n = 0; n < f.coeffs().size(); ++n) {
        inner += f.coeffs()[n] * beta[n] * std::conj(kernel.coeffs()[n]);
    }
    return std::abs(inner - eval(f, lambda));
}

} // namespace kernelrepr

#endif // KERNELREPR_SERIES_HPP
