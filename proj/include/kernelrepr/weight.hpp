#ifndef KERNELREPR_WEIGHT_HPP
#define KERNELREPR_WEIGHT_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace kernelrepr {

/// Raised when a weight evaluator leaves the representable range (beta_n,
/// rho^n * beta_n or a modulus overflows or fails to converge).
class WeightOverflow : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

enum class WeightKind { hardy, bergman, dirichlet, table };

/// The sequence beta = {beta_n} defining the weighted Hardy space
/// H_beta = { sum a_n z^n : sum |a_n|^2 beta_n < inf }.
///
/// Presets: Hardy (beta_n = 1), Bergman A^2_alpha
/// (beta_n = n! Gamma(alpha+2) / Gamma(n+alpha+2)), Dirichlet (beta_n = n+1),
/// and a positive table whose last entry is repeated past its end.
template <typename Real = double>
class WeightSequence {
public:
    using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

    static WeightSequence hardy() { return WeightSequence(WeightKind::hardy); }
    static WeightSequence dirichlet() { return WeightSequence(WeightKind::dirichlet); }

    static WeightSequence bergman(Real alpha)
    {
        if (!(alpha > Real(-1)) || !std::isfinite(static_cast<double>(alpha))) {
            throw std::invalid_argument("bergman weight requires alpha > -1");
        }
        WeightSequence w(WeightKind::bergman);
        w.alpha_ = alpha;
        return w;
    }

    static WeightSequence table(std::vector<Real> values)
    {
        if (values.empty()) {
            throw std::invalid_argument("table weight needs at least one entry");
        }
        for (Real v : values) {
            if (!(v > Real(0)) || !std::isfinite(static_cast<double>(v))) {
                throw std::invalid_argument("table weight entries must be positive and finite");
            }
        }
        WeightSequence w(WeightKind::table);
        w.table_ = std::move(values);
        return w;
    }

    WeightKind kind() const { return kind_; }
    Real alpha() const { return alpha_; }
    const std::vector<Real>& table_values() const { return table_; }
    bool is_hardy() const { return kind_ == WeightKind::hardy; }

    /// beta_n for a single index.
    Real operator()(std::size_t n) const
    {
        switch (kind_) {
        case WeightKind::hardy:
            return Real(1);
        case WeightKind::dirichlet:
            return Real(n) + Real(1);
        case WeightKind::bergman: {
            using std::exp;
            using std::lgamma;
            const Real nn = Real(n);
            return exp(lgamma(nn + Real(1)) + lgamma(alpha_ + Real(2)) - lgamma(nn + alpha_ + Real(2)));
        }
        case WeightKind::table:
            return n < table_.size() ? table_[n] : table_.back();
        }
        return Real(1);
    }

    /// log(beta_n), usable far past the point where beta_n itself would underflow.
    Real log_value(std::size_t n) const
    {
        using std::log;
        if (kind_ == WeightKind::bergman) {
            using std::lgamma;
            const Real nn = Real(n);
            return lgamma(nn + Real(1)) + lgamma(alpha_ + Real(2)) - lgamma(nn + alpha_ + Real(2));
        }
        return log((*this)(n));
    }

    /// beta_0..beta_degree. Bergman values use the ratio recurrence
    /// beta_n = beta_{n-1} * n / (n + alpha + 1).
    RealVector values(std::size_t degree) const
    {
        RealVector out(static_cast<Eigen::Index>(degree + 1));
        if (kind_ == WeightKind::bergman) {
            out[0] = Real(1);
            for (std::size_t n = 1; n <= degree; ++n) {
                out[Eigen::Index(n)] = out[Eigen::Index(n - 1)] * Real(n) / (Real(n) + alpha_ + Real(1));
            }
            return out;
        }
        for (std::size_t n = 0; n <= degree; ++n) {
            out[Eigen::Index(n)] = (*this)(n);
        }
        return out;
    }

    /// Short tag used on the command line and in decomposition files.
    std::string tag() const
    {
        switch (kind_) {
        case WeightKind::hardy:
            return "hardy";
        case WeightKind::dirichlet:
            return "dirichlet";
        case WeightKind::bergman:
            return "bergman:" + format_real(alpha_);
        case WeightKind::table:
            return "table";
        }
        return "hardy";
    }

    friend bool operator==(const WeightSequence& a, const WeightSequence& b)
    {
        return a.kind_ == b.kind_ && a.alpha_ == b.alpha_ && a.table_ == b.table_;
    }

private:
    explicit WeightSequence(WeightKind kind) : kind_(kind) {}

    static std::string format_real(Real x)
    {
        std::string s = std::to_string(static_cast<double>(x));
        while (s.size() > 1 && s.back() == '0') {
            s.pop_back();
        }
        if (!s.empty() && s.back() == '.') {
            s.pop_back();
        }
        return s;
    }

    WeightKind kind_ = WeightKind::hardy;
    Real alpha_ = Real(0);
    std::vector<Real> table_;
};

using Weight = WeightSequence<double>;

} // namespace kernelrepr

#endif // KERNELREPR_WEIGHT_HPP
