#ifndef KERNELREPR_DETAIL_FFT_HPP
#define KERNELREPR_DETAIL_FFT_HPP

#ifndef EIGEN_FFTW_DEFAULT
#define EIGEN_FFTW_DEFAULT
#endif

#include <complex>
#include <cstddef>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

namespace kernelrepr::detail {

template <typename Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

/// Unscaled discrete Fourier transforms of arbitrary length.
///
///   plus(x)[m]  = sum_n x_n exp(+2 pi i n m / N)
///   minus(x)[m] = sum_n x_n exp(-2 pi i n m / N)
///
/// Holds the FFTW plans for the lifetime of the object; not thread-safe.
template <typename Real>
class Dft {
public:
    Dft() { fft_.SetFlag(Eigen::FFT<Real>::Unscaled); }

    ComplexVector<Real> plus(const ComplexVector<Real>& x)
    {
        ComplexVector<Real> out(x.size());
        if (x.size() == 1) {
            out = x;
            return out;
        }
        fft_.inv(out, x);
        return out;
    }

    ComplexVector<Real> minus(const ComplexVector<Real>& x)
    {
        ComplexVector<Real> out(x.size());
        if (x.size() == 1) {
            out = x;
            return out;
        }
        fft_.fwd(out, x);
        return out;
    }

private:
    Eigen::FFT<Real> fft_;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n)
{
    std::size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

} // namespace kernelrepr::detail

#endif // KERNELREPR_DETAIL_FFT_HPP
