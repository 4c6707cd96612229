#ifndef SUPERHET_SPECFUN_HPP
#define SUPERHET_SPECFUN_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "superhet/constants.hpp"
#include "superhet/errors.hpp"

/// Sine and cosine integrals for real, non-negative arguments.
///
///   Si(x) = int_0^x sin(t)/t dt
///   Ci(x) = -int_x^inf cos(t)/t dt = gamma + ln x + int_0^x (cos t - 1)/t dt
///
/// Below `series_crossover` both are summed from their Maclaurin series in
/// extended precision; above it they come from the continued fraction for
/// E1(ix) (modified Lentz). The two branches are independent, which the tests
/// use to cross-check one against the other.
namespace superhet::specfun {

inline constexpr double series_crossover = 20.0;

struct SiCi {
    double si;
    double ci;
};

namespace detail {

/// Maclaurin series of Si. Generic in the scalar type so tests can evaluate
/// it in multiprecision far beyond the crossover.
template <class T>
T magnitude(const T& x)
{
    return x < T(0) ? T(-x) : x;
}

template <class T>
T si_series(const T& x, const T& eps = std::numeric_limits<T>::epsilon())
{
    const T x2 = x * x;
    T term = x;  // x^(2k+1) / (2k+1)!, signed
    T sum = x;
    for (int k = 1; k < 10000; ++k) {
        term *= -x2 / T((2 * k) * (2 * k + 1));
        const T contrib = term / T(2 * k + 1);
        sum += contrib;
        if (magnitude(contrib) <= eps * magnitude(sum)) {
            break;
        }
    }
    return sum;
}

/// Series part of Ci: sum_{k>=1} (-1)^k x^(2k) / (2k (2k)!), so that
/// Ci(x) = gamma + ln x + ci_series(x).
template <class T>
T ci_series(const T& x, const T& eps = std::numeric_limits<T>::epsilon())
{
    const T x2 = x * x;
    T term = T(1);  // x^(2k) / (2k)!, signed
    T sum = T(0);
    for (int k = 1; k < 10000; ++k) {
        term *= -x2 / T((2 * k - 1) * (2 * k));
        const T contrib = term / T(2 * k);
        sum += contrib;
        if (magnitude(contrib) <= eps * (magnitude(sum) + T(1))) {
            break;
        }
    }
    return sum;
}

#if defined(__SIZEOF_FLOAT128__)
using wide_float = __float128;
inline const wide_float wide_epsilon = wide_float(1) / (wide_float(1ULL << 56) * wide_float(1ULL << 56));
#else
using wide_float = long double;
inline const wide_float wide_epsilon = std::numeric_limits<long double>::epsilon();
#endif

/// Long double is enough up to the crossover; further out the alternating
/// terms grow like e^x and the sum is carried in quad precision where the
/// compiler has it.
inline SiCi sici_series(double x)
{
    const long double xl = x;
    SiCi out{};
    long double si = 0.0L;
    long double ci = 0.0L;
    if (x <= series_crossover) {
        si = si_series<long double>(xl);
        ci = ci_series<long double>(xl);
    } else {
        si = static_cast<long double>(si_series<wide_float>(wide_float(xl), wide_epsilon));
        ci = static_cast<long double>(ci_series<wide_float>(wide_float(xl), wide_epsilon));
    }
    out.si = static_cast<double>(si);
    if (x > 0.0) {
        out.ci = static_cast<double>(static_cast<long double>(constants::euler_gamma)
                                     + std::log(xl) + ci);
    } else {
        out.ci = -std::numeric_limits<double>::infinity();
    }
    return out;
}

/// e^{ix} E1(ix) = g(x) - i f(x) from the continued fraction of E1(ix), where
/// E1(ix) = -Ci(x) + i (Si(x) - pi/2). Converges quickly for x >~ 2.
inline std::complex<double> scaled_e1_imaginary(double x)
{
    using cplx = std::complex<double>;
    constexpr double tiny = 1e-300;
    constexpr double eps = 4.0 * std::numeric_limits<double>::epsilon();
    constexpr int max_iter = 100000;

    cplx b(1.0, x);
    cplx c(1.0 / tiny, 0.0);
    cplx d = 1.0 / b;
    cplx h = d;
    int i = 1;
    for (; i < max_iter; ++i) {
        const double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const cplx del = c * d;
        h *= del;
        if (std::abs(del.real() - 1.0) + std::abs(del.imag()) <= eps) {
            break;
        }
    }
    if (i == max_iter) {
        throw NumericalError("sici continued fraction did not converge", 0.0, i);
    }
    return h;
}

inline SiCi sici_continued_fraction(double x)
{
    const std::complex<double> h =
        scaled_e1_imaginary(x) * std::complex<double>(std::cos(x), -std::sin(x));
    return SiCi{constants::pi / 2.0 + h.imag(), -h.real()};
}

} // namespace detail

/// Both integrals at once; `phi` must be finite and non-negative. Ci(0) is
/// returned as -inf.
inline SiCi sici(double phi)
{
    if (!std::isfinite(phi) || phi < 0.0) {
        throw DomainError("sici: argument must be finite and >= 0, got " + std::to_string(phi));
    }
    if (phi <= series_crossover) {
        return detail::sici_series(phi);
    }
    return detail::sici_continued_fraction(phi);
}

/// Auxiliary functions
///   f(x) = Ci(x) sin x - (Si(x) - pi/2) cos x
///   g(x) = -Ci(x) cos x - (Si(x) - pi/2) sin x
/// taken straight from the continued fraction above the crossover, so they
/// keep full relative accuracy where both decay like 1/x and 1/x^2.
struct AuxFG {
    double f;
    double g;
};

inline AuxFG auxiliary(double x)
{
    if (!std::isfinite(x) || !(x > 0.0)) {
        throw DomainError("auxiliary: argument must be finite and > 0, got " + std::to_string(x));
    }
    if (x <= series_crossover) {
        const SiCi s = detail::sici_series(x);
        const double si = s.si - constants::pi / 2.0;
        return {s.ci * std::sin(x) - si * std::cos(x), -s.ci * std::cos(x) - si * std::sin(x)};
    }
    const auto h = detail::scaled_e1_imaginary(x);
    return {-h.imag(), h.real()};
}

inline double sine_integral(double phi)
{
    if (!std::isfinite(phi) || phi < 0.0) {
        throw DomainError("sine_integral: argument must be finite and >= 0, got "
                          + std::to_string(phi));
    }
    return sici(phi).si;
}

inline double cosine_integral(double phi)
{
    if (!std::isfinite(phi) || phi <= 0.0) {
        throw DomainError("cosine_integral: argument must be finite and > 0, got "
                          + std::to_string(phi));
    }
    return sici(phi).ci;
}

} // namespace superhet::specfun

#endif
