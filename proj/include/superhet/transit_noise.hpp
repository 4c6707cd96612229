#ifndef SUPERHET_TRANSIT_NOISE_HPP
#define SUPERHET_TRANSIT_NOISE_HPP

#include <cmath>
#include <string>

#include "superhet/constants.hpp"
#include "superhet/detail/quadrature.hpp"
#include "superhet/errors.hpp"
#include "superhet/specfun.hpp"

/// Power spectral density of the read-out noise produced by atoms diffusing
/// through a resonantly driven beam, together with its low- and high-frequency
/// asymptotes. PSD values are in model units (intensity^2 per Hz); conversion
/// to dBm happens in the receiver model.
namespace superhet::transit {

/// Optical transition used for the on-resonance absorption cross-section.
struct AtomTransition {
    double mu = 0.0;     ///< dipole matrix element, C m
    double f_l = 0.0;    ///< transition frequency, Hz
    double gamma = 0.0;  ///< natural linewidth, rad/s

    void validate() const
    {
        if (!(mu >= 0.0) || !std::isfinite(mu)) {
            throw DomainError("AtomTransition.mu must be finite and >= 0");
        }
        if (!(f_l > 0.0) || !std::isfinite(f_l)) {
            throw DomainError("AtomTransition.f_l must be finite and > 0");
        }
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw DomainError("AtomTransition.gamma must be finite and > 0");
        }
    }
};

struct TransitParams {
    double diffusion = 0.04;         ///< D, m^2/s
    double omega = 1e-3;             ///< beam radius, m
    double i0 = 44.0;                ///< peak intensity, W/m^2
    double n_a = 3e16;               ///< number density, m^-3
    double l = 11.78e-3;             ///< interaction length, m
    double sigma0 = 3.50244744294598e-13;  ///< absorption cross-section, m^2

    /// Atoms in the interaction volume, n_a * pi * omega^2 * l.
    double atom_number() const { return n_a * constants::pi * omega * omega * l; }

    /// Throws DomainError naming the offending field. `n_a = 0` is accepted so
    /// that an empty cell can be represented.
    void validate() const
    {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw DomainError(std::string("TransitParams.") + name
                                  + " must be finite and > 0");
            }
        };
        positive(diffusion, "diffusion");
        positive(omega, "omega");
        positive(i0, "i0");
        positive(l, "l");
        positive(sigma0, "sigma0");
        if (!(n_a >= 0.0) || !std::isfinite(n_a)) {
            throw DomainError("TransitParams.n_a must be finite and >= 0");
        }
    }
};

/// sigma0 = 4 pi mu^2 f_l / (hbar c eps0 Gamma)
inline double absorption_cross_section(const AtomTransition& t)
{
    t.validate();
    return 4.0 * constants::pi * t.mu * t.mu * t.f_l
           / (constants::hbar * constants::speed_of_light * constants::epsilon0 * t.gamma);
}

/// Dimensionless transit frequency phi = 2 pi f omega^2 / (4 D).
inline double phi_of(double f, const TransitParams& p)
{
    if (!(f > 0.0) || !std::isfinite(f)) {
        throw DomainError("phi_of: read-out frequency must be finite and > 0");
    }
    return constants::two_pi * f * p.omega * p.omega / (4.0 * p.diffusion);
}

/// Bracket {-2 cos(phi) Ci(phi) + sin(phi) [pi - 2 Si(phi)]}, which is twice
/// the auxiliary function g(phi). Evaluated as 2 g so that it stays accurate
/// at large phi where the two terms cancel.
inline double transit_bracket(double phi)
{
    return 2.0 * specfun::auxiliary(phi).g;
}

/// Closed-form PSD: I0^2 sigma0^2 N_a phi / (8 pi f) * bracket(phi).
inline double transit_psd_closed(double f, const TransitParams& p)
{
    p.validate();
    const double phi = phi_of(f, p);
    const double n_atoms = p.atom_number();
    if (n_atoms == 0.0) {
        return 0.0;
    }
    return p.i0 * p.i0 * p.sigma0 * p.sigma0 * n_atoms * phi / (8.0 * constants::pi * f)
           * transit_bracket(phi);
}

/// Correlation kernel e^{-2 pi i f tau} / (1 + 4 D |tau| / omega^2), real part.
inline double transit_kernel(double tau, double f, const TransitParams& p)
{
    return std::cos(constants::two_pi * f * tau)
           / (1.0 + 4.0 * p.diffusion * std::abs(tau) / (p.omega * p.omega));
}

struct QuadratureDiagnostics {
    double value = 0.0;           ///< PSD, same units as transit_psd_closed
    double error_estimate = 0.0;  ///< relative
    int panels = 0;
};

/// int_0^inf cos(phi u) / (1 + u) du, summed over half-periods of the cosine
/// and extrapolated with Wynn's epsilon algorithm. Independent of Si/Ci.
inline QuadratureDiagnostics oscillatory_kernel_integral(double phi, double tol,
                                                         int max_panels = 600)
{
    const double half_period = constants::pi / phi;
    const double first_zero = 0.5 * half_period;
    constexpr double panel_rel_tol = 1e-14;

    // Substituting u = e^s - 1 makes the first (non-oscillating) lobe smooth
    // even when it spans many decades in u.
    auto first_lobe = [phi](double s) { return std::cos(phi * std::expm1(s)); };
    auto integrand = [phi](double u) { return std::cos(phi * u) / (1.0 + u); };

    detail::WynnEpsilon wynn;
    double partial = detail::integrate_adaptive(first_lobe, 0.0, std::log1p(first_zero), 0.0,
                                                panel_rel_tol, 5000)
                         .value;
    wynn.push(partial);

    double previous = partial;
    int settled = 0;
    detail::WynnEpsilon::Estimate est{partial, 0.0};
    for (int k = 0; k < max_panels; ++k) {
        const double a = first_zero + k * half_period;
        const double b = a + half_period;
        partial += detail::integrate_adaptive(integrand, a, b, 0.0, panel_rel_tol, 200).value;
        wynn.push(partial);
        if (wynn.size() < 8) {
            continue;
        }
        est = wynn.estimate();
        const double change = std::abs(est.value - previous);
        previous = est.value;
        if (change <= 0.1 * tol * std::abs(est.value)) {
            if (++settled >= 3) {
                return QuadratureDiagnostics{est.value, change / std::abs(est.value),
                                             static_cast<int>(wynn.size())};
            }
        } else {
            settled = 0;
        }
    }
    const double achieved = std::abs(est.value) > 0.0 ? est.error / std::abs(est.value) : est.error;
    throw NumericalError("transit_psd_quadrature: tail extrapolation did not converge",
                         achieved, static_cast<int>(wynn.size()));
}

/// Direct quadrature of the Fourier integral of the transit correlation
/// function: (pi/4) n_a l I0^2 omega^2 sigma0^2 * 2 int_0^inf cos(2 pi f tau) /
/// (1 + 4 D tau / omega^2) dtau. Serves as the oracle for the closed form.
inline QuadratureDiagnostics transit_psd_quadrature(double f, const TransitParams& p,
                                                    double tol = 1e-10)
{
    p.validate();
    if (!(tol > 1e-12 && tol < 1e-3)) {
        throw DomainError("transit_psd_quadrature: tol must lie in (1e-12, 1e-3)");
    }
    const double phi = phi_of(f, p);
    if (p.n_a == 0.0) {
        return QuadratureDiagnostics{0.0, 0.0, 0};
    }
    const double w2 = p.omega * p.omega;
    const double prefactor = constants::pi / 4.0 * p.n_a * p.l * p.i0 * p.i0 * w2 * p.sigma0
                             * p.sigma0;
    // tau = u * omega^2 / (4 D)
    const double jacobian = w2 / (4.0 * p.diffusion);
    QuadratureDiagnostics d = oscillatory_kernel_integral(phi, tol);
    d.value *= prefactor * 2.0 * jacobian;
    return d;
}

/// Asymptotic amplitude plus whether the argument lies in the regime where
/// the asymptote is meant to be used.
struct Asymptote {
    double amplitude = 0.0;
    bool in_regime = false;
    double phi = 0.0;
};

inline constexpr double in_band_phi_limit = 1e-2;
inline constexpr double out_of_band_phi_limit = 1e2;

/// Low-frequency amplitude sqrt(N_a |ln phi + gamma| / (2 D)) * I0 sigma0 omega / 2.
///
/// This is the phi -> 0 limit of the closed form, where the bracket tends to
/// -2 (gamma + ln phi). The logarithm of the dimensionless phi replaces the
/// "log f" factor that is often quoted for this limit.
inline Asymptote in_band_amplitude(double f, const TransitParams& p)
{
    p.validate();
    const double phi = phi_of(f, p);
    const double log_factor = std::abs(std::log(phi) + constants::euler_gamma);
    const double amp = std::sqrt(p.atom_number() * log_factor / (2.0 * p.diffusion)) * p.i0
                       * p.sigma0 * p.omega / 2.0;
    return Asymptote{amp, phi < in_band_phi_limit, phi};
}

/// Same asymptote written in terms of the number density:
/// sqrt(pi n_a l |ln phi + gamma| / (2 D)) * I0 sigma0 omega^2 / 2.
inline double in_band_amplitude_density_form(double f, const TransitParams& p)
{
    p.validate();
    const double phi = phi_of(f, p);
    const double log_factor = std::abs(std::log(phi) + constants::euler_gamma);
    return std::sqrt(constants::pi * p.n_a * p.l * log_factor / (2.0 * p.diffusion)) * p.i0
           * p.sigma0 * p.omega * p.omega / 2.0;
}

/// High-frequency amplitude sqrt(D N_a / 2) * I0 sigma0 / (pi f omega).
inline Asymptote out_of_band_amplitude(double f, const TransitParams& p)
{
    p.validate();
    const double phi = phi_of(f, p);
    const double amp = std::sqrt(p.diffusion * p.atom_number() / 2.0) * p.i0 * p.sigma0
                       / (constants::pi * f * p.omega);
    return Asymptote{amp, phi > out_of_band_phi_limit, phi};
}

/// sqrt(D n_a l / (2 pi)) * I0 sigma0 / f; no dependence on omega.
inline double out_of_band_amplitude_density_form(double f, const TransitParams& p)
{
    p.validate();
    if (!(f > 0.0)) {
        throw DomainError("out_of_band_amplitude: read-out frequency must be > 0");
    }
    return std::sqrt(p.diffusion * p.n_a * p.l / constants::two_pi) * p.i0 * p.sigma0 / f;
}

} // namespace superhet::transit

#endif
