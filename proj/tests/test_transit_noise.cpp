#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "superhet/transit_noise.hpp"

using namespace superhet;
using transit::TransitParams;

namespace {

oracle::Transit as_oracle(const TransitParams& p)
{
    return {p.diffusion, p.omega, p.i0, p.n_a, p.l, p.sigma0};
}

/// Frequency that gives the requested phi for p.
double f_for_phi(double phi, const TransitParams& p)
{
    return phi * 4.0 * p.diffusion / (2.0 * std::numbers::pi * p.omega * p.omega);
}

} // namespace

TEST(CrossSection, ZeroDipole)
{
    EXPECT_EQ(transit::absorption_cross_section({0.0, 3.518e14, 2 * std::numbers::pi * 5.22e6}), 0.0);
}

TEST(CrossSection, QuadraticInDipole)
{
    const transit::AtomTransition t{2.697e-29, 3.518e14, 2 * std::numbers::pi * 5.22e6};
    auto t2 = t;
    t2.mu *= 2.0;
    EXPECT_EQ(transit::absorption_cross_section(t2), 4.0 * transit::absorption_cross_section(t));
}

TEST(CrossSection, CaesiumD2)
{
    const double gamma = 2 * std::numbers::pi * 5.22e6;
    const double s = transit::absorption_cross_section({2.697e-29, 3.518e14, gamma});
    EXPECT_NEAR(s / oracle::sigma0(2.697e-29, 3.518e14, gamma), 1.0, 1e-14);
    EXPECT_NEAR(s, 3.50244744294598037e-13, 1e-26);
}

TEST(CrossSection, RejectsInvalidTransition)
{
    EXPECT_THROW(transit::absorption_cross_section({1e-29, 0.0, 1.0}), DomainError);
    EXPECT_THROW(transit::absorption_cross_section({1e-29, 1e14, -1.0}), DomainError);
    EXPECT_THROW(transit::absorption_cross_section({-1e-29, 1e14, 1.0}), DomainError);
}

TEST(Phi, ArithmeticAndScaling)
{
    TransitParams p;
    p.diffusion = 0.1;
    p.omega = 1e-3;
    EXPECT_NEAR(transit::phi_of(10e3, p), 0.157079632679489662, 1e-16);
    EXPECT_EQ(transit::phi_of(20e3, p), 2.0 * transit::phi_of(10e3, p));
    auto q = p;
    q.omega = 2e-3;
    EXPECT_EQ(transit::phi_of(10e3, q), 4.0 * transit::phi_of(10e3, p));
    EXPECT_THROW(transit::phi_of(0.0, p), DomainError);
    EXPECT_THROW(transit::phi_of(-5.0, p), DomainError);
}

TEST(Psd, NoAtomsNoNoise)
{
    TransitParams p;
    p.n_a = 0.0;
    EXPECT_EQ(transit::transit_psd_closed(1e4, p), 0.0);
    EXPECT_EQ(transit::transit_psd_quadrature(1e4, p).value, 0.0);
}

TEST(Psd, RejectsBadFrequency)
{
    EXPECT_THROW(transit::transit_psd_closed(0.0, TransitParams{}), DomainError);
    EXPECT_THROW(transit::transit_psd_closed(-1.0, TransitParams{}), DomainError);
}

TEST(Psd, ClosedFormMatchesIndependentOracle)
{
    const TransitParams p;
    for (int i = 0; i < 40; ++i) {
        const double phi = std::pow(10.0, -3.0 + 6.0 * i / 39.0);
        const double f = f_for_phi(phi, p);
        const double want = oracle::transit_psd(f, as_oracle(p));
        EXPECT_NEAR(transit::transit_psd_closed(f, p) / want, 1.0, 1e-9) << "phi=" << phi;
    }
}

TEST(Psd, QuadratureMatchesClosedForm)
{
    const TransitParams p;
    for (int i = 0; i < 40; ++i) {
        const double phi = std::pow(10.0, -3.0 + 6.0 * i / 39.0);
        const double f = f_for_phi(phi, p);
        const auto q = transit::transit_psd_quadrature(f, p);
        EXPECT_NEAR(transit::transit_psd_closed(f, p) / q.value, 1.0, 1e-6) << "phi=" << phi;
        EXPECT_LE(q.error_estimate, 1e-10);
        EXPECT_GT(q.panels, 0);
    }
}

TEST(Psd, QuadratureToleranceContract)
{
    const TransitParams p;
    EXPECT_THROW(transit::transit_psd_quadrature(1e4, p, 1e-13), DomainError);
    EXPECT_THROW(transit::transit_psd_quadrature(1e4, p, 1e-2), DomainError);
    EXPECT_NO_THROW(transit::transit_psd_quadrature(1e4, p, 1e-6));
}

TEST(Psd, QuadratureReportsNonConvergence)
{
    try {
        transit::oscillatory_kernel_integral(1.0, 1e-11, 3);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_GT(e.iterations(), 0);
    }
}

TEST(Psd, IntegrandIsOneAtOrigin)
{
    const TransitParams p;
    EXPECT_EQ(transit::transit_kernel(0.0, 1e4, p), 1.0);
}

TEST(Quadrature, ConstantStubOnTruncatedInterval)
{
    const auto r = superhet::detail::integrate_adaptive([](double) { return 1.0; }, 0.0, 3.5, 0.0, 1e-14);
    EXPECT_NEAR(r.value, 3.5, 1e-14);
    const auto s = superhet::detail::integrate_adaptive([](double x) { return std::exp(-x); }, 0.0, 40.0,
                                               0.0, 1e-14);
    EXPECT_NEAR(s.value, 1.0 - std::exp(-40.0), 1e-14);
}

TEST(Quadrature, WynnAcceleratesAlternatingSeries)
{
    // ln 2 = 1 - 1/2 + 1/3 - ...
    superhet::detail::WynnEpsilon w;
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
        s += (k % 2 ? 1.0 : -1.0) / k;
        w.push(s);
    }
    EXPECT_NEAR(w.estimate().value, std::log(2.0), 1e-12);
}

TEST(Psd, PositiveEverywhere)
{
    const TransitParams p;
    for (int i = 0; i <= 120; ++i) {
        const double phi = std::pow(10.0, -6.0 + 12.0 * i / 120.0);
        EXPECT_GT(transit::transit_psd_closed(f_for_phi(phi, p), p), 0.0) << "phi=" << phi;
    }
}

TEST(Psd, LinearInAtomNumber)
{
    const TransitParams p;
    auto q = p;
    q.n_a *= 3.0;
    for (double f : {1e3, 1e4, 5.5e4, 1e5, 1e6}) {
        EXPECT_NEAR(transit::transit_psd_closed(f, q) / transit::transit_psd_closed(f, p), 3.0, 1e-14);
    }
}

TEST(OutOfBand, MatchesClosedFormAtLargePhi)
{
    const TransitParams p;
    const double f3 = f_for_phi(1e3, p);
    const auto a3 = transit::out_of_band_amplitude(f3, p);
    EXPECT_TRUE(a3.in_regime);
    EXPECT_NEAR(a3.amplitude / std::sqrt(transit::transit_psd_closed(f3, p)), 1.0, 0.01);
    const double f4 = f_for_phi(1e4, p);
    const double a4 = transit::out_of_band_amplitude(f4, p).amplitude;
    EXPECT_NEAR(a4 * a4 / transit::transit_psd_closed(f4, p), 1.0, 0.01);
    for (double phi = 1e3; phi <= 1e8; phi *= 1.5) {
        const double f = f_for_phi(phi, p);
        EXPECT_NEAR(transit::out_of_band_amplitude(f, p).amplitude
                        / std::sqrt(transit::transit_psd_closed(f, p)),
                    1.0, 0.01);
    }
}

TEST(OutOfBand, InverseFrequencyAndBeamIndependence)
{
    const TransitParams p;
    const double a = transit::out_of_band_amplitude(1e6, p).amplitude;
    EXPECT_NEAR(transit::out_of_band_amplitude(2e6, p).amplitude / a, 0.5, 1e-15);
    auto q = p;
    q.omega = 2.0 * p.omega;
    EXPECT_NEAR(transit::out_of_band_amplitude(1e6, q).amplitude / a, 1.0, 1e-12);
    EXPECT_NEAR(transit::out_of_band_amplitude_density_form(1e6, q)
                    / transit::out_of_band_amplitude_density_form(1e6, p),
                1.0, 1e-12);
    EXPECT_NEAR(transit::out_of_band_amplitude_density_form(1e6, p) / a, 1.0, 1e-12);
}

TEST(OutOfBand, RegimeFlag)
{
    const TransitParams p;
    EXPECT_FALSE(transit::out_of_band_amplitude(f_for_phi(1.0, p), p).in_regime);
}

TEST(InBand, MatchesClosedFormAtSmallPhi)
{
    const TransitParams p;
    for (double phi : {1e-4, 1e-6, 1e-8}) {
        const double f = f_for_phi(phi, p);
        const auto a = transit::in_band_amplitude(f, p);
        EXPECT_TRUE(a.in_regime);
        EXPECT_NEAR(a.amplitude / std::sqrt(transit::transit_psd_closed(f, p)), 1.0, 0.05);
    }
    EXPECT_FALSE(transit::in_band_amplitude(f_for_phi(1.0, p), p).in_regime);
}

TEST(InBand, BothFormsAgree)
{
    const TransitParams p;
    for (double phi : {1e-3, 1e-5}) {
        const double f = f_for_phi(phi, p);
        EXPECT_NEAR(transit::in_band_amplitude_density_form(f, p)
                        / transit::in_band_amplitude(f, p).amplitude,
                    1.0, 1e-14);
    }
}

TEST(InBand, QuadrupleLengthDoublesAmplitude)
{
    const TransitParams p;
    auto q = p;
    q.l = 4.0 * p.l;
    const double f = f_for_phi(1e-5, p);
    EXPECT_NEAR(transit::in_band_amplitude(f, q).amplitude / transit::in_band_amplitude(f, p).amplitude,
                2.0, 1e-14);
}

TEST(InBand, GrowsAsBeamRadiusSquared)
{
    TransitParams p;
    const double f = f_for_phi(1e-8, p);
    auto q = p;
    q.omega = 2.0 * p.omega;
    const double ratio = transit::in_band_amplitude(f, q).amplitude / transit::in_band_amplitude(f, p).amplitude;
    EXPECT_NEAR(ratio / 4.0, 1.0, 0.05);
    // same through the closed form
    const double closed = std::sqrt(transit::transit_psd_closed(f, q) / transit::transit_psd_closed(f, p));
    EXPECT_NEAR(closed / 4.0, 1.0, 0.05);
}
