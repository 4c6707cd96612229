#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "superhet/synth_and_fit.hpp"

using namespace superhet;
using fit::NoiseSpectrum;
using fit::PowerLawPoint;
using receiver::NoiseBudget;

namespace {

std::vector<double> sweep_lengths_mm()
{
    std::vector<double> out;
    for (int i = 0; i < 9; ++i) {
        out.push_back(7.28 + 9.0 * i / 8.0);
    }
    return out;
}

NoiseSpectrum constant_spectrum(double start, double stop, double level)
{
    NoiseSpectrum s;
    s.freqs = fit::frequency_grid(start, stop, 1.0);
    s.power_mw.assign(s.freqs.size(), level);
    s.flagged.assign(s.freqs.size(), 0);
    return s;
}

std::vector<PowerLawPoint> exact_points(double a, double kappa, double p0)
{
    std::vector<PowerLawPoint> pts;
    for (double l : sweep_lengths_mm()) {
        pts.push_back({l, a * std::pow(l, 2.0 * kappa) + p0});
    }
    return pts;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double rel_std(const std::vector<double>& v)
{
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / (v.size() - 1)) / m;
}

} // namespace

TEST(RelativeAtomNumber, KnownValues)
{
    EXPECT_NEAR(fit::relative_atom_number(1.0), 0.0, 1e-15);
    EXPECT_NEAR(fit::relative_atom_number(10.0), 20.0, 1e-13);
    EXPECT_NEAR(fit::relative_atom_number(10.78), 20.652, 1e-3);
    EXPECT_THROW(fit::relative_atom_number(0.0), DomainError);
}

TEST(FrequencyGrid, HalfOpen)
{
    const auto g = fit::frequency_grid(10e3, 100e3, 1.0);
    EXPECT_EQ(g.size(), 90000u);
    EXPECT_EQ(g.front(), 10e3);
    EXPECT_EQ(g.back(), 99999.0);
    EXPECT_THROW(fit::frequency_grid(10.0, 5.0, 1.0), DomainError);
}

TEST(Synthesis, LargeAverageApproachesMean)
{
    const NoiseBudget b;
    const auto grid = fit::frequency_grid(10e3, 100e3, 500.0);
    const auto m = fit::mean_spectrum_mw(b, grid, 1.0, 76.86);
    const auto s = fit::draw_spectrum(grid, m, 1.0, 1000000, 17);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(s.power_mw[i] / m[i], 1.0, 0.005);
    }
}

TEST(Synthesis, DeterministicPerSeed)
{
    const NoiseBudget b;
    const auto grid = fit::frequency_grid(10e3, 12e3, 1.0);
    const auto a = fit::synthesize_nps(b, grid, 1.0, 76.86, 100, 42);
    const auto c = fit::synthesize_nps(b, grid, 1.0, 76.86, 100, 42);
    const auto d = fit::synthesize_nps(b, grid, 1.0, 76.86, 100, 43);
    EXPECT_EQ(a.power_mw, c.power_mw);
    EXPECT_NE(a.power_mw, d.power_mw);
}

TEST(Synthesis, RelativeScatterIsInverseRootAverages)
{
    std::vector<double> grid(1000, 0.0);
    std::iota(grid.begin(), grid.end(), 1.0);
    const std::vector<double> m(grid.size(), 2.5e-12);
    const auto s = fit::draw_spectrum(grid, m, 1.0, 100, 7);
    EXPECT_NEAR(rel_std(s.power_mw), 0.10, 0.01);
}

TEST(Synthesis, RejectsBadInput)
{
    const std::vector<double> grid{1.0, 2.0};
    EXPECT_THROW(fit::draw_spectrum(grid, std::vector<double>{1.0}, 1.0, 10, 1), AlignmentError);
    EXPECT_THROW(fit::draw_spectrum(grid, std::vector<double>{1.0, 1.0}, 1.0, 0, 1), DomainError);
}

TEST(Subtraction, EqualInputsAreAllFlagged)
{
    const auto s = constant_spectrum(1e3, 2e3, 1e-12);
    const auto d = fit::subtract_probe_noise(s, s);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_TRUE(d.flagged[i]);
        EXPECT_FALSE(d.dbm(i).present());
    }
}

TEST(Subtraction, ZeroReferenceIsIdentity)
{
    const auto s = fit::synthesize_nps(NoiseBudget{}, fit::frequency_grid(1e4, 1.1e4, 1.0), 1.0, 76.86, 50, 3);
    auto z = s;
    std::fill(z.power_mw.begin(), z.power_mw.end(), 0.0);
    const auto d = fit::subtract_probe_noise(s, z);
    EXPECT_EQ(d.power_mw, s.power_mw);
}

TEST(Subtraction, RealisticLevelsKeepEveryBin)
{
    const NoiseBudget b;
    const auto grid = fit::frequency_grid(10e3, 100e3, 1.0);
    const auto na = fit::synthesize_nps(b.with_length(7.28e-3), grid, 1.0, 76.86, 1000, 11);
    const auto np = fit::synthesize_nps(b.probe_reference(), grid, 1.0, 76.86, 1000, 12);
    const auto d = fit::subtract_probe_noise(na, np);
    EXPECT_EQ(std::count(d.flagged.begin(), d.flagged.end(), 1), 0);
}

TEST(Subtraction, MisalignedGridsThrow)
{
    const auto a = constant_spectrum(1e3, 2e3, 1.0);
    const auto b = constant_spectrum(1e3 + 1, 2e3 + 1, 1.0);
    EXPECT_THROW(fit::subtract_probe_noise(a, b), AlignmentError);
    auto c = a;
    c.rbw = 2.0;
    EXPECT_THROW(fit::subtract_probe_noise(a, c), AlignmentError);
}

TEST(Sections, ConstantSpectrumStaysConstant)
{
    const auto s = constant_spectrum(10e3, 100e3, 3.25e-13);
    const auto r = fit::section_average(s, 1000.0);
    ASSERT_EQ(r.spectrum.size(), 90u);
    EXPECT_EQ(r.spectrum.freqs.front(), 10500.0);
    EXPECT_EQ(r.spectrum.freqs.back(), 99500.0);
    for (double p : r.spectrum.power_mw) {
        EXPECT_NEAR(p / 3.25e-13, 1.0, 1e-13);
    }
    EXPECT_TRUE(r.dropped_centers.empty());
}

TEST(Sections, AveragingReducesScatter)
{
    const std::vector<double> grid = fit::frequency_grid(1.0, 100001.0, 1.0);
    const std::vector<double> m(grid.size(), 1.0);
    const auto s = fit::draw_spectrum(grid, m, 1.0, 100, 5);
    const auto r = fit::section_average(s, 1000.0);
    // 1000 bins per section: scatter falls by sqrt(1000)
    EXPECT_NEAR(rel_std(r.spectrum.power_mw), 0.1 / std::sqrt(1000.0), 0.001);
}

TEST(Sections, FullyFlaggedSectionIsDropped)
{
    auto s = constant_spectrum(10e3, 15e3, 1.0);
    for (std::size_t i = 1000; i < 2000; ++i) {
        s.flagged[i] = 1;
    }
    s.flagged[2500] = 1;
    s.power_mw[2500] = 1e9;
    const auto r = fit::section_average(s, 1000.0);
    EXPECT_EQ(r.spectrum.size(), 4u);
    ASSERT_EQ(r.dropped_centers.size(), 1u);
    EXPECT_EQ(r.dropped_centers[0], 11500.0);
    EXPECT_EQ(r.spectrum.power_mw[1], 1.0);
}

TEST(Sections, ShortSpanIsRejected)
{
    EXPECT_THROW(fit::section_average(constant_spectrum(1e3, 1.5e3, 1.0), 1000.0), DomainError);
}

TEST(Sections, SubtractionCommutesWithAveraging)
{
    const NoiseBudget b;
    const auto grid = fit::frequency_grid(10e3, 20e3, 1.0);
    const auto na = fit::synthesize_nps(b.with_length(12e-3), grid, 1.0, 76.86, 1000, 21);
    const auto np = fit::synthesize_nps(b.probe_reference(), grid, 1.0, 76.86, 1000, 22);
    const auto one = fit::section_average(fit::subtract_probe_noise(na, np)).spectrum;
    const auto sa = fit::section_average(na).spectrum;
    const auto sp = fit::section_average(np).spectrum;
    ASSERT_EQ(one.size(), sa.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_NEAR((sa.power_mw[i] - sp.power_mw[i]) / one.power_mw[i], 1.0, 1e-12);
    }
}

TEST(PowerLaw, ExactRoundTripFreeKappa)
{
    const auto pts = exact_points(2.0, 0.5, 1.0);
    const auto f = fit::fit_power_law(pts);
    EXPECT_NEAR(f.a_coeff, 2.0, 1e-9);
    EXPECT_NEAR(f.kappa, 0.5, 1e-9);
    EXPECT_NEAR(f.p_n0, 1.0, 1e-9);
    EXPECT_FALSE(f.kappa_fixed);
    EXPECT_FALSE(f.p_n0_clamped);
}

TEST(PowerLaw, ExactRoundTripFixedKappa)
{
    const auto f = fit::fit_power_law(exact_points(2.0, 0.5, 1.0), 0.5);
    EXPECT_NEAR(f.a_coeff, 2.0, 1e-9);
    EXPECT_NEAR(f.p_n0, 1.0, 1e-9);
    EXPECT_TRUE(f.kappa_fixed);
}

TEST(PowerLaw, OtherExponentsAndTinyScales)
{
    for (double kappa : {0.25, 0.75, 1.1}) {
        const auto f = fit::fit_power_law(exact_points(3e-13, kappa, 5e-12));
        EXPECT_NEAR(f.kappa, kappa, 1e-7) << kappa;
        EXPECT_NEAR(f.a_coeff / 3e-13, 1.0, 1e-6) << kappa;
        EXPECT_NEAR(f.p_n0 / 5e-12, 1.0, 1e-6) << kappa;
    }
}

TEST(PowerLaw, FlatDataHasNoGrowth)
{
    std::vector<PowerLawPoint> pts;
    for (double l : sweep_lengths_mm()) {
        pts.push_back({l, 4.0});
    }
    const auto f = fit::fit_power_law(pts, 0.5);
    EXPECT_NEAR(f.a_coeff, 0.0, 1e-12);
    EXPECT_NEAR(f.p_n0, 4.0, 1e-12);
}

TEST(PowerLaw, TooFewOrDegeneratePoints)
{
    const auto pts = exact_points(1.0, 0.5, 1.0);
    EXPECT_THROW(fit::fit_power_law(std::span(pts).first(2), 0.5), FitError);
    EXPECT_THROW(fit::fit_power_law(std::span(pts).first(3)), FitError);
    std::vector<PowerLawPoint> same(5, PowerLawPoint{8.0, 3.0});
    EXPECT_THROW(fit::fit_power_law(same, 0.5), FitError);
    EXPECT_THROW(fit::fit_power_law(same), FitError);
    EXPECT_THROW(fit::fit_power_law(pts, 2.0), FitError);
}

TEST(PowerLaw, NegativeOffsetIsClampedAndFlagged)
{
    const auto pts = exact_points(2.0, 0.5, -3.0);
    const auto f = fit::fit_power_law(pts, 0.5);
    EXPECT_TRUE(f.p_n0_clamped);
    EXPECT_EQ(f.p_n0, 0.0);
    EXPECT_GT(f.a_coeff, 0.0);
    const auto g = fit::fit_power_law(pts);
    EXPECT_TRUE(g.p_n0_clamped);
    EXPECT_EQ(g.p_n0, 0.0);
}

TEST(PowerLaw, DecibelDomainRecoversExactData)
{
    const auto pts = exact_points(2.0, 0.5, 1.0);
    const auto f = fit::fit_power_law(pts, std::nullopt, fit::FitDomain::decibel);
    EXPECT_NEAR(f.kappa, 0.5, 1e-8);
    EXPECT_NEAR(f.a_coeff, 2.0, 1e-7);
    EXPECT_NEAR(f.p_n0, 1.0, 1e-7);
    auto bad = pts;
    bad[0].p = 0.0;
    EXPECT_THROW(fit::fit_power_law(bad, 0.5, fit::FitDomain::decibel), FitError);
}

TEST(PowerLaw, StandardErrorsShrinkWithNoise)
{
    auto pts = exact_points(2.0, 0.5, 1.0);
    const double wiggle[] = {0.01, -0.02, 0.015, -0.005, 0.0, 0.01, -0.01, 0.02, -0.015};
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i].p *= 1.0 + wiggle[i];
    }
    const auto f = fit::fit_power_law(pts);
    auto quiet = exact_points(2.0, 0.5, 1.0);
    for (std::size_t i = 0; i < quiet.size(); ++i) {
        quiet[i].p *= 1.0 + 0.1 * wiggle[i];
    }
    const auto g = fit::fit_power_law(quiet);
    EXPECT_GT(f.stderr_kappa, 0.0);
    EXPECT_LT(g.stderr_kappa, f.stderr_kappa);
}

TEST(FrequencyFits, TransitOnlyAmplitudeFollowsPsd)
{
    NoiseBudget b = NoiseBudget{}.atoms_only();
    b.projection_psd_per_atom = 0.0;
    const auto grid = fit::frequency_grid(10e3, 100e3, 5e3);
    std::vector<NoiseSpectrum> spectra;
    for (double l : sweep_lengths_mm()) {
        NoiseSpectrum s;
        s.freqs = grid;
        s.power_mw = fit::mean_spectrum_mw(b.with_length(l * 1e-3), grid, 1.0, 76.86);
        s.flagged.assign(grid.size(), 0);
        spectra.push_back(s);
    }
    const auto fits = fit::a_and_pn0_vs_frequency(spectra, sweep_lengths_mm());
    ASSERT_EQ(fits.size(), grid.size());
    // A(f) / psd(f at 1 mm) is a constant
    auto unit = b.transit;
    unit.l = 1e-3;
    const double ref = fits[0].fit.a_coeff / transit::transit_psd_closed(grid[0], unit);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double psd = transit::transit_psd_closed(grid[j], unit);
        EXPECT_NEAR(fits[j].fit.a_coeff / psd / ref, 1.0, 1e-9);
        EXPECT_NEAR(fits[j].fit.p_n0 / fits[j].fit.a_coeff, 0.0, 1e-9);
    }
}

TEST(FrequencyFits, ProjectionOnlyAmplitudeIsFlat)
{
    NoiseBudget b = NoiseBudget{}.atoms_only();
    b.transit_enabled = false;
    const auto grid = fit::frequency_grid(10e3, 100e3, 5e3);
    std::vector<NoiseSpectrum> spectra;
    for (double l : sweep_lengths_mm()) {
        spectra.push_back(fit::synthesize_nps(b.with_length(l * 1e-3), grid, 1.0, 76.86, 100000, 9));
    }
    const auto fits = fit::a_and_pn0_vs_frequency(spectra, sweep_lengths_mm());
    std::vector<double> a;
    for (const auto& f : fits) {
        a.push_back(f.fit.a_coeff);
    }
    for (double v : a) {
        EXPECT_NEAR(v / mean(a), 1.0, 0.05);
    }
}

TEST(FrequencyFits, ErrorNamesTheFrequency)
{
    NoiseSpectrum s = constant_spectrum(1e3, 1.003e3, 1.0);
    std::vector<NoiseSpectrum> spectra{s, s};
    try {
        fit::a_and_pn0_vs_frequency(spectra, std::vector<double>{7.0, 8.0});
        FAIL() << "expected FitError";
    } catch (const FitError& e) {
        EXPECT_NE(std::string(e.what()).find("f=1000"), std::string::npos) << e.what();
    }
    EXPECT_THROW(fit::a_and_pn0_vs_frequency(spectra, std::vector<double>{7.0}), AlignmentError);
}

TEST(FrequencyFits, DefaultOffsetLiesInMeasuredBand)
{
    const NoiseBudget b;
    const auto grid = fit::frequency_grid(10e3, 100e3, 1.0);
    const auto lengths = sweep_lengths_mm();
    const auto np = fit::section_average(fit::synthesize_nps(b.probe_reference(), grid, 1.0, 76.86, 1000, 100)).spectrum;
    std::vector<NoiseSpectrum> spectra;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
        const auto na = fit::section_average(
            fit::synthesize_nps(b.with_length(lengths[k] * 1e-3), grid, 1.0, 76.86, 1000, 200 + k)).spectrum;
        spectra.push_back(fit::subtract_probe_noise(na, np));
    }
    for (const auto& f : fit::a_and_pn0_vs_frequency(spectra, lengths)) {
        const double db = 10.0 * std::log10(f.fit.p_n0);
        EXPECT_GE(db, -125.0) << f.f_hz;
        EXPECT_LE(db, -110.0) << f.f_hz;
    }
}

TEST(KappaEstimate, UnbiasedOverManySeeds)
{
    // only the 55 kHz section is needed for the free fit
    const NoiseBudget b;
    const auto grid = fit::frequency_grid(55e3, 56e3, 1.0);
    const auto lengths = sweep_lengths_mm();
    const auto mean_np = fit::mean_spectrum_mw(b.probe_reference(), grid, 1.0, 76.86);
    std::vector<std::vector<double>> mean_na;
    for (double l : lengths) {
        mean_na.push_back(fit::mean_spectrum_mw(b.with_length(l * 1e-3), grid, 1.0, 76.86));
    }
    std::vector<double> kappas;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::vector<PowerLawPoint> pts;
        for (std::size_t k = 0; k < lengths.size(); ++k) {
            const auto na = fit::draw_spectrum(grid, mean_na[k], 1.0, 1000, 1000 * seed + 2 * k);
            const auto np = fit::draw_spectrum(grid, mean_np, 1.0, 1000, 1000 * seed + 2 * k + 1);
            const auto ni = fit::section_average(fit::subtract_probe_noise(na, np)).spectrum;
            ASSERT_EQ(ni.size(), 1u);
            pts.push_back({lengths[k], ni.power_mw[0]});
        }
        kappas.push_back(fit::fit_power_law(pts).kappa);
    }
    EXPECT_NEAR(mean(kappas), 0.5, 0.01);
}

TEST(DbSlope, ExactLine)
{
    std::vector<fit::DbPoint> pts;
    for (double x = 15.0; x < 25.0; x += 1.25) {
        pts.push_back({x, x + 7.0});
    }
    const auto r = fit::fit_db_slope(pts);
    EXPECT_NEAR(r.slope, 1.0, 1e-13);
    EXPECT_NEAR(r.intercept, 7.0, 1e-12);
    EXPECT_NEAR(r.r_squared, 1.0, 1e-13);
    for (double e : r.residuals) {
        EXPECT_NEAR(e, 0.0, 1e-12);
    }
}

TEST(DbSlope, MatchesLonghandRegression)
{
    std::vector<fit::DbPoint> pts;
    std::vector<double> x, y;
    for (int i = 0; i < 9; ++i) {
        x.push_back(17.0 + 0.6 * i);
        y.push_back(-120.0 + 0.3 * x.back() + 0.05 * std::sin(3.0 * i));
        pts.push_back({x.back(), y.back()});
    }
    const auto r = fit::fit_db_slope(pts);
    const auto o = oracle::ols(x, y);
    EXPECT_NEAR(r.slope, o.slope, 1e-10);
    EXPECT_NEAR(r.intercept, o.intercept, 1e-8);
    EXPECT_NEAR(r.r_squared, o.r2, 1e-10);
}

TEST(DbSlope, TooFewPoints)
{
    const std::vector<fit::DbPoint> pts{{1.0, 2.0}, {2.0, 3.0}};
    EXPECT_THROW(fit::fit_db_slope(pts), FitError);
}

TEST(DbSlope, SplitAtThreshold)
{
    std::vector<fit::DbPoint> pts;
    for (double x = 17.0; x < 25.0; x += 1.0) {
        pts.push_back({x, x < 20.5 ? 2.0 * x : 41.0 + 0.5 * (x - 20.5)});
    }
    const auto s = fit::fit_db_slope_split(pts, 20.5);
    EXPECT_NEAR(s.below.slope, 2.0, 1e-12);
    EXPECT_NEAR(s.above.slope, 0.5, 1e-12);
    EXPECT_EQ(s.below.regime, fit::Regime::below);
    EXPECT_EQ(s.above.regime, fit::Regime::above);
    EXPECT_THROW(fit::fit_db_slope_split(pts, 18.5), FitError);
}
