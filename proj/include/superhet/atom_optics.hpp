#ifndef SUPERHET_ATOM_OPTICS_HPP
#define SUPERHET_ATOM_OPTICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "superhet/constants.hpp"
#include "superhet/detail/quadrature.hpp"
#include "superhet/errors.hpp"

/// Ladder-EIT and Autler-Townes spectra, the microwave standing wave inside
/// the vapor cell, and the first-order microwave power calibration.
namespace superhet::optics {

/// Weak-probe ladder (ground - intermediate - Rydberg), optionally dressed by
/// a resonant microwave to a fourth level. Rates are angular (rad/s).
struct LadderConfig {
    double omega_p = constants::two_pi * 7.03e6;
    double omega_c = constants::two_pi * 0.26e6;
    double gamma_e = constants::two_pi * 2.61e6;   ///< intermediate coherence decay
    double gamma_r = constants::two_pi * 3.8309114e6;  ///< Rydberg coherence decay (phenomenological)
    double delta_p = 0.0;
    double delta_c = 0.0;  ///< offset added to every scanned coupling detuning
    double od_per_mm = 5e-4;
    double l_mm = 11.78;
    double omega_mw = 0.0;  ///< 0 selects plain EIT

    void validate() const
    {
        auto finite = [](double v, const char* name) {
            if (!std::isfinite(v)) {
                throw DomainError(std::string("LadderConfig.") + name + " must be finite");
            }
        };
        finite(omega_p, "omega_p");
        finite(omega_c, "omega_c");
        finite(delta_p, "delta_p");
        finite(delta_c, "delta_c");
        finite(omega_mw, "omega_mw");
        if (!(gamma_e > 0.0) || !(gamma_r > 0.0)) {
            throw DomainError("LadderConfig decay rates must be > 0");
        }
        if (!(od_per_mm >= 0.0) || !std::isfinite(od_per_mm)) {
            throw DomainError("LadderConfig.od_per_mm must be >= 0");
        }
        if (!(l_mm > 0.0) || !std::isfinite(l_mm)) {
            throw DomainError("LadderConfig.l_mm must be > 0");
        }
    }
};

struct EITSpectrum {
    std::vector<double> detuning_hz;   ///< coupling detuning
    std::vector<double> transmission;  ///< probe transmission in [0, 1]
    std::optional<double> a_eit;       ///< peak above baseline, when a peak exists
    std::optional<double> fwhm_hz;
};

/// Baseline for the EIT amplitude is read this far from line centre.
inline constexpr double baseline_detuning_hz = 25e6;

/// Normalized absorption Re chi~ at coupling detuning `delta_c_rad`; equals 1
/// on the bare probe resonance.
inline double normalized_absorption(double delta_c_rad, const LadderConfig& cfg)
{
    using cplx = std::complex<double>;
    const double two_photon = cfg.delta_p + cfg.delta_c + delta_c_rad;
    cplx rydberg(cfg.gamma_r, -two_photon);
    if (cfg.omega_mw != 0.0) {
        rydberg += cfg.omega_mw * cfg.omega_mw / 4.0 / cplx(cfg.gamma_r, -two_photon);
    }
    cplx denom(cfg.gamma_e, -cfg.delta_p);
    if (cfg.omega_c != 0.0) {
        denom += cfg.omega_c * cfg.omega_c / 4.0 / rydberg;
    }
    return (cfg.gamma_e / denom).real();
}

inline double probe_transmission(double detuning_hz, const LadderConfig& cfg)
{
    const double od = cfg.od_per_mm * cfg.l_mm;
    return std::exp(-od * normalized_absorption(constants::two_pi * detuning_hz, cfg));
}

inline std::pair<double, double> extract_amplitude_fwhm(const EITSpectrum& s);

namespace detail {

inline double interpolate(std::span<const double> x, std::span<const double> y, double at)
{
    const auto it = std::lower_bound(x.begin(), x.end(), at);
    if (it == x.begin()) {
        return y.front();
    }
    if (it == x.end()) {
        return y.back();
    }
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + t * (y[i] - y[i - 1]);
}

inline void require_increasing(std::span<const double> grid, const char* what)
{
    if (grid.empty()) {
        throw DomainError(std::string(what) + ": detuning grid is empty");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw DomainError(std::string(what) + ": detuning grid must be strictly increasing");
        }
    }
}

} // namespace detail

/// Steady-state weak-probe spectrum T_p = exp(-OD Re chi~(Delta_c)) over the
/// given coupling-detuning grid (Hz). Amplitude and FWHM are filled in when the
/// spectrum has a peak above the baseline.
inline EITSpectrum eit_transmission(std::span<const double> grid_hz, const LadderConfig& cfg)
{
    detail::require_increasing(grid_hz, "eit_transmission");
    cfg.validate();
    EITSpectrum s;
    s.detuning_hz.assign(grid_hz.begin(), grid_hz.end());
    s.transmission.reserve(grid_hz.size());
    for (double d : grid_hz) {
        s.transmission.push_back(probe_transmission(d, cfg));
    }
    try {
        auto [a, w] = extract_amplitude_fwhm(s);
        s.a_eit = a;
        s.fwhm_hz = w;
    } catch (const ExtractionError&) {
        // no transparency window, e.g. omega_c = 0
    }
    return s;
}

/// Evenly spaced detuning grid [-span, span] with the given step.
inline std::vector<double> detuning_grid(double span_hz, double step_hz)
{
    if (!(span_hz > 0.0) || !(step_hz > 0.0)) {
        throw DomainError("detuning_grid: span and step must be > 0");
    }
    const auto half = static_cast<long>(std::llround(span_hz / step_hz));
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(2 * half + 1));
    for (long i = -half; i <= half; ++i) {
        grid.push_back(static_cast<double>(i) * step_hz);
    }
    return grid;
}

/// Peak transmission above baseline and full width at half of that height.
/// The baseline is the mean transmission at +-25 MHz (grid edges if the grid
/// is narrower). Half-height crossings are linearly interpolated.
inline std::pair<double, double> extract_amplitude_fwhm(const EITSpectrum& s)
{
    const auto& x = s.detuning_hz;
    const auto& y = s.transmission;
    if (x.size() != y.size() || x.size() < 3) {
        throw ExtractionError("extract_amplitude_fwhm: need at least 3 matching samples");
    }
    double baseline = 0.0;
    int count = 0;
    for (double at : {-baseline_detuning_hz, baseline_detuning_hz}) {
        if (at >= x.front() && at <= x.back()) {
            baseline += detail::interpolate(x, y, at);
            ++count;
        }
    }
    baseline = count ? baseline / count : 0.5 * (y.front() + y.back());

    const auto peak_it = std::max_element(y.begin(), y.end());
    const std::size_t peak = static_cast<std::size_t>(peak_it - y.begin());
    const double height = *peak_it - baseline;
    if (!(height > 1e-12 * std::max(std::abs(baseline), 1e-300))) {
        throw ExtractionError("extract_amplitude_fwhm: no peak above baseline");
    }
    const double half = baseline + 0.5 * height;

    std::size_t left = peak;
    while (left > 0 && y[left] > half) {
        --left;
    }
    std::size_t right = peak;
    while (right + 1 < y.size() && y[right] > half) {
        ++right;
    }
    if (y[left] > half || y[right] > half) {
        throw ExtractionError("extract_amplitude_fwhm: half-height not crossed inside the grid");
    }
    const double x_left = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left]);
    const double x_right =
        x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) / (y[right] - y[right - 1]);
    return {height, x_right - x_left};
}

/// Peak-to-peak separation (Hz) of the microwave-dressed doublet.
///
/// The spectrum is sampled on a grid covering both dressed lines, the two
/// strongest interior maxima are located and refined by a parabola through
/// their neighbours. Throws CalibrationError when the lines merge.
inline double at_splitting(const LadderConfig& cfg)
{
    cfg.validate();
    if (!(cfg.omega_mw > 0.0)) {
        throw DomainError("at_splitting: omega_mw must be > 0");
    }
    const double expected_hz = cfg.omega_mw / constants::two_pi;
    const double width_hz = cfg.gamma_r / constants::two_pi;
    const double step = std::min(expected_hz, width_hz) / 400.0;
    const std::vector<double> grid = detuning_grid(expected_hz + 6.0 * width_hz, step);

    // Work on -absorption rather than T: same extrema, no exp() compression.
    std::vector<double> signal(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        signal[i] = -normalized_absorption(constants::two_pi * grid[i], cfg);
    }

    std::vector<std::size_t> maxima;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        if (signal[i] > signal[i - 1] && signal[i] >= signal[i + 1]) {
            maxima.push_back(i);
        }
    }
    if (maxima.size() < 2) {
        throw CalibrationError("at_splitting: Autler-Townes doublet not resolved");
    }
    std::partial_sort(maxima.begin(), maxima.begin() + 2, maxima.end(),
                      [&](std::size_t a, std::size_t b) { return signal[a] > signal[b]; });

    auto refine = [&](std::size_t i) {
        const double ym = signal[i - 1];
        const double y0 = signal[i];
        const double yp = signal[i + 1];
        const double curvature = ym - 2.0 * y0 + yp;
        const double shift = curvature != 0.0 ? 0.5 * (ym - yp) / curvature : 0.0;
        return grid[i] + shift * step;
    };
    return std::abs(refine(maxima[0]) - refine(maxima[1]));
}

/// Microwave standing wave inside the cell along the optical path.
struct CellGeometry {
    double lambda_mw = constants::speed_of_light / 6.95e9;  ///< m
    double reflection_r = 0.62;
    double l = 7.28e-3;   ///< calibration reference length, m
    double z0 = -0.5e-3;  ///< where the optical path starts, m

    void validate() const
    {
        if (!(lambda_mw > 0.0) || !std::isfinite(lambda_mw)) {
            throw DomainError("CellGeometry.lambda_mw must be > 0");
        }
        if (!(reflection_r >= 0.0 && reflection_r < 1.0)) {
            throw DomainError("CellGeometry.reflection_r must lie in [0, 1)");
        }
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw DomainError("CellGeometry.l must be > 0");
        }
        if (!std::isfinite(z0)) {
            throw DomainError("CellGeometry.z0 must be finite");
        }
    }

    /// Interaction length at which the path spans a quarter wavelength.
    double quarter_wave_length() const { return lambda_mw / 4.0; }
};

/// E(z) = e0 |1 + r exp(i 4 pi z / lambda)|
inline double mw_field_profile(double z, const CellGeometry& g, double e0)
{
    const double phase = 2.0 * constants::two_pi * z / g.lambda_mw;
    return e0 * std::abs(std::complex<double>(1.0 + g.reflection_r * std::cos(phase),
                                              g.reflection_r * std::sin(phase)));
}

/// Mean of |E| over the path [z0, z0 + l].
inline double path_averaged_field(double l, const CellGeometry& g, double e0 = 1.0)
{
    if (!(l > 0.0)) {
        throw DomainError("path_averaged_field: l must be > 0");
    }
    auto profile = [&](double z) { return mw_field_profile(z, g, e0); };
    return superhet::detail::integrate_adaptive(profile, g.z0, g.z0 + l, 0.0, 1e-13).value / l;
}

/// Magnitude of the complex mean of 1 + r exp(i 4 pi z / lambda) over the
/// path; the phase of the standing wave averages out part of the response.
inline double path_coherent_field(double l, const CellGeometry& g)
{
    if (!(l > 0.0)) {
        throw DomainError("path_coherent_field: l must be > 0");
    }
    const double k = 2.0 * constants::two_pi / g.lambda_mw;
    using cplx = std::complex<double>;
    const cplx i(0.0, 1.0);
    const cplx reflected = g.reflection_r * (std::exp(i * (k * (g.z0 + l))) - std::exp(i * (k * g.z0)))
                           / (i * k);
    return std::abs(cplx(l, 0.0) + reflected) / l;
}

/// Microwave power correction (dB) that restores the path-averaged field of
/// the reference length g.l: -20 log10(E_bar(l) / E_bar(l_ref)).
inline double calibration_correction(double l, const CellGeometry& g)
{
    g.validate();
    const double mean = path_averaged_field(l, g);
    const double ref = path_averaged_field(g.l, g);
    if (!(mean > 0.0) || !(ref > 0.0)) {
        throw CalibrationError("calibration_correction: path-averaged field vanishes");
    }
    return -20.0 * std::log10(mean / ref);
}

/// kappa0 = cal * a_eit / fwhm
inline double conversion_gain(double a_eit, double fwhm_hz, double cal)
{
    if (!(fwhm_hz > 0.0)) {
        throw DomainError("conversion_gain: fwhm must be > 0");
    }
    return cal * a_eit / fwhm_hz;
}

} // namespace superhet::optics

#endif
