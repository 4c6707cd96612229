#ifndef SUPERHET_SYNTH_AND_FIT_HPP
#define SUPERHET_SYNTH_AND_FIT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "superhet/errors.hpp"
#include "superhet/receiver_model.hpp"

/// Synthetic noise power spectra, the subtract / section / average reduction,
/// the power-law fit P_ni = A N^(2 kappa) + P_n0 and dB-dB slope regression.
namespace superhet::fit {

/// Per-bin powers are kept in linear units (mW in one rbw) so that they can be
/// subtracted; non-positive bins after a subtraction carry a flag.
struct NoiseSpectrum {
    std::vector<double> freqs;
    std::vector<double> power_mw;
    std::vector<std::uint8_t> flagged;
    double rbw = 1.0;
    long n_avg = 1;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return freqs.size(); }

    receiver::Dbm dbm(std::size_t i) const
    {
        return flagged[i] ? receiver::Dbm::absent() : receiver::Dbm::from_milliwatts(power_mw[i]);
    }

    void validate() const
    {
        if (power_mw.size() != freqs.size() || flagged.size() != freqs.size()) {
            throw DomainError("NoiseSpectrum: array lengths differ");
        }
        if (!(rbw > 0.0)) {
            throw DomainError("NoiseSpectrum: rbw must be > 0");
        }
        if (n_avg < 1) {
            throw DomainError("NoiseSpectrum: n_avg must be >= 1");
        }
        for (std::size_t i = 0; i < freqs.size(); ++i) {
            if (!std::isfinite(power_mw[i]) || !std::isfinite(freqs[i])) {
                throw DomainError("NoiseSpectrum: non-finite value");
            }
            if (i > 0 && !(freqs[i] > freqs[i - 1])) {
                throw DomainError("NoiseSpectrum: frequencies must be increasing");
            }
        }
    }
};

/// 20 log10(l / 1 mm)
inline double relative_atom_number(double l_mm)
{
    if (!(l_mm > 0.0) || !std::isfinite(l_mm)) {
        throw DomainError("relative_atom_number: length must be > 0");
    }
    return 20.0 * std::log10(l_mm);
}

/// Uniform grid start, start + step, ... strictly below stop.
inline std::vector<double> frequency_grid(double start, double stop, double step)
{
    if (!(step > 0.0) || !(stop > start) || !(start > 0.0)) {
        throw DomainError("frequency_grid: need 0 < start < stop and step > 0");
    }
    const auto n = static_cast<std::size_t>(std::ceil((stop - start) / step - 1e-9));
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = start + static_cast<double>(i) * step;
    }
    return grid;
}

/// Expected power per bin (mW) of a noise budget.
inline std::vector<double> mean_spectrum_mw(const receiver::NoiseBudget& budget,
                                            std::span<const double> grid, double rbw,
                                            double dbm_cal)
{
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[i] = receiver::noise_components(grid[i], budget, rbw, dbm_cal).total_mw();
    }
    return out;
}

/// Averaged-periodogram bins: gamma distributed with shape n_avg around the
/// mean, so the relative standard deviation is 1/sqrt(n_avg).
inline NoiseSpectrum draw_spectrum(std::span<const double> grid, std::span<const double> mean_mw,
                                   double rbw, long n_avg, std::uint64_t seed)
{
    if (n_avg < 1) {
        throw DomainError("synthesize_nps: n_avg must be >= 1");
    }
    if (grid.size() != mean_mw.size()) {
        throw AlignmentError("synthesize_nps: grid and mean spectrum differ in length");
    }
    NoiseSpectrum s;
    s.freqs.assign(grid.begin(), grid.end());
    s.power_mw.resize(grid.size());
    s.flagged.assign(grid.size(), 0);
    s.rbw = rbw;
    s.n_avg = n_avg;
    s.seed = seed;
    std::mt19937_64 rng(seed);
    const double shape = static_cast<double>(n_avg);
    std::gamma_distribution<double> unit(shape, 1.0 / shape);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(mean_mw[i] >= 0.0)) {
            throw DomainError("synthesize_nps: mean power must be >= 0");
        }
        s.power_mw[i] = mean_mw[i] * unit(rng);
    }
    s.validate();
    return s;
}

inline NoiseSpectrum synthesize_nps(const receiver::NoiseBudget& budget,
                                    std::span<const double> grid, double rbw, double dbm_cal,
                                    long n_avg, std::uint64_t seed)
{
    const std::vector<double> mean = mean_spectrum_mw(budget, grid, rbw, dbm_cal);
    return draw_spectrum(grid, mean, rbw, n_avg, seed);
}

/// Per-bin linear difference; bins at or below zero are flagged.
inline NoiseSpectrum subtract_probe_noise(const NoiseSpectrum& p_na, const NoiseSpectrum& p_np)
{
    if (p_na.freqs != p_np.freqs) {
        throw AlignmentError("subtract_probe_noise: frequency grids differ");
    }
    if (p_na.rbw != p_np.rbw) {
        throw AlignmentError("subtract_probe_noise: resolution bandwidths differ");
    }
    NoiseSpectrum out = p_na;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = p_na.power_mw[i] - p_np.power_mw[i];
        const bool bad = p_na.flagged[i] || p_np.flagged[i] || !(d > 0.0);
        out.power_mw[i] = bad ? 0.0 : d;
        out.flagged[i] = bad ? 1 : 0;
    }
    return out;
}

struct SectionedSpectrum {
    NoiseSpectrum spectrum;
    std::vector<double> dropped_centers;  ///< sections left empty by flags
};

/// Sections [f0 + k w, f0 + (k+1) w) with f0 the first grid frequency; each
/// becomes one bin at the section centre holding the linear mean of its
/// unflagged bins.
inline SectionedSpectrum section_average(const NoiseSpectrum& s, double width = 1000.0)
{
    s.validate();
    if (!(width > 0.0)) {
        throw DomainError("section_average: width must be > 0");
    }
    // a bin covers up to the next grid point, so 1000 bins at 1 Hz span one 1 kHz section
    const double span = s.size() < 2 ? 0.0 : s.freqs.back() - s.freqs.front() + (s.freqs[1] - s.freqs[0]);
    if (span < width * (1.0 - 1e-9)) {
        throw DomainError("section_average: grid span is shorter than one section");
    }
    const double f0 = s.freqs.front();
    SectionedSpectrum out;
    out.spectrum.rbw = s.rbw;
    out.spectrum.n_avg = s.n_avg;
    out.spectrum.seed = s.seed;

    std::size_t i = 0;
    while (i < s.size()) {
        const auto k = static_cast<long>(std::floor((s.freqs[i] - f0) / width + 1e-9));
        const double hi = f0 + static_cast<double>(k + 1) * width;
        double sum = 0.0;
        std::size_t used = 0;
        for (; i < s.size() && s.freqs[i] < hi - 1e-9 * width; ++i) {
            if (!s.flagged[i]) {
                sum += s.power_mw[i];
                ++used;
            }
        }
        const double centre = f0 + (static_cast<double>(k) + 0.5) * width;
        if (used == 0) {
            out.dropped_centers.push_back(centre);
            continue;
        }
        out.spectrum.freqs.push_back(centre);
        out.spectrum.power_mw.push_back(sum / static_cast<double>(used));
        out.spectrum.flagged.push_back(0);
    }
    return out;
}

struct PowerLawPoint {
    double n_a;  ///< linear relative atom number, l / 1 mm
    double p;    ///< linear power
};

enum class FitDomain { linear, decibel };

struct PowerLawFit {
    double a_coeff = 0.0;
    double kappa = 0.5;
    double p_n0 = 0.0;
    double stderr_a = 0.0;
    double stderr_kappa = 0.0;
    double stderr_p_n0 = 0.0;
    bool kappa_fixed = false;
    bool p_n0_clamped = false;
    bool a_clamped = false;
    double rss = 0.0;

    double predict(double n_a) const { return a_coeff * std::pow(n_a, 2.0 * kappa) + p_n0; }
};

inline constexpr double kappa_lower = 0.0;
inline constexpr double kappa_upper = 1.5;

namespace detail {

struct LinearSolve {
    double a, c, rss, var_a, var_c;
};

/// Least squares y = a x + c.
inline LinearSolve solve_affine(std::span<const double> x, std::span<const double> y)
{
    const auto n = static_cast<double>(x.size());
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, sx2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
        sx2 += x[i] * x[i];
    }
    if (!(sxx > 1e-12 * sx2)) {
        throw FitError("fit_power_law: rank-deficient design (N_a values not distinct)");
    }
    LinearSolve r{};
    r.a = sxy / sxx;
    r.c = ym - r.a * xm;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - r.a * x[i] - r.c;
        r.rss += e * e;
    }
    const double s2 = x.size() > 2 ? r.rss / (n - 2.0) : 0.0;
    r.var_a = s2 / sxx;
    r.var_c = s2 * (1.0 / n + xm * xm / sxx);
    return r;
}

/// Levenberg-Marquardt on a handful of parameters. `model` fills the
/// residual vector and Jacobian for a parameter vector.
using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd jtj;
    double rss;
    int iterations;
};

inline LmResult levenberg_marquardt(const ResidualFn& model, Eigen::VectorXd p, int m,
                                    int max_iter = 200)
{
    const auto np = p.size();
    Eigen::VectorXd r(m), r_try(m);
    Eigen::MatrixXd J(m, np), J_try(m, np);
    model(p, r, J);
    double rss = r.squaredNorm();
    double lambda = 1e-3;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::MatrixXd jtj = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        for (int inner = 0; inner < 30; ++inner) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd trial = p + step;
            model(trial, r_try, J_try);
            const double rss_try = r_try.allFinite() ? r_try.squaredNorm()
                                                     : std::numeric_limits<double>::infinity();
            if (rss_try <= rss) {
                const double rel_step = step.norm() / (p.norm() + 1e-300);
                p = trial;
                r = r_try;
                J = J_try;
                const double drop = rss - rss_try;
                rss = rss_try;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (rel_step < 1e-14 || drop <= 1e-15 * rss) {
                    return LmResult{p, J.transpose() * J, rss, it + 1};
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            break;
        }
    }
    return LmResult{p, J.transpose() * J, rss, it};
}

inline double min_bracket(const std::function<double(double)>& f, double a, double b)
{
    // golden-section search; the profile is smooth and unimodal near the scan minimum
    constexpr double g = 0.6180339887498949;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 200 && (b - a) > 1e-12; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline void covariance_to_stderr(const Eigen::MatrixXd& jtj, double s2, Eigen::VectorXd& se)
{
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (!lu.isInvertible()) {
        throw FitError("fit_power_law: singular normal matrix");
    }
    const Eigen::MatrixXd cov = lu.inverse() * s2;
    se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

inline void check_kappa(double kappa)
{
    constexpr double margin = 1e-3;
    if (!(kappa > kappa_lower + margin && kappa < kappa_upper - margin)) {
        throw FitError("fit_power_law: kappa ran to the boundary of (0, 1.5): "
                       + std::to_string(kappa));
    }
}

/// Fixed kappa, linear domain. Closed form, then clamping.
inline PowerLawFit fit_fixed_linear(std::span<const PowerLawPoint> pts, double kappa)
{
    const std::size_t n = pts.size();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::pow(pts[i].n_a, 2.0 * kappa);
        y[i] = pts[i].p;
    }
    PowerLawFit out;
    out.kappa = kappa;
    out.kappa_fixed = true;
    const LinearSolve s = solve_affine(x, y);
    out.a_coeff = s.a;
    out.p_n0 = s.c;
    out.stderr_a = std::sqrt(s.var_a);
    out.stderr_p_n0 = std::sqrt(s.var_c);
    out.rss = s.rss;
    if (out.p_n0 < 0.0) {
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += x[i] * y[i];
            sxx += x[i] * x[i];
        }
        out.a_coeff = sxy / sxx;
        out.p_n0 = 0.0;
        out.p_n0_clamped = true;
        out.rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - out.a_coeff * x[i];
            out.rss += e * e;
        }
        out.stderr_a = std::sqrt(out.rss / static_cast<double>(n - 1) / sxx);
        out.stderr_p_n0 = 0.0;
    }
    if (out.a_coeff < 0.0) {
        out.a_coeff = 0.0;
        out.a_clamped = true;
        out.p_n0 = std::max(0.0, std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n));
        out.rss = 0.0;
        for (double v : y) {
            out.rss += (v - out.p_n0) * (v - out.p_n0);
        }
        out.stderr_a = 0.0;
        out.stderr_p_n0 = std::sqrt(out.rss / static_cast<double>(n - 1) / static_cast<double>(n));
    }
    return out;
}

/// Profile residual sum of squares over kappa (A and P_n0 eliminated).
inline double profile_rss(std::span<const PowerLawPoint> pts, double kappa)
{
    std::vector<double> x(pts.size()), y(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        x[i] = std::pow(pts[i].n_a, 2.0 * kappa);
        y[i] = pts[i].p;
    }
    return solve_affine(x, y).rss;
}

/// Residuals of the power law with parameters (A, kappa[, P_n0]) on scaled
/// data, in linear or dB form.
inline ResidualFn power_law_residuals(std::span<const PowerLawPoint> pts, FitDomain domain,
                                      std::optional<double> kappa_fixed, bool with_offset)
{
    return [pts, domain, kappa_fixed, with_offset](const Eigen::VectorXd& p, Eigen::VectorXd& r,
                                                   Eigen::MatrixXd& J) {
        const double a = p(0);
        const double kappa = kappa_fixed ? *kappa_fixed : p(1);
        const Eigen::Index ic = kappa_fixed ? 1 : 2;
        const double c = with_offset ? p(ic) : 0.0;
        constexpr double db = 10.0 / std::numbers::ln10;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double xk = std::pow(pts[i].n_a, 2.0 * kappa);
            const double m = a * xk + c;
            double scale = 1.0;
            if (domain == FitDomain::linear) {
                r(row) = m - pts[i].p;
            } else {
                r(row) = (m > 0.0) ? db * std::log(m / pts[i].p)
                                   : std::numeric_limits<double>::infinity();
                scale = db / m;
            }
            J(row, 0) = scale * xk;
            if (!kappa_fixed) {
                J(row, 1) = scale * a * 2.0 * std::log(pts[i].n_a) * xk;
            }
            if (with_offset) {
                J(row, ic) = scale;
            }
        }
    };
}

} // namespace detail

/// Least-squares fit of P = A N^(2 kappa) + P_n0. With `kappa_fixed` the
/// problem is linear and solved directly; otherwise kappa is located on the
/// profile residual and all three parameters are polished together.
/// FitDomain::decibel minimizes residuals of 10 log10 P instead.
inline PowerLawFit fit_power_law(std::span<const PowerLawPoint> points,
                                 std::optional<double> kappa_fixed = std::nullopt,
                                 FitDomain domain = FitDomain::linear)
{
    const std::size_t min_points = kappa_fixed ? 3 : 4;
    if (points.size() < min_points) {
        throw FitError("fit_power_law: need at least " + std::to_string(min_points)
                       + " points, got " + std::to_string(points.size()));
    }
    double scale = 0.0;
    for (const auto& pt : points) {
        if (!(pt.n_a > 0.0) || !std::isfinite(pt.n_a) || !std::isfinite(pt.p)) {
            throw FitError("fit_power_law: N_a must be > 0 and powers finite");
        }
        if (domain == FitDomain::decibel && !(pt.p > 0.0)) {
            throw FitError("fit_power_law: dB-domain fit needs positive powers");
        }
        scale = std::max(scale, std::abs(pt.p));
    }
    if (kappa_fixed) {
        detail::check_kappa(*kappa_fixed);
    }
    {
        std::vector<double> na(points.size());
        std::transform(points.begin(), points.end(), na.begin(),
                       [](const PowerLawPoint& p) { return p.n_a; });
        std::sort(na.begin(), na.end());
        const auto distinct = static_cast<std::size_t>(
            std::unique(na.begin(), na.end()) - na.begin());
        if (distinct < (kappa_fixed ? 2u : 3u)) {
            throw FitError("fit_power_law: rank-deficient design (too few distinct N_a)");
        }
    }
    if (scale == 0.0) {
        PowerLawFit zero;
        zero.kappa = kappa_fixed.value_or(0.5);
        zero.kappa_fixed = kappa_fixed.has_value();
        return zero;
    }

    std::vector<PowerLawPoint> pts(points.begin(), points.end());
    for (auto& pt : pts) {
        pt.p /= scale;
    }
    const auto m = static_cast<int>(pts.size());

    PowerLawFit fit;
    if (kappa_fixed) {
        fit = detail::fit_fixed_linear(pts, *kappa_fixed);
    } else {
        // Coarse scan of the profile, then refine inside the best bracket.
        constexpr int n_scan = 149;
        const double step = (kappa_upper - kappa_lower) / (n_scan + 1);
        int best = 1;
        double best_rss = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= n_scan; ++i) {
            const double rss = detail::profile_rss(pts, kappa_lower + i * step);
            if (rss < best_rss) {
                best_rss = rss;
                best = i;
            }
        }
        const double kappa = detail::min_bracket(
            [&](double k) { return detail::profile_rss(pts, k); },
            kappa_lower + (best - 1) * step, kappa_lower + (best + 1) * step);
        fit = detail::fit_fixed_linear(pts, kappa);
        fit.kappa_fixed = false;
        if (!fit.p_n0_clamped && !fit.a_clamped) {
            Eigen::VectorXd p0(3);
            p0 << fit.a_coeff, kappa, fit.p_n0;
            const auto lm = detail::levenberg_marquardt(
                detail::power_law_residuals(pts, FitDomain::linear, std::nullopt, true), p0, m);
            fit.a_coeff = lm.params(0);
            fit.kappa = lm.params(1);
            fit.p_n0 = lm.params(2);
            fit.rss = lm.rss;
        }
    }

    if (domain == FitDomain::decibel && !fit.a_clamped) {
        const bool with_offset = !fit.p_n0_clamped;
        const Eigen::Index np = (kappa_fixed ? 1 : 2) + (with_offset ? 1 : 0);
        Eigen::VectorXd p0(np);
        p0(0) = fit.a_coeff;
        if (!kappa_fixed) {
            p0(1) = fit.kappa;
        }
        if (with_offset) {
            p0(np - 1) = fit.p_n0;
        }
        const auto lm = detail::levenberg_marquardt(
            detail::power_law_residuals(pts, FitDomain::decibel, kappa_fixed, with_offset), p0, m);
        fit.a_coeff = lm.params(0);
        if (!kappa_fixed) {
            fit.kappa = lm.params(1);
        }
        fit.p_n0 = with_offset ? lm.params(np - 1) : 0.0;
        fit.rss = lm.rss;
        if (fit.p_n0 < 0.0) {
            fit.p_n0 = 0.0;
            fit.p_n0_clamped = true;
        }
    }

    if (!kappa_fixed) {
        detail::check_kappa(fit.kappa);
        if (fit.p_n0 < 0.0) {
            // Refit without the offset.
            Eigen::VectorXd p0(2);
            p0 << std::max(fit.a_coeff, 1e-12), fit.kappa;
            const auto lm = detail::levenberg_marquardt(
                detail::power_law_residuals(pts, FitDomain::linear, std::nullopt, false), p0, m);
            fit.a_coeff = lm.params(0);
            fit.kappa = lm.params(1);
            fit.p_n0 = 0.0;
            fit.p_n0_clamped = true;
            fit.rss = lm.rss;
            detail::check_kappa(fit.kappa);
        }
    }

    // Standard errors from the Jacobian at the solution (kappa fixed and
    // clamped parameters excluded).
    if (!fit.a_clamped && (!kappa_fixed || domain == FitDomain::decibel)) {
        const bool with_offset = !fit.p_n0_clamped;
        const Eigen::Index np = (kappa_fixed ? 1 : 2) + (with_offset ? 1 : 0);
        if (m > np) {
            Eigen::VectorXd p(np), r(m);
            Eigen::MatrixXd J(m, np);
            p(0) = fit.a_coeff;
            if (!kappa_fixed) {
                p(1) = fit.kappa;
            }
            if (with_offset) {
                p(np - 1) = fit.p_n0;
            }
            detail::power_law_residuals(pts, domain, kappa_fixed, with_offset)(p, r, J);
            Eigen::VectorXd se;
            detail::covariance_to_stderr(J.transpose() * J, r.squaredNorm() / double(m - np), se);
            fit.stderr_a = se(0);
            fit.stderr_kappa = kappa_fixed ? 0.0 : se(1);
            fit.stderr_p_n0 = with_offset ? se(np - 1) : 0.0;
        }
    }

    if (domain == FitDomain::linear) {
        fit.rss *= scale * scale;
    }
    fit.a_coeff *= scale;
    fit.p_n0 *= scale;
    fit.stderr_a *= scale;
    fit.stderr_p_n0 *= scale;
    return fit;
}

struct FrequencyFit {
    double f_hz;
    PowerLawFit fit;
};

/// One power-law fit per frequency bin across a length sweep. All spectra
/// must share a grid; flagged bins are left out of that bin's fit.
inline std::vector<FrequencyFit> a_and_pn0_vs_frequency(std::span<const NoiseSpectrum> spectra,
                                                        std::span<const double> lengths_mm,
                                                        std::optional<double> kappa_fixed = 0.5,
                                                        FitDomain domain = FitDomain::linear)
{
    if (spectra.size() != lengths_mm.size()) {
        throw AlignmentError("a_and_pn0_vs_frequency: one spectrum per length required");
    }
    if (spectra.empty()) {
        throw FitError("a_and_pn0_vs_frequency: no spectra");
    }
    for (const auto& s : spectra) {
        if (s.freqs != spectra.front().freqs) {
            throw AlignmentError("a_and_pn0_vs_frequency: spectra have different grids");
        }
    }
    std::vector<FrequencyFit> out;
    out.reserve(spectra.front().size());
    std::vector<PowerLawPoint> pts;
    for (std::size_t j = 0; j < spectra.front().size(); ++j) {
        pts.clear();
        for (std::size_t k = 0; k < spectra.size(); ++k) {
            if (!spectra[k].flagged[j]) {
                pts.push_back({lengths_mm[k], spectra[k].power_mw[j]});
            }
        }
        const double f = spectra.front().freqs[j];
        try {
            out.push_back({f, fit_power_law(pts, kappa_fixed, domain)});
        } catch (Error& e) {
            e.add_context("f=" + std::to_string(f) + " Hz");
            throw;
        }
    }
    return out;
}

enum class Regime { all, below, above };

inline const char* regime_name(Regime r)
{
    switch (r) {
    case Regime::below: return "below";
    case Regime::above: return "above";
    default: return "all";
    }
}

struct DbPoint {
    double x_db;
    double y_db;
};

struct ScalingResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<double> residuals;
    Regime regime = Regime::all;
};

/// Ordinary least squares in dB-dB coordinates.
inline ScalingResult fit_db_slope(std::span<const DbPoint> points, Regime regime = Regime::all)
{
    if (points.size() < 3) {
        throw FitError(std::string("fit_db_slope: need at least 3 points in regime '")
                       + regime_name(regime) + "', got " + std::to_string(points.size()));
    }
    std::vector<double> x(points.size()), y(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i].x_db) || !std::isfinite(points[i].y_db)) {
            throw FitError("fit_db_slope: non-finite point");
        }
        x[i] = points[i].x_db;
        y[i] = points[i].y_db;
    }
    const detail::LinearSolve s = detail::solve_affine(x, y);
    ScalingResult out;
    out.slope = s.a;
    out.intercept = s.c;
    out.regime = regime;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        out.residuals.push_back(y[i] - (s.a * x[i] + s.c));
        sst += (y[i] - ym) * (y[i] - ym);
    }
    if (sst > 0.0) {
        out.r_squared = std::clamp(1.0 - s.rss / sst, 0.0, 1.0);
    } else {
        out.r_squared = 1.0;
    }
    return out;
}

struct RegimeSplit {
    ScalingResult below;
    ScalingResult above;
};

/// Separate fits for points with x strictly below `threshold_db` and the rest.
inline RegimeSplit fit_db_slope_split(std::span<const DbPoint> points, double threshold_db)
{
    std::vector<DbPoint> lo, hi;
    for (const auto& p : points) {
        (p.x_db < threshold_db ? lo : hi).push_back(p);
    }
    return RegimeSplit{fit_db_slope(lo, Regime::below), fit_db_slope(hi, Regime::above)};
}

} // namespace superhet::fit

#endif
