#ifndef SUPERHET_RECEIVER_MODEL_HPP
#define SUPERHET_RECEIVER_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "superhet/atom_optics.hpp"
#include "superhet/constants.hpp"
#include "superhet/errors.hpp"
#include "superhet/transit_noise.hpp"

namespace superhet::receiver {

/// A power level in dBm, or no power at all. Zero power has no dBm value, so
/// it is carried as an explicit absent state instead of -inf.
class Dbm {
public:
    static Dbm absent() { return Dbm{}; }

    static Dbm from_dbm(double dbm)
    {
        if (!std::isfinite(dbm)) {
            throw DomainError("Dbm: level must be finite");
        }
        Dbm out;
        out.m_value = dbm;
        return out;
    }

    /// Non-positive linear power maps to the absent state.
    static Dbm from_milliwatts(double mw)
    {
        return mw > 0.0 ? from_dbm(10.0 * std::log10(mw)) : absent();
    }

    bool present() const noexcept { return m_value.has_value(); }

    double dbm() const
    {
        if (!m_value) {
            throw DomainError("Dbm: no power present");
        }
        return *m_value;
    }

    double milliwatts() const { return m_value ? std::pow(10.0, *m_value / 10.0) : 0.0; }

    friend bool operator==(const Dbm&, const Dbm&) = default;

private:
    std::optional<double> m_value;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct SuperhetConfig {
    double omega_local = constants::two_pi * 7.75e6;  ///< rad/s
    double omega_sig = constants::two_pi * 0.10e6;    ///< rad/s
    double f_readout = 55e3;                          ///< Hz
    double kappa0 = 0.0;    ///< read-out amplitude per unit signal Rabi frequency (model units)
    double dbm_cal = 76.86; ///< dBm = 10 log10(model power) + dbm_cal
    double rbw_hz = 1.0;

    void validate() const
    {
        if (!(f_readout > 0.0)) {
            throw DomainError("SuperhetConfig.f_readout must be > 0");
        }
        if (!(kappa0 >= 0.0) || !std::isfinite(kappa0)) {
            throw DomainError("SuperhetConfig.kappa0 must be >= 0");
        }
        if (!std::isfinite(dbm_cal)) {
            throw DomainError("SuperhetConfig.dbm_cal must be finite");
        }
        if (!(rbw_hz > 0.0)) {
            throw DomainError("SuperhetConfig.rbw_hz must be > 0");
        }
    }
};

/// dBm level tabulated against frequency; interpolated linearly in log f and
/// held constant outside the table.
class FrequencyTable {
public:
    FrequencyTable() = default;

    explicit FrequencyTable(std::vector<std::pair<double, double>> points)
        : m_points(std::move(points))
    {
        if (m_points.empty()) {
            throw DomainError("FrequencyTable: needs at least one point");
        }
        for (std::size_t i = 0; i < m_points.size(); ++i) {
            if (!(m_points[i].first > 0.0) || !std::isfinite(m_points[i].second)) {
                throw DomainError("FrequencyTable: frequencies must be > 0 and levels finite");
            }
            if (i > 0 && !(m_points[i].first > m_points[i - 1].first)) {
                throw DomainError("FrequencyTable: frequencies must be strictly increasing");
            }
        }
    }

    double at(double f) const
    {
        if (m_points.empty()) {
            throw DomainError("FrequencyTable: empty table");
        }
        if (f <= m_points.front().first) {
            return m_points.front().second;
        }
        if (f >= m_points.back().first) {
            return m_points.back().second;
        }
        auto it = std::upper_bound(m_points.begin(), m_points.end(), f,
                                   [](double v, const auto& p) { return v < p.first; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double t = std::log(f / lo.first) / std::log(hi.first / lo.first);
        return lo.second + t * (hi.second - lo.second);
    }

    const std::vector<std::pair<double, double>>& points() const noexcept { return m_points; }

    friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;

private:
    std::vector<std::pair<double, double>> m_points;
};

/// Read-out noise sources. Transit and projection noise scale with the atom
/// number of `transit`; the others are fixed levels. Disabled sources are
/// std::nullopt (or a zero projection level).
struct NoiseBudget {
    transit::TransitParams transit;
    bool transit_enabled = true;
    double projection_psd_per_atom = 1.2933e-29;  ///< model units per Hz per atom, flat in f
    std::optional<FrequencyTable> probe_laser_dbm = FrequencyTable({{1e4, -125.0}, {1e5, -130.0}});
    std::optional<double> shot_floor_dbm = -113.68;
    /// Measurement-system residual present with the cell in place but not in
    /// the probe-only reference; it survives the probe subtraction.
    std::optional<FrequencyTable> residual_dbm =
        FrequencyTable({{1e4, -112.40}, {1e5, -121.64}});

    void validate() const
    {
        transit.validate();
        if (!(projection_psd_per_atom >= 0.0) || !std::isfinite(projection_psd_per_atom)) {
            throw DomainError("NoiseBudget.projection_psd_per_atom must be >= 0");
        }
        if (shot_floor_dbm && !std::isfinite(*shot_floor_dbm)) {
            throw DomainError("NoiseBudget.shot_floor_dbm must be finite");
        }
    }

    /// Light-atom interaction noise only: probe, shot and residual removed.
    NoiseBudget atoms_only() const
    {
        NoiseBudget out = *this;
        out.probe_laser_dbm.reset();
        out.shot_floor_dbm.reset();
        out.residual_dbm.reset();
        return out;
    }

    /// What the detector sees with the cell removed: probe noise and shot noise.
    NoiseBudget probe_reference() const
    {
        NoiseBudget out = *this;
        out.transit_enabled = false;
        out.projection_psd_per_atom = 0.0;
        out.residual_dbm.reset();
        return out;
    }

    NoiseBudget with_length(double l_m) const
    {
        NoiseBudget out = *this;
        out.transit.l = l_m;
        return out;
    }
};

/// Linear powers (mW) of every budget term in one resolution bandwidth.
struct NoiseComponents {
    double transit_mw = 0.0;
    double projection_mw = 0.0;
    double probe_mw = 0.0;
    double shot_mw = 0.0;
    double residual_mw = 0.0;

    double interaction_mw() const { return transit_mw + projection_mw; }
    double total_mw() const { return transit_mw + projection_mw + probe_mw + shot_mw + residual_mw; }
};

inline NoiseComponents noise_components(double f, const NoiseBudget& budget, double rbw,
                                        double dbm_cal)
{
    if (!(f > 0.0)) {
        throw DomainError("noise_components: frequency must be > 0");
    }
    if (!(rbw > 0.0)) {
        throw DomainError("noise_components: rbw must be > 0");
    }
    budget.validate();
    const double model_to_mw = db_to_linear(dbm_cal);
    NoiseComponents c;
    if (budget.transit_enabled) {
        c.transit_mw = transit::transit_psd_closed(f, budget.transit) * rbw * model_to_mw;
    }
    c.projection_mw =
        budget.projection_psd_per_atom * budget.transit.atom_number() * rbw * model_to_mw;
    if (budget.probe_laser_dbm) {
        c.probe_mw = db_to_linear(budget.probe_laser_dbm->at(f));
    }
    if (budget.shot_floor_dbm) {
        c.shot_mw = db_to_linear(*budget.shot_floor_dbm);
    }
    if (budget.residual_dbm) {
        c.residual_mw = db_to_linear(budget.residual_dbm->at(f));
    }
    return c;
}

/// Sum of all enabled noise sources in one resolution bandwidth.
inline Dbm total_noise_power(double f, const NoiseBudget& budget, double rbw, double dbm_cal)
{
    return Dbm::from_milliwatts(noise_components(f, budget, rbw, dbm_cal).total_mw());
}

/// Read-out power for a signal Rabi frequency: the read-out amplitude is
/// kappa0 * Omega_s, so the power is its square (6.02 dB per doubling).
inline Dbm signal_power(double omega_sig, const SuperhetConfig& cfg)
{
    cfg.validate();
    const double amplitude = cfg.kappa0 * std::abs(omega_sig);
    if (amplitude == 0.0) {
        return Dbm::absent();
    }
    return Dbm::from_dbm(20.0 * std::log10(amplitude) + cfg.dbm_cal);
}

/// Measurement equation Omega_s = P / kappa0, with P the read-out amplitude
/// recovered from a dBm level.
inline double rabi_from_power(const Dbm& p, const SuperhetConfig& cfg)
{
    cfg.validate();
    if (!(cfg.kappa0 > 0.0)) {
        throw CalibrationError("rabi_from_power: conversion gain is zero");
    }
    if (!p.present()) {
        return 0.0;
    }
    return std::pow(10.0, (p.dbm() - cfg.dbm_cal) / 20.0) / cfg.kappa0;
}

struct SnrResult {
    Dbm p_s;
    Dbm p_na;
    double snr_db = 0.0;
    double min_rabi = 0.0;  ///< signal Rabi frequency that equals the noise, rad/s
};

/// SNR at read-out frequency f for a cell of length l_m. cfg.kappa0 must be
/// the conversion gain at that length.
inline SnrResult snr_and_sensitivity(const SuperhetConfig& cfg, const NoiseBudget& budget,
                                     double l_m, double f)
{
    SnrResult r;
    r.p_s = signal_power(cfg.omega_sig, cfg);
    r.p_na = total_noise_power(f, budget.with_length(l_m), cfg.rbw_hz, cfg.dbm_cal);
    if (!r.p_na.present()) {
        throw DomainError("snr_and_sensitivity: noise power is zero");
    }
    r.snr_db = r.p_s.present() ? r.p_s.dbm() - r.p_na.dbm() : -std::numeric_limits<double>::infinity();
    r.min_rabi = rabi_from_power(r.p_na, cfg);
    return r;
}

/// Signal read-out from a cell whose microwave field forms a standing wave.
/// The microwave power is assumed corrected to first order (path-averaged
/// |E| equal to the reference length's), so what remains is the partial
/// cancellation of the heterodyne response between regions of different
/// standing-wave phase.
inline Dbm effective_signal_with_inhomogeneity(double l_m, const optics::CellGeometry& g,
                                               const SuperhetConfig& cfg)
{
    g.validate();
    const double corrected = optics::path_averaged_field(g.l, g) / optics::path_averaged_field(l_m, g);
    const double response = corrected * optics::path_coherent_field(l_m, g);
    SuperhetConfig scaled = cfg;
    scaled.kappa0 = cfg.kappa0 * response;
    return signal_power(cfg.omega_sig, scaled);
}

} // namespace superhet::receiver

#endif
