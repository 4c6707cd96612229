#ifndef SUPERHET_CAMPAIGN_HPP
#define SUPERHET_CAMPAIGN_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "superhet/atom_optics.hpp"
#include "superhet/config.hpp"
#include "superhet/errors.hpp"
#include "superhet/io.hpp"
#include "superhet/receiver_model.hpp"
#include "superhet/synth_and_fit.hpp"

/// Length sweeps, the seeded noise campaign and the CSV tree it produces.
#ifndef SUPERHET_VERSION
#define SUPERHET_VERSION "0.1.0"
#endif

namespace superhet::campaign {

using config::CampaignConfig;
using receiver::Dbm;

/// SplitMix64 finalizer; turns (seed, index, kind) into well-separated streams.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (1 + a) + 0xbf58476d1ce4e5b9ULL * (1 + b);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::string length_tag(double l_mm) { return "l" + io::format_number(l_mm) + "mm"; }

inline std::string context(double l_mm, std::optional<std::uint64_t> seed = std::nullopt)
{
    std::string s = "l=" + io::format_number(l_mm) + " mm";
    if (seed) {
        s += ", seed=" + std::to_string(*seed);
    }
    return s;
}

/// SUPERHET_WORKERS if set and positive, else the hardware concurrency.
inline unsigned worker_count()
{
    if (const char* env = std::getenv("SUPERHET_WORKERS")) {
        const auto n = io::parse_number(env);
        if (n && *n >= 1.0) {
            return static_cast<unsigned>(*n);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(i) for i in [0, n) on a small pool. Exceptions are kept per task
/// and the one with the lowest index is rethrown, so failures are reported
/// the same way whatever the scheduling.
template <class Task>
void parallel_for(std::size_t n, Task&& task)
{
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned nthreads = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nthreads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

struct EitPoint {
    double l_mm;
    optics::EITSpectrum spectrum;
    double a_eit;
    double fwhm_hz;
    double kappa0;
};

inline EitPoint eit_point(const CampaignConfig& cfg, double l_mm)
{
    try {
        const auto grid = optics::detuning_grid(cfg.eit_span_hz, cfg.eit_step_hz);
        EitPoint p{l_mm, optics::eit_transmission(grid, cfg.ladder_at(l_mm)), 0.0, 0.0, 0.0};
        const auto [a, w] = optics::extract_amplitude_fwhm(p.spectrum);
        p.a_eit = a;
        p.fwhm_hz = w;
        p.kappa0 = optics::conversion_gain(a, w, cfg.kappa_cal);
        return p;
    } catch (Error& e) {
        e.add_context(context(l_mm));
        throw;
    }
}

struct AtcalPoint {
    double l_mm;
    double splitting_hz;   ///< measured with the uncorrected microwave power
    double correction_db;  ///< power correction restoring the reference field
};

inline AtcalPoint atcal_point(const CampaignConfig& cfg, double l_mm)
{
    try {
        const double l = l_mm * 1e-3;
        optics::LadderConfig lc = cfg.atcal_ladder();
        lc.l_mm = l_mm;
        lc.omega_mw *= optics::path_averaged_field(l, cfg.cell)
                       / optics::path_averaged_field(cfg.cell.l, cfg.cell);
        return AtcalPoint{l_mm, optics::at_splitting(lc), optics::calibration_correction(l, cfg.cell)};
    } catch (Error& e) {
        e.add_context(context(l_mm));
        throw;
    }
}

struct SensitivityPoint {
    double l_mm;
    double n_a_db;
    Dbm p_s;
    Dbm p_na;
    std::optional<double> snr_db;
    double min_rabi;
};

enum class Case { ideal, nonideal };

inline const char* case_name(Case c) { return c == Case::ideal ? "ideal" : "nonideal"; }

/// Analytic signal, noise and SNR at cfg.f_scaling_hz. The ideal case keeps
/// only the atomic noise terms and a homogeneous microwave field; the
/// non-ideal case has the full budget and the standing wave.
inline SensitivityPoint sensitivity_point(const CampaignConfig& cfg, const EitPoint& eit, Case c)
{
    try {
        const double l = eit.l_mm * 1e-3;
        receiver::SuperhetConfig rc = cfg.receiver;
        rc.kappa0 = eit.kappa0;
        receiver::NoiseBudget budget = cfg.noise_budget(l);
        SensitivityPoint p{eit.l_mm, fit::relative_atom_number(eit.l_mm), Dbm::absent(),
                           Dbm::absent(), std::nullopt, 0.0};
        if (c == Case::ideal) {
            budget = budget.atoms_only();
            p.p_s = receiver::signal_power(rc.omega_sig, rc);
        } else {
            p.p_s = receiver::effective_signal_with_inhomogeneity(l, cfg.cell, rc);
        }
        p.p_na = receiver::total_noise_power(cfg.f_scaling_hz, budget, rc.rbw_hz, rc.dbm_cal);
        if (!p.p_na.present()) {
            throw DomainError("noise power is zero");
        }
        if (p.p_s.present()) {
            p.snr_db = p.p_s.dbm() - p.p_na.dbm();
        }
        p.min_rabi = rc.kappa0 > 0.0 ? receiver::rabi_from_power(p.p_na, rc) : 0.0;
        return p;
    } catch (Error& e) {
        e.add_context(context(eit.l_mm) + ", f=" + io::format_number(cfg.f_scaling_hz) + " Hz");
        throw;
    }
}

struct ScalingRow {
    std::string quantity;  ///< signal, noise or snr
    std::string case_name;
    fit::ScalingResult result;
};

/// N_a (dB) of the quarter-wave length.
inline double quarter_wave_threshold_db(const optics::CellGeometry& g)
{
    return fit::relative_atom_number(g.quarter_wave_length() * 1e3);
}

/// dB-dB slopes: all three quantities over the whole sweep for the ideal
/// case; for the non-ideal case signal and SNR per regime and noise both ways.
inline std::vector<ScalingRow> scaling_summary(const std::vector<SensitivityPoint>& ideal,
                                               const std::vector<SensitivityPoint>& nonideal,
                                               double threshold_db)
{
    auto points = [](const std::vector<SensitivityPoint>& pts, int which) {
        std::vector<fit::DbPoint> out;
        for (const auto& p : pts) {
            double y = 0.0;
            if (which == 0) {
                if (!p.p_s.present()) {
                    throw FitError("scaling: signal absent at " + context(p.l_mm));
                }
                y = p.p_s.dbm();
            } else if (which == 1) {
                y = p.p_na.dbm();
            } else {
                if (!p.snr_db) {
                    throw FitError("scaling: SNR undefined at " + context(p.l_mm));
                }
                y = *p.snr_db;
            }
            out.push_back({p.n_a_db, y});
        }
        return out;
    };
    static const char* names[] = {"signal", "noise", "snr"};
    std::vector<ScalingRow> rows;
    for (int q = 0; q < 3; ++q) {
        rows.push_back({names[q], "ideal", fit::fit_db_slope(points(ideal, q))});
    }
    for (int q = 0; q < 3; ++q) {
        const auto pts = points(nonideal, q);
        if (q == 1) {
            rows.push_back({names[q], "nonideal", fit::fit_db_slope(pts)});
        }
        const auto split = fit::fit_db_slope_split(pts, threshold_db);
        rows.push_back({names[q], "nonideal", split.below});
        rows.push_back({names[q], "nonideal", split.above});
    }
    return rows;
}

/// Everything one (length, seed) experiment produces.
struct RunSlot {
    fit::NoiseSpectrum p_na;  ///< sectioned
    fit::NoiseSpectrum p_np;  ///< sectioned
    fit::NoiseSpectrum p_ni;  ///< sectioned after subtraction
    std::vector<double> dropped;
    std::uint64_t seed_na = 0;
    std::uint64_t seed_np = 0;
};

struct SeedFits {
    std::uint64_t seed;
    std::vector<fit::FrequencyFit> fits;  ///< per section, kappa per config
    fit::FrequencyFit kappa_free;         ///< free-kappa fit at the scaling frequency
};

struct CampaignResult {
    std::vector<EitPoint> eit;
    std::vector<AtcalPoint> atcal;
    std::vector<SensitivityPoint> ideal;
    std::vector<SensitivityPoint> nonideal;
    std::vector<ScalingRow> scaling;
    double threshold_db = 0.0;
    std::vector<std::vector<RunSlot>> runs;  ///< [length][seed]
    std::vector<SeedFits> seed_fits;
    std::vector<std::uint64_t> seeds;
};

/// Index of the section whose interval contains f (nearest centre if none).
inline std::size_t section_containing(const fit::NoiseSpectrum& s, double f, double width)
{
    std::size_t best = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (f >= s.freqs[i] - 0.5 * width && f < s.freqs[i] + 0.5 * width) {
            return i;
        }
        if (std::abs(s.freqs[i] - f) < std::abs(s.freqs[best] - f)) {
            best = i;
        }
    }
    return best;
}

/// Deterministic length sweeps (EIT, A-T calibration, sensitivity, scaling).
inline void run_sweeps(const CampaignConfig& cfg, CampaignResult& out)
{
    const std::size_t nl = cfg.lengths_mm.size();
    out.eit.resize(nl);
    out.atcal.resize(nl);
    parallel_for(nl, [&](std::size_t k) {
        out.eit[k] = eit_point(cfg, cfg.lengths_mm[k]);
        out.atcal[k] = atcal_point(cfg, cfg.lengths_mm[k]);
    });
    for (const auto& e : out.eit) {
        out.ideal.push_back(sensitivity_point(cfg, e, Case::ideal));
        out.nonideal.push_back(sensitivity_point(cfg, e, Case::nonideal));
    }
    out.threshold_db = quarter_wave_threshold_db(cfg.cell);
    out.scaling = scaling_summary(out.ideal, out.nonideal, out.threshold_db);
}

/// Seeded noise experiments over (length, seed), then per-seed fits.
inline void run_noise(const CampaignConfig& cfg, CampaignResult& out)
{
    const std::size_t nl = cfg.lengths_mm.size();
    const auto ns = static_cast<std::size_t>(cfg.seeds);
    const auto grid = fit::frequency_grid(cfg.f_start_hz, cfg.f_stop_hz, cfg.f_step_hz);
    const double rbw = cfg.receiver.rbw_hz;
    const double cal = cfg.receiver.dbm_cal;

    out.seeds.clear();
    for (std::size_t s = 0; s < ns; ++s) {
        out.seeds.push_back(cfg.seed + s);
    }

    // Mean spectra are shared by every seed of a length.
    std::vector<std::vector<double>> mean_na(nl);
    std::vector<double> mean_np;
    parallel_for(nl + 1, [&](std::size_t k) {
        if (k == nl) {
            mean_np = fit::mean_spectrum_mw(cfg.noise_budget(cfg.lengths_mm[0] * 1e-3).probe_reference(),
                                            grid, rbw, cal);
            return;
        }
        try {
            mean_na[k] = fit::mean_spectrum_mw(cfg.noise_budget(cfg.lengths_mm[k] * 1e-3), grid, rbw, cal);
        } catch (Error& e) {
            e.add_context(context(cfg.lengths_mm[k]));
            throw;
        }
    });

    out.runs.assign(nl, std::vector<RunSlot>(ns));
    parallel_for(nl * ns, [&](std::size_t idx) {
        const std::size_t k = idx / ns;
        const std::size_t s = idx % ns;
        RunSlot& slot = out.runs[k][s];
        try {
            slot.seed_na = mix_seed(out.seeds[s], k, 0);
            slot.seed_np = mix_seed(out.seeds[s], k, 1);
            const auto na = fit::draw_spectrum(grid, mean_na[k], rbw, cfg.n_avg, slot.seed_na);
            const auto np = fit::draw_spectrum(grid, mean_np, rbw, cfg.n_avg, slot.seed_np);
            const auto ni = fit::subtract_probe_noise(na, np);
            slot.p_na = fit::section_average(na, cfg.section_hz).spectrum;
            slot.p_np = fit::section_average(np, cfg.section_hz).spectrum;
            auto sec = fit::section_average(ni, cfg.section_hz);
            slot.p_ni = std::move(sec.spectrum);
            slot.dropped = std::move(sec.dropped_centers);
        } catch (Error& e) {
            e.add_context(context(cfg.lengths_mm[k], out.seeds[s]));
            throw;
        }
    });

    out.seed_fits.resize(ns);
    parallel_for(ns, [&](std::size_t s) {
        std::vector<fit::NoiseSpectrum> spectra;
        for (std::size_t k = 0; k < nl; ++k) {
            spectra.push_back(out.runs[k][s].p_ni);
            if (spectra.back().freqs != spectra.front().freqs) {
                throw AlignmentError("[seed=" + std::to_string(out.seeds[s])
                                     + "] sections dropped at different frequencies across lengths");
            }
        }
        SeedFits sf{out.seeds[s], {}, {}};
        try {
            sf.fits = fit::a_and_pn0_vs_frequency(spectra, cfg.lengths_mm, cfg.kappa_fixed,
                                                  cfg.fit_domain);
            const std::size_t j =
                section_containing(spectra.front(), cfg.f_scaling_hz, cfg.section_hz);
            std::vector<fit::PowerLawPoint> pts;
            for (std::size_t k = 0; k < nl; ++k) {
                pts.push_back({cfg.lengths_mm[k], spectra[k].power_mw[j]});
            }
            try {
                sf.kappa_free = {spectra.front().freqs[j],
                                 fit::fit_power_law(pts, std::nullopt, cfg.fit_domain)};
            } catch (Error& e) {
                e.add_context("f=" + io::format_number(spectra.front().freqs[j]) + " Hz");
                throw;
            }
        } catch (Error& e) {
            e.add_context("seed=" + std::to_string(out.seeds[s]));
            throw;
        }
        out.seed_fits[s] = std::move(sf);
    });
}

inline CampaignResult run_campaign(const CampaignConfig& cfg)
{
    cfg.validate();
    CampaignResult out;
    run_sweeps(cfg, out);
    run_noise(cfg, out);
    return out;
}

// ---- CSV rendering ----

inline std::string dbm_text(const Dbm& p) { return p.present() ? io::format_number(p.dbm()) : ""; }

inline std::string eit_summary_csv(const std::vector<EitPoint>& pts)
{
    io::CsvTable t({"l_mm", "a_eit", "fwhm_hz", "kappa0"});
    for (const auto& p : pts) {
        t.row({io::format_number(p.l_mm), io::format_number(p.a_eit), io::format_number(p.fwhm_hz),
               io::format_number(p.kappa0)});
    }
    return t.str();
}

inline std::string eit_spectrum_csv(const optics::EITSpectrum& s)
{
    io::CsvTable t({"detuning_hz", "transmission"});
    for (std::size_t i = 0; i < s.detuning_hz.size(); ++i) {
        t.row({io::format_number(s.detuning_hz[i]), io::format_number(s.transmission[i])});
    }
    return t.str();
}

inline std::string atcal_csv(const std::vector<AtcalPoint>& pts)
{
    io::CsvTable t({"l_mm", "splitting_hz", "correction_db"});
    for (const auto& p : pts) {
        t.row({io::format_number(p.l_mm), io::format_number(p.splitting_hz),
               io::format_number(p.correction_db)});
    }
    return t.str();
}

inline std::string sensitivity_csv(const std::vector<SensitivityPoint>& pts)
{
    io::CsvTable t({"l_mm", "n_a_db", "p_s_dbm", "p_na_dbm", "snr_db", "min_rabi_rad_s"});
    for (const auto& p : pts) {
        t.row({io::format_number(p.l_mm), io::format_number(p.n_a_db), dbm_text(p.p_s),
               dbm_text(p.p_na), io::format_optional(p.snr_db), io::format_number(p.min_rabi)});
    }
    return t.str();
}

inline std::string scaling_csv(const std::vector<ScalingRow>& rows)
{
    io::CsvTable t({"quantity", "case", "regime", "slope", "intercept", "r2"});
    for (const auto& r : rows) {
        t.row({r.quantity, r.case_name, fit::regime_name(r.result.regime),
               io::format_number(r.result.slope), io::format_number(r.result.intercept),
               io::format_number(r.result.r_squared)});
    }
    return t.str();
}

inline std::string nps_csv(const fit::NoiseSpectrum& s)
{
    io::CsvTable t({"f_hz", "p_dbm", "flagged"});
    for (std::size_t i = 0; i < s.size(); ++i) {
        t.row({io::format_number(s.freqs[i]), dbm_text(s.dbm(i)), s.flagged[i] ? "1" : "0"});
    }
    return t.str();
}

inline std::vector<std::string> fit_cells(double f, const fit::PowerLawFit& p)
{
    return {io::format_number(f),          io::format_number(p.a_coeff),
            io::format_number(p.p_n0),     io::format_number(p.kappa),
            io::format_number(p.stderr_a), io::format_number(p.stderr_kappa),
            io::format_number(p.stderr_p_n0), p.p_n0_clamped ? "1" : "0"};
}

inline const std::vector<std::string>& fit_header()
{
    static const std::vector<std::string> h = {"f_hz",     "a_linear",     "p_n0_linear",
                                               "kappa",    "stderr_a",     "stderr_kappa",
                                               "stderr_p_n0", "p_n0_clamped"};
    return h;
}

inline std::string fits_csv(const std::vector<fit::FrequencyFit>& fits)
{
    io::CsvTable t(fit_header());
    for (const auto& f : fits) {
        t.row(fit_cells(f.f_hz, f.fit));
    }
    return t.str();
}

inline std::string kappa_csv(const std::vector<SeedFits>& fits)
{
    auto header = fit_header();
    header.insert(header.begin(), "seed");
    io::CsvTable t(header);
    for (const auto& sf : fits) {
        auto cells = fit_cells(sf.kappa_free.f_hz, sf.kappa_free.fit);
        cells.insert(cells.begin(), std::to_string(sf.seed));
        t.row(cells);
    }
    return t.str();
}

/// Relative path -> content of every CSV the campaign produces.
inline std::map<std::string, std::string> render_tree(const CampaignResult& r)
{
    std::map<std::string, std::string> files;
    files["eit/summary.csv"] = eit_summary_csv(r.eit);
    for (const auto& p : r.eit) {
        files["eit/spectrum_" + length_tag(p.l_mm) + ".csv"] = eit_spectrum_csv(p.spectrum);
    }
    files["atcal/calibration.csv"] = atcal_csv(r.atcal);
    files["sensitivity/ideal.csv"] = sensitivity_csv(r.ideal);
    files["sensitivity/nonideal.csv"] = sensitivity_csv(r.nonideal);
    files["scaling/summary.csv"] = scaling_csv(r.scaling);
    for (std::size_t k = 0; k < r.runs.size(); ++k) {
        for (std::size_t s = 0; s < r.runs[k].size(); ++s) {
            const auto& slot = r.runs[k][s];
            const std::string tag =
                length_tag(r.eit[k].l_mm) + "_seed" + std::to_string(r.seeds[s]) + ".csv";
            files["nps/p_na_" + tag] = nps_csv(slot.p_na);
            files["nps/p_np_" + tag] = nps_csv(slot.p_np);
            files["nps/p_ni_" + tag] = nps_csv(slot.p_ni);
        }
    }
    for (const auto& sf : r.seed_fits) {
        files["fits/seed" + std::to_string(sf.seed) + ".csv"] = fits_csv(sf.fits);
    }
    if (!r.seed_fits.empty()) {
        files["fits/kappa_free.csv"] = kappa_csv(r.seed_fits);
    }
    return files;
}

inline std::string manifest_json(const CampaignConfig& cfg, const CampaignResult& r,
                                 const std::map<std::string, std::string>& files)
{
    nlohmann::ordered_json m;
    m["tool"] = "superhet";
    m["version"] = SUPERHET_VERSION;
    m["config_hash"] = io::hex64(io::fnv1a64(config::dump_config(cfg)));
    m["hash_algorithm"] = "fnv1a64";
    m["seeds"] = r.seeds;
    auto list = nlohmann::ordered_json::array();
    for (const auto& [path, content] : files) {
        list.push_back({{"path", path}, {"hash", io::hex64(io::fnv1a64(content))},
                        {"bytes", content.size()}});
    }
    m["files"] = list;
    return m.dump(2) + "\n";
}

/// Writes the CSV tree, the effective config and the manifest under `dir`.
inline void write_tree(const std::filesystem::path& dir, const CampaignConfig& cfg,
                       const CampaignResult& r)
{
    auto files = render_tree(r);
    files["config.ini"] = config::dump_config(cfg);
    for (const auto& [path, content] : files) {
        io::write_file(dir / path, content);
    }
    io::write_file(dir / "manifest.json", manifest_json(cfg, r, files));
}

} // namespace superhet::campaign

#endif
