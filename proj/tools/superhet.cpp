// Command-line front end: one subcommand per pipeline stage plus `campaign`.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "superhet/campaign.hpp"
#include "superhet/config.hpp"
#include "superhet/errors.hpp"
#include "superhet/io.hpp"
#include "superhet/specfun.hpp"
#include "superhet/synth_and_fit.hpp"
#include "superhet/transit_noise.hpp"

namespace {

using namespace superhet;
namespace fs = std::filesystem;

enum Exit { ok = 0, config_error = 2, numerical_error = 3, io_error = 4 };

struct Globals {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string format = "csv";
};

config::CampaignConfig load(const Globals& g)
{
    config::CampaignConfig cfg =
        g.config_path.empty() ? config::CampaignConfig{} : config::load_config(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
    }
    return cfg;
}

/// Writes `csv` to <out>/<name> when --out is given, else to stdout.
void emit(const Globals& g, const std::string& name, const std::string& csv)
{
    if (g.out.empty()) {
        std::cout << csv;
        return;
    }
    const fs::path path = fs::path(g.out) / name;
    io::write_file(path, csv);
    std::cerr << "wrote " << path.string() << "\n";
}

std::vector<double> make_grid(double start, double stop, int points, bool log)
{
    if (points < 1) {
        throw DomainError("grid needs at least one point");
    }
    if (log && !(start > 0.0 && stop > 0.0)) {
        throw DomainError("log grid needs positive end points");
    }
    std::vector<double> out;
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        out.push_back(log ? start * std::pow(stop / start, t) : start + t * (stop - start));
    }
    return out;
}

std::string format_cell(const std::optional<double>& v) { return io::format_optional(v); }

int run(int argc, char** argv)
{
    CLI::App app{"Rydberg atomic superhet receiver simulator"};
    app.set_version_flag("--version", SUPERHET_VERSION);
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config_path, "campaign config file")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "output directory");
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv"}));

    // specfun
    double phi_start = 1e-3, phi_stop = 1e3;
    int phi_points = 61;
    bool phi_linear = false;
    auto* specfun_cmd = app.add_subcommand("specfun", "Si and Ci on a grid (phi, si, ci)");
    specfun_cmd->add_option("--start", phi_start);
    specfun_cmd->add_option("--stop", phi_stop);
    specfun_cmd->add_option("--points", phi_points);
    specfun_cmd->add_flag("--linear", phi_linear, "linear instead of log spacing");

    // psd
    double f_start = 1e3, f_stop = 1e6;
    int f_points = 31;
    bool f_linear = false, oracle = false;
    std::optional<double> diffusion, omega, i0, n_a, l_m, sigma0;
    auto* psd_cmd = app.add_subcommand("psd", "transit-noise PSD and its asymptotes");
    psd_cmd->add_option("--start", f_start, "first read-out frequency, Hz");
    psd_cmd->add_option("--stop", f_stop, "last read-out frequency, Hz");
    psd_cmd->add_option("--points", f_points);
    psd_cmd->add_flag("--linear", f_linear);
    psd_cmd->add_flag("--oracle", oracle, "also evaluate the quadrature oracle");
    psd_cmd->add_option("--diffusion", diffusion, "m^2/s");
    psd_cmd->add_option("--omega", omega, "beam radius, m");
    psd_cmd->add_option("--i0", i0, "W/m^2");
    psd_cmd->add_option("--n-a", n_a, "number density, m^-3");
    psd_cmd->add_option("--l", l_m, "interaction length, m");
    psd_cmd->add_option("--sigma0", sigma0, "cross-section, m^2");

    // eit
    double eit_l = 11.78;
    auto* eit_cmd = app.add_subcommand("eit", "EIT transmission spectrum (detuning_hz, transmission)");
    eit_cmd->add_option("--l-mm", eit_l, "interaction length, mm");

    auto* atcal_cmd = app.add_subcommand("atcal", "A-T splitting and power correction per length");

    // synth
    double synth_l = 11.78;
    std::string kind = "na";
    bool sectioned = false;
    auto* synth_cmd = app.add_subcommand("synth", "one synthetic noise power spectrum");
    synth_cmd->add_option("--l-mm", synth_l);
    synth_cmd->add_option("--kind", kind, "na (with atoms), np (probe only) or ni (na - np)")
        ->check(CLI::IsMember({"na", "np", "ni"}));
    synth_cmd->add_flag("--sectioned", sectioned, "average into sections");

    // fit
    std::string kappa_text;
    std::string domain_text;
    auto* fit_cmd = app.add_subcommand("fit", "power-law fits vs frequency for one seed");
    fit_cmd->add_option("--kappa", kappa_text, "fixed kappa or 'free'");
    fit_cmd->add_option("--domain", domain_text, "linear or db")
        ->check(CLI::IsMember({"linear", "db"}));

    auto* scaling_cmd = app.add_subcommand("scaling", "dB-dB slopes of signal, noise and SNR");

    std::string case_text = "nonideal";
    auto* sens_cmd = app.add_subcommand("sensitivity", "signal, noise, SNR per length");
    sens_cmd->add_option("--case", case_text)->check(CLI::IsMember({"ideal", "nonideal"}));

    auto* campaign_cmd = app.add_subcommand("campaign", "full campaign, writes a CSV tree");

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    if (specfun_cmd->parsed()) {
        io::CsvTable t({"phi", "si", "ci"});
        for (double phi : make_grid(phi_start, phi_stop, phi_points, !phi_linear)) {
            const auto s = specfun::sici(phi);
            t.row({io::format_number(phi), io::format_number(s.si),
                   phi > 0.0 ? io::format_number(s.ci) : ""});
        }
        emit(g, "specfun.csv", t.str());
        return ok;
    }

    const config::CampaignConfig cfg = load(g);

    if (psd_cmd->parsed()) {
        transit::TransitParams p = cfg.transit;
        p.diffusion = diffusion.value_or(p.diffusion);
        p.omega = omega.value_or(p.omega);
        p.i0 = i0.value_or(p.i0);
        p.n_a = n_a.value_or(p.n_a);
        p.l = l_m.value_or(p.l);
        p.sigma0 = sigma0.value_or(p.sigma0);
        p.validate();
        io::CsvTable t({"f_hz", "phi", "psd_closed", "psd_quadrature", "inband_asym", "outband_asym"});
        for (double f : make_grid(f_start, f_stop, f_points, !f_linear)) {
            std::optional<double> quad;
            if (oracle) {
                quad = transit::transit_psd_quadrature(f, p).value;
            }
            t.row({io::format_number(f), io::format_number(transit::phi_of(f, p)),
                   io::format_number(transit::transit_psd_closed(f, p)), format_cell(quad),
                   io::format_number(transit::in_band_amplitude(f, p).amplitude),
                   io::format_number(transit::out_of_band_amplitude(f, p).amplitude)});
        }
        emit(g, "psd.csv", t.str());
        return ok;
    }

    if (eit_cmd->parsed()) {
        const auto point = campaign::eit_point(cfg, eit_l);
        std::cerr << "a_eit=" << io::format_number(point.a_eit)
                  << " fwhm_hz=" << io::format_number(point.fwhm_hz) << "\n";
        emit(g, "eit_" + campaign::length_tag(eit_l) + ".csv",
             campaign::eit_spectrum_csv(point.spectrum));
        return ok;
    }

    if (atcal_cmd->parsed()) {
        std::vector<campaign::AtcalPoint> rows;
        for (double l : cfg.lengths_mm) {
            rows.push_back(campaign::atcal_point(cfg, l));
        }
        emit(g, "calibration.csv", campaign::atcal_csv(rows));
        return ok;
    }

    if (synth_cmd->parsed()) {
        const auto grid = fit::frequency_grid(cfg.f_start_hz, cfg.f_stop_hz, cfg.f_step_hz);
        const double rbw = cfg.receiver.rbw_hz;
        const auto budget = cfg.noise_budget(synth_l * 1e-3);
        const auto na = fit::synthesize_nps(budget, grid, rbw, cfg.receiver.dbm_cal, cfg.n_avg,
                                            campaign::mix_seed(cfg.seed, 0, 0));
        const auto np = fit::synthesize_nps(budget.probe_reference(), grid, rbw,
                                            cfg.receiver.dbm_cal, cfg.n_avg,
                                            campaign::mix_seed(cfg.seed, 0, 1));
        fit::NoiseSpectrum s = kind == "na" ? na : kind == "np" ? np : fit::subtract_probe_noise(na, np);
        if (sectioned) {
            auto sec = fit::section_average(s, cfg.section_hz);
            for (double c : sec.dropped_centers) {
                std::cerr << "warning: section at " << io::format_number(c)
                          << " Hz has no unflagged bins, dropped\n";
            }
            s = std::move(sec.spectrum);
        }
        emit(g, "nps_" + kind + "_" + campaign::length_tag(synth_l) + ".csv", campaign::nps_csv(s));
        return ok;
    }

    if (fit_cmd->parsed()) {
        config::CampaignConfig c = cfg;
        c.seeds = 1;
        if (!kappa_text.empty()) {
            config::detail::find_field("campaign.kappa")->set(c, kappa_text);
        }
        if (!domain_text.empty()) {
            config::detail::find_field("campaign.fit_domain")->set(c, domain_text);
        }
        c.validate();
        campaign::CampaignResult r;
        campaign::run_noise(c, r);
        emit(g, "fits_seed" + std::to_string(c.seed) + ".csv",
             campaign::fits_csv(r.seed_fits.front().fits));
        return ok;
    }

    if (scaling_cmd->parsed() || sens_cmd->parsed()) {
        campaign::CampaignResult r;
        campaign::run_sweeps(cfg, r);
        if (scaling_cmd->parsed()) {
            emit(g, "summary.csv", campaign::scaling_csv(r.scaling));
        } else {
            emit(g, case_text + ".csv",
                 campaign::sensitivity_csv(case_text == "ideal" ? r.ideal : r.nonideal));
        }
        return ok;
    }

    if (campaign_cmd->parsed()) {
        const fs::path dir = g.out.empty() ? fs::path(cfg.out_dir) : fs::path(g.out);
        std::cerr << "campaign: " << cfg.lengths_mm.size() << " lengths x " << cfg.seeds
                  << " seeds, " << campaign::worker_count() << " workers\n";
        const auto r = campaign::run_campaign(cfg);
        campaign::write_tree(dir, cfg, r);
        for (const auto& row : r.scaling) {
            std::cerr << row.quantity << " " << row.case_name << " "
                      << fit::regime_name(row.result.regime) << " slope "
                      << io::format_number(row.result.slope) << "\n";
        }
        std::cerr << "wrote " << dir.string() << "\n";
        return ok;
    }
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const superhet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const superhet::DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return config_error;
    } catch (const superhet::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return io_error;
    } catch (const superhet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numerical_error;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numerical_error;
    }
}
