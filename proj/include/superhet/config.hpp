#ifndef SUPERHET_CONFIG_HPP
#define SUPERHET_CONFIG_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "superhet/atom_optics.hpp"
#include "superhet/constants.hpp"
#include "superhet/errors.hpp"
#include "superhet/io.hpp"
#include "superhet/receiver_model.hpp"
#include "superhet/synth_and_fit.hpp"
#include "superhet/transit_noise.hpp"

/// Campaign configuration in a sectioned key = value text format:
///
///   # comment
///   [transit]
///   omega = 1e-3
///   [ladder]
///   omega_c = 0.26 MHz_x2pi
///   [budget]
///   shot_floor_dbm = off
///   probe_laser_dbm = 10000:-125, 100000:-130
///
/// Every key is optional; missing keys keep their defaults. Angular
/// frequencies are written as "<value> MHz_x2pi" (kHz_x2pi and Hz_x2pi work
/// too) or as a bare number in rad/s.
namespace superhet::config {

struct CampaignConfig {
    std::vector<double> lengths_mm = default_lengths();
    double f_start_hz = 10e3;
    double f_stop_hz = 100e3;
    double f_step_hz = 1.0;
    double section_hz = 1e3;
    double f_scaling_hz = 55e3;
    int seeds = 5;
    std::uint64_t seed = 1;
    long n_avg = 1000;
    std::optional<double> kappa_fixed = 0.5;  ///< nullopt fits kappa freely
    fit::FitDomain fit_domain = fit::FitDomain::linear;
    double eit_span_hz = 30e6;
    double eit_step_hz = 10e3;
    std::string out_dir = "superhet_out";

    transit::TransitParams transit;
    optics::LadderConfig ladder;
    double atcal_gamma_r = constants::two_pi * 0.5e6;  ///< narrow line used only for A-T
    optics::CellGeometry cell;
    receiver::NoiseBudget budget;  ///< budget.transit is taken from `transit`
    receiver::SuperhetConfig receiver;
    double kappa_cal = 1e-4;  ///< conversion_gain calibration constant

    static std::vector<double> default_lengths()
    {
        std::vector<double> out;
        for (int i = 0; i < 9; ++i) {
            out.push_back(7.28 + 9.0 * i / 8.0);
        }
        return out;
    }

    /// Budget with this config's transit parameters at length l (m).
    receiver::NoiseBudget noise_budget(double l_m) const
    {
        receiver::NoiseBudget b = budget;
        b.transit = transit;
        b.transit.l = l_m;
        return b;
    }

    optics::LadderConfig ladder_at(double l_mm) const
    {
        optics::LadderConfig c = ladder;
        c.l_mm = l_mm;
        return c;
    }

    optics::LadderConfig atcal_ladder() const
    {
        optics::LadderConfig c = ladder;
        c.gamma_r = atcal_gamma_r;
        c.omega_mw = receiver.omega_local;
        return c;
    }

    void validate() const;
};

namespace detail {

inline void require(bool ok, const char* field, const std::string& what)
{
    if (!ok) {
        throw ConfigError(what, field);
    }
}

inline bool positive(double v) { return v > 0.0 && std::isfinite(v); }

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline double number(const std::string& v)
{
    const auto n = io::parse_number(v);
    if (!n || !std::isfinite(*n)) {
        throw ConfigError("expected a number, got '" + v + "'");
    }
    return *n;
}

inline double angular(const std::string& v)
{
    static const std::pair<const char*, double> units[] = {
        {"MHz_x2pi", 1e6}, {"kHz_x2pi", 1e3}, {"Hz_x2pi", 1.0}};
    for (const auto& [suffix, scale] : units) {
        const std::string_view sv(v);
        const std::string_view sf(suffix);
        if (sv.size() > sf.size() && sv.substr(sv.size() - sf.size()) == sf) {
            return constants::two_pi * scale * number(trim(sv.substr(0, sv.size() - sf.size())));
        }
    }
    return number(v);
}

inline std::string angular_text(double rad_s)
{
    return io::format_number(rad_s / (constants::two_pi * 1e6)) + " MHz_x2pi";
}

inline bool is_off(const std::string& v) { return v == "off" || v == "none"; }

inline bool boolean(const std::string& v)
{
    if (v == "on" || v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "off" || v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("expected on/off, got '" + v + "'");
}

inline std::vector<double> number_list(const std::string& v)
{
    std::vector<double> out;
    for (const auto& item : split(v, ',')) {
        out.push_back(number(item));
    }
    return out;
}

inline std::optional<receiver::FrequencyTable> table(const std::string& v)
{
    if (is_off(v)) {
        return std::nullopt;
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) {
            throw ConfigError("table entries must look like 'f_hz:dBm', got '" + item + "'");
        }
        pts.emplace_back(number(parts[0]), number(parts[1]));
    }
    try {
        return receiver::FrequencyTable(std::move(pts));
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

inline std::string table_text(const std::optional<receiver::FrequencyTable>& t)
{
    if (!t) {
        return "off";
    }
    std::string out;
    for (const auto& [f, dbm] : t->points()) {
        if (!out.empty()) {
            out += ", ";
        }
        out += io::format_number(f) + ":" + io::format_number(dbm);
    }
    return out;
}

/// Key table: setter from text and getter to text, per "section.key".
struct Field {
    std::function<void(CampaignConfig&, const std::string&)> set;
    std::function<std::string(const CampaignConfig&)> get;
};

inline const std::vector<std::pair<std::string, Field>>& fields()
{
    using C = CampaignConfig;
    using io::format_number;
    auto num = [](double C::*member) {
        return Field{[member](C& c, const std::string& v) { c.*member = number(v); },
                     [member](const C& c) { return format_number(c.*member); }};
    };
    auto ang = [](auto getter) {
        return Field{[getter](C& c, const std::string& v) { getter(c) = angular(v); },
                     [getter](const C& c) { return angular_text(getter(const_cast<C&>(c))); }};
    };
    auto real = [](auto getter) {
        return Field{[getter](C& c, const std::string& v) { getter(c) = number(v); },
                     [getter](const C& c) { return format_number(getter(const_cast<C&>(c))); }};
    };

    static const std::vector<std::pair<std::string, Field>> table_ = {
        {"campaign.lengths_mm",
         {[](C& c, const std::string& v) { c.lengths_mm = number_list(v); },
          [](const C& c) {
              std::string out;
              for (double l : c.lengths_mm) {
                  out += (out.empty() ? "" : ", ") + format_number(l);
              }
              return out;
          }}},
        {"campaign.f_start_hz", num(&C::f_start_hz)},
        {"campaign.f_stop_hz", num(&C::f_stop_hz)},
        {"campaign.f_step_hz", num(&C::f_step_hz)},
        {"campaign.section_hz", num(&C::section_hz)},
        {"campaign.f_scaling_hz", num(&C::f_scaling_hz)},
        {"campaign.seeds",
         {[](C& c, const std::string& v) {
              const double n = number(v);
              if (n != std::floor(n) || std::abs(n) > 1e6) {
                  throw ConfigError("expected an integer, got '" + v + "'");
              }
              c.seeds = static_cast<int>(n);
          },
          [](const C& c) { return std::to_string(c.seeds); }}},
        {"campaign.seed",
         {[](C& c, const std::string& v) {
              std::uint64_t s = 0;
              const auto res = std::from_chars(v.data(), v.data() + v.size(), s);
              if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
                  throw ConfigError("expected a non-negative integer, got '" + v + "'");
              }
              c.seed = s;
          },
          [](const C& c) { return std::to_string(c.seed); }}},
        {"campaign.n_avg",
         {[](C& c, const std::string& v) {
              const double n = number(v);
              if (n != std::floor(n) || std::abs(n) > 1e12) {
                  throw ConfigError("expected an integer, got '" + v + "'");
              }
              c.n_avg = static_cast<long>(n);
          },
          [](const C& c) { return std::to_string(c.n_avg); }}},
        {"campaign.kappa",
         {[](C& c, const std::string& v) {
              c.kappa_fixed = (v == "free") ? std::nullopt : std::optional<double>(number(v));
          },
          [](const C& c) { return c.kappa_fixed ? format_number(*c.kappa_fixed) : std::string("free"); }}},
        {"campaign.fit_domain",
         {[](C& c, const std::string& v) {
              if (v == "linear") {
                  c.fit_domain = fit::FitDomain::linear;
              } else if (v == "db") {
                  c.fit_domain = fit::FitDomain::decibel;
              } else {
                  throw ConfigError("fit_domain must be 'linear' or 'db', got '" + v + "'");
              }
          },
          [](const C& c) {
              return std::string(c.fit_domain == fit::FitDomain::linear ? "linear" : "db");
          }}},
        {"campaign.eit_span_hz", num(&C::eit_span_hz)},
        {"campaign.eit_step_hz", num(&C::eit_step_hz)},
        {"campaign.out",
         {[](C& c, const std::string& v) { c.out_dir = v; },
          [](const C& c) { return c.out_dir; }}},

        {"transit.diffusion", real([](C& c) -> double& { return c.transit.diffusion; })},
        {"transit.omega", real([](C& c) -> double& { return c.transit.omega; })},
        {"transit.i0", real([](C& c) -> double& { return c.transit.i0; })},
        {"transit.n_a", real([](C& c) -> double& { return c.transit.n_a; })},
        {"transit.sigma0", real([](C& c) -> double& { return c.transit.sigma0; })},

        {"ladder.omega_p", ang([](C& c) -> double& { return c.ladder.omega_p; })},
        {"ladder.omega_c", ang([](C& c) -> double& { return c.ladder.omega_c; })},
        {"ladder.gamma_e", ang([](C& c) -> double& { return c.ladder.gamma_e; })},
        {"ladder.gamma_r", ang([](C& c) -> double& { return c.ladder.gamma_r; })},
        {"ladder.delta_p", ang([](C& c) -> double& { return c.ladder.delta_p; })},
        {"ladder.delta_c", ang([](C& c) -> double& { return c.ladder.delta_c; })},
        {"ladder.od_per_mm", real([](C& c) -> double& { return c.ladder.od_per_mm; })},

        {"atcal.gamma_r", ang([](C& c) -> double& { return c.atcal_gamma_r; })},

        {"cell.lambda_mw", real([](C& c) -> double& { return c.cell.lambda_mw; })},
        {"cell.reflection_r", real([](C& c) -> double& { return c.cell.reflection_r; })},
        {"cell.l_ref", real([](C& c) -> double& { return c.cell.l; })},
        {"cell.z0", real([](C& c) -> double& { return c.cell.z0; })},

        {"budget.transit",
         {[](C& c, const std::string& v) { c.budget.transit_enabled = boolean(v); },
          [](const C& c) { return std::string(c.budget.transit_enabled ? "on" : "off"); }}},
        {"budget.projection_psd_per_atom",
         real([](C& c) -> double& { return c.budget.projection_psd_per_atom; })},
        {"budget.probe_laser_dbm",
         {[](C& c, const std::string& v) { c.budget.probe_laser_dbm = table(v); },
          [](const C& c) { return table_text(c.budget.probe_laser_dbm); }}},
        {"budget.shot_floor_dbm",
         {[](C& c, const std::string& v) {
              c.budget.shot_floor_dbm = is_off(v) ? std::nullopt : std::optional<double>(number(v));
          },
          [](const C& c) {
              return c.budget.shot_floor_dbm ? format_number(*c.budget.shot_floor_dbm)
                                             : std::string("off");
          }}},
        {"budget.residual_dbm",
         {[](C& c, const std::string& v) { c.budget.residual_dbm = table(v); },
          [](const C& c) { return table_text(c.budget.residual_dbm); }}},

        {"receiver.omega_local", ang([](C& c) -> double& { return c.receiver.omega_local; })},
        {"receiver.omega_sig", ang([](C& c) -> double& { return c.receiver.omega_sig; })},
        {"receiver.f_readout", real([](C& c) -> double& { return c.receiver.f_readout; })},
        {"receiver.dbm_cal", real([](C& c) -> double& { return c.receiver.dbm_cal; })},
        {"receiver.rbw_hz", real([](C& c) -> double& { return c.receiver.rbw_hz; })},
        {"receiver.kappa_cal", num(&C::kappa_cal)},
    };
    return table_;
}

inline const Field* find_field(const std::string& key)
{
    for (const auto& [name, f] : fields()) {
        if (name == key) {
            return &f;
        }
    }
    return nullptr;
}

} // namespace detail

inline void CampaignConfig::validate() const
{
    using detail::positive;
    using detail::require;
    require(!lengths_mm.empty(), "campaign.lengths_mm", "sweep must not be empty");
    for (std::size_t i = 0; i < lengths_mm.size(); ++i) {
        require(positive(lengths_mm[i]), "campaign.lengths_mm", "lengths must be > 0");
        require(i == 0 || lengths_mm[i] > lengths_mm[i - 1], "campaign.lengths_mm",
                "lengths must be strictly increasing");
    }
    require(positive(f_start_hz), "campaign.f_start_hz", "must be > 0");
    require(f_stop_hz > f_start_hz && std::isfinite(f_stop_hz), "campaign.f_stop_hz",
            "must exceed f_start_hz");
    require(positive(f_step_hz), "campaign.f_step_hz", "must be > 0");
    require(positive(section_hz) && section_hz >= f_step_hz, "campaign.section_hz",
            "must be >= f_step_hz");
    require(f_stop_hz - f_start_hz >= section_hz, "campaign.section_hz",
            "frequency span is shorter than one section");
    require(positive(f_scaling_hz), "campaign.f_scaling_hz", "must be > 0");
    require(seeds >= 1, "campaign.seeds", "must be >= 1");
    require(n_avg >= 1, "campaign.n_avg", "must be >= 1");
    if (kappa_fixed) {
        require(*kappa_fixed > fit::kappa_lower && *kappa_fixed < fit::kappa_upper,
                "campaign.kappa", "must lie in (0, 1.5) or be 'free'");
    }
    require(positive(eit_span_hz) && eit_span_hz >= optics::baseline_detuning_hz,
            "campaign.eit_span_hz", "must be >= 25 MHz so the baseline is sampled");
    require(positive(eit_step_hz) && eit_step_hz < eit_span_hz, "campaign.eit_step_hz",
            "must be > 0 and below the span");

    require(positive(transit.diffusion), "transit.diffusion", "must be > 0");
    require(positive(transit.omega), "transit.omega", "beam radius must be > 0");
    require(positive(transit.i0), "transit.i0", "must be > 0");
    require(transit.n_a >= 0.0 && std::isfinite(transit.n_a), "transit.n_a", "must be >= 0");
    require(positive(transit.sigma0), "transit.sigma0", "must be > 0");

    require(std::isfinite(ladder.omega_p), "ladder.omega_p", "must be finite");
    require(std::isfinite(ladder.omega_c), "ladder.omega_c", "must be finite");
    require(positive(ladder.gamma_e), "ladder.gamma_e", "must be > 0");
    require(positive(ladder.gamma_r), "ladder.gamma_r", "must be > 0");
    require(std::isfinite(ladder.delta_p), "ladder.delta_p", "must be finite");
    require(std::isfinite(ladder.delta_c), "ladder.delta_c", "must be finite");
    require(ladder.od_per_mm >= 0.0 && std::isfinite(ladder.od_per_mm), "ladder.od_per_mm",
            "must be >= 0");
    require(positive(atcal_gamma_r), "atcal.gamma_r", "must be > 0");

    require(positive(cell.lambda_mw), "cell.lambda_mw", "must be > 0");
    require(cell.reflection_r >= 0.0 && cell.reflection_r < 1.0, "cell.reflection_r",
            "must lie in [0, 1)");
    require(positive(cell.l), "cell.l_ref", "must be > 0");
    require(std::isfinite(cell.z0), "cell.z0", "must be finite");

    require(budget.projection_psd_per_atom >= 0.0 && std::isfinite(budget.projection_psd_per_atom),
            "budget.projection_psd_per_atom", "must be >= 0");

    require(std::isfinite(receiver.omega_local) && receiver.omega_local > 0.0,
            "receiver.omega_local", "must be > 0");
    require(std::isfinite(receiver.omega_sig) && receiver.omega_sig >= 0.0, "receiver.omega_sig",
            "must be >= 0");
    require(positive(receiver.f_readout), "receiver.f_readout", "must be > 0");
    require(std::isfinite(receiver.dbm_cal), "receiver.dbm_cal", "must be finite");
    require(positive(receiver.rbw_hz), "receiver.rbw_hz", "must be > 0");
    require(kappa_cal >= 0.0 && std::isfinite(kappa_cal), "receiver.kappa_cal", "must be >= 0");
}

/// Parses the text of a config file. Unknown sections or keys, malformed
/// lines and bad values raise ConfigError carrying the line number; the
/// final validation names the offending field.
inline CampaignConfig parse_config(std::string_view text)
{
    CampaignConfig cfg;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        const std::string_view raw =
            text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;

        std::string line = detail::trim(raw.substr(0, raw.find_first_of("#;")));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("malformed section header", {}, line_no);
            }
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            static const char* known[] = {"campaign", "transit", "ladder", "atcal",
                                          "cell",     "budget",  "receiver"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
                throw ConfigError("unknown section [" + section + "]", {}, line_no);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected 'key = value'", {}, line_no);
        }
        if (section.empty()) {
            throw ConfigError("key outside of any section", {}, line_no);
        }
        const std::string key = section + "." + detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        const detail::Field* field = detail::find_field(key);
        if (!field) {
            throw ConfigError("unknown key", key, line_no);
        }
        try {
            field->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(e.what(), key, line_no);
        }
    }
    cfg.validate();
    return cfg;
}

inline CampaignConfig load_config(const std::filesystem::path& path)
{
    return parse_config(io::read_file(path));
}

/// Every key, grouped by section, in a form parse_config reads back.
inline std::string dump_config(const CampaignConfig& cfg)
{
    std::string out;
    std::string section;
    for (const auto& [name, field] : detail::fields()) {
        const std::string sec = name.substr(0, name.find('.'));
        if (sec != section) {
            out += (out.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += name.substr(name.find('.') + 1) + " = " + field.get(cfg) + "\n";
    }
    return out;
}

} // namespace superhet::config

#endif
