#pragma once

// Command-line front end: design, fit, photon, tls-fit, synth and report.
//
// Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 a fit did not
// converge (results are still written, flagged converged = false).
// Text on stdout is `key = value` with 6 significant digits; --out files
// and report bundles are JSON at full precision.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cpwres/cpw_design.hpp"
#include "cpwres/errors.hpp"
#include "cpwres/io.hpp"
#include "cpwres/loss_models.hpp"
#include "cpwres/notch_fit.hpp"
#include "cpwres/photon_calib.hpp"
#include "cpwres/s21_model.hpp"

namespace cpwres::cli {

using io::json;

enum ExitCode : int { kSuccess = 0, kUsage = 1, kInput = 2, kNotConverged = 3 };

// ------------------------------------------------------------ helpers

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

class KeyValueWriter {
public:
    explicit KeyValueWriter(std::ostream& out) : out_(out) {}

    void section(const std::string& name) { out_ << '[' << name << "]\n"; }
    void put(const std::string& key, double v) { out_ << key << " = " << fmt(v) << '\n'; }
    void put(const std::string& key, const std::optional<double>& v) {
        if (v) put(key, *v);
    }
    void put(const std::string& key, const std::string& v) { out_ << key << " = " << v << '\n'; }
    void put(const std::string& key, const char* v) { put(key, std::string(v)); }
    void put(const std::string& key, bool v) { put(key, v ? "true" : "false"); }
    void put(const std::string& key, int v) { out_ << key << " = " << v << '\n'; }

private:
    std::ostream& out_;
};

/// Runs fn(0..n-1) on up to `jobs` threads and returns the results in index
/// order. An exception thrown for index j is rethrown by get(j) only.
template <typename T>
class OrderedResults {
public:
    OrderedResults(std::size_t n, unsigned jobs, const std::function<T(std::size_t)>& fn) : slots_(n) {
        jobs = std::max(1u, jobs);
        for (std::size_t start = 0; start < n; start += jobs) {
            std::vector<std::future<T>> wave;
            const std::size_t stop = std::min(n, start + jobs);
            for (std::size_t j = start; j < stop; ++j) wave.push_back(std::async(std::launch::async, fn, j));
            for (std::size_t j = start; j < stop; ++j) {
                try {
                    slots_[j].value = wave[j - start].get();
                } catch (...) {
                    slots_[j].error = std::current_exception();
                }
            }
        }
    }

    std::size_t size() const { return slots_.size(); }
    bool ok(std::size_t j) const { return !slots_[j].error; }
    const T& get(std::size_t j) const {
        if (slots_[j].error) std::rethrow_exception(slots_[j].error);
        return *slots_[j].value;
    }

private:
    struct Slot {
        std::optional<T> value;
        std::exception_ptr error;
    };
    std::vector<Slot> slots_;
};

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

inline std::string sanitize(const std::string& label) {
    std::string out;
    for (unsigned char c : label) out += (std::isalnum(c) || c == '-' || c == '.') ? static_cast<char>(c) : '_';
    return out.empty() ? std::string("unlabelled") : out;
}

inline io::TraceFormat format_option(const std::string& name) {
    const auto f = io::trace_format_from_string(name);
    if (!f) throw CLI::ValidationError("--format", "unknown trace format '" + name + "'");
    return *f;
}

}  // namespace detail

// ------------------------------------------------------- fit workflow

struct TraceFit {
    std::string source;
    notch::NotchFitResult result;
};

/// Parses and fits each trace; results keep input order. Parse and fit
/// failures are rethrown (for the first failing trace in input order) with
/// the path in the message.
inline std::vector<TraceFit> fit_traces(const std::vector<std::filesystem::path>& paths,
                                        const std::vector<io::TraceFormat>& formats, unsigned jobs) {
    detail::OrderedResults<TraceFit> results(paths.size(), jobs, [&](std::size_t j) {
        const auto trace = io::parse_trace_file(paths[j], formats[j]);
        try {
            return TraceFit{paths[j].string(), notch::fit_notch(trace)};
        } catch (const Error& e) {
            throw Error(paths[j].string() + ": cannot fit: " + e.what());
        }
    });
    std::vector<TraceFit> out;
    for (std::size_t j = 0; j < results.size(); ++j) out.push_back(results.get(j));
    return out;
}

inline json fit_record(const TraceFit& fit) {
    json j;
    j["source"] = fit.source;
    const json body = io::to_json(fit.result);
    for (const auto& [key, value] : body.items()) j[key] = value;
    return j;
}

inline void print_fit(detail::KeyValueWriter& kv, const TraceFit& fit) {
    const auto& r = fit.result;
    kv.section(fit.source);
    kv.put("fr_hz", r.params.fr_hz);
    kv.put("ql", r.params.ql);
    kv.put("qc_mag", r.params.qc_mag);
    kv.put("phi_rad", r.params.phi);
    kv.put("a", r.params.a);
    kv.put("alpha_rad", r.params.alpha);
    kv.put("tau_s", r.params.tau_s);
    kv.put("qi", r.qi);
    if (r.uncertainties) {
        kv.put("fr_hz_sigma", r.uncertainties->fr_hz);
        kv.put("ql_sigma", r.uncertainties->ql);
        kv.put("qc_mag_sigma", r.uncertainties->qc_mag);
        kv.put("qi_sigma", r.uncertainties->qi);
    }
    kv.put("coupling_coefficient", r.coupling_coefficient);
    kv.put("coupling_regime", notch::to_string(notch::coupling_diagnostics(r).regime));
    kv.put("converged", r.diagnostics.converged);
}

inline void print_design(detail::KeyValueWriter& kv, const cpw::TransmissionLineParams& p) {
    kv.put("eps_sub", p.eps_sub);
    kv.put("eps_eff", p.eps_eff);
    kv.put("lg_uh_per_m", p.lg_uh_per_m);
    kv.put("cg_nf_per_m", p.cg_nf_per_m);
    kv.put("length_um", p.length_um);
    kv.put("f_design_ghz", p.f_design_ghz);
    kv.put("f_measured_ghz", p.f_measured_ghz);
    kv.put("qi", p.qi);
    kv.put("lk_uh_per_m", p.lk_uh_per_m);
    kv.put("z_eff_ohm", p.z_eff_ohm);
    kv.put("r_ohm_per_m", p.r_ohm_per_m);
}

inline void print_photon(detail::KeyValueWriter& kv, const photon::PowerContext& power, const photon::PhotonCalc& c) {
    kv.put("p_in_dbm", power.p_in_dbm);
    kv.put("p_in_w", power.p_in_w);
    kv.put("s21_res_power_ratio", c.s21_res_power_ratio);
    kv.put("s11_res_power_ratio", c.s11_res_power_ratio);
    kv.put("p_loss_w", c.p_loss_w);
    kv.put("n_ph", c.n_ph);
}

inline void print_tls(detail::KeyValueWriter& kv, const loss::TlsFitResult& r) {
    const auto sigma = r.sigma;
    kv.put("q_tls0", r.params.q_tls0);
    if (sigma) kv.put("q_tls0_sigma", sigma->q_tls0);
    kv.put("n_c", r.params.n_c);
    if (sigma) kv.put("n_c_sigma", sigma->n_c);
    kv.put("beta", r.params.beta);
    if (sigma) kv.put("beta_sigma", sigma->beta);
    kv.put("q0", r.params.q0);
    if (sigma) kv.put("q0_sigma", sigma->q0);
    kv.put("converged", r.converged);
    kv.put("ill_conditioned", r.ill_conditioned);
}

inline photon::PhotonCalc photon_for(const notch::NotchFitResult& fit, const photon::PowerContext& power) {
    return photon::photon_number(fit.params.ql, fit.params.qc_mag, fit.qi, fit.params.fr_hz, power.p_in_w);
}

inline json photon_record(const std::optional<std::string>& source, const photon::PowerContext& power,
                          const photon::PhotonCalc& calc) {
    json j;
    if (source) j["source"] = *source;
    j["power"] = io::to_json(power);
    j["photon"] = io::to_json(calc);
    return j;
}

// ------------------------------------------------------------ report

struct Series {
    std::string label;
    std::string x_name;
    std::string y_name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::optional<double>> y_sigma;
};

struct FitRow {
    TraceFit fit;
    std::optional<std::string> resonator_label;
    std::optional<double> temperature_k;
    std::optional<photon::PowerContext> power;
    std::optional<photon::PhotonCalc> photon;
};

struct TlsRow {
    std::string resonator_label;
    std::string observations_file;
    loss::TlsFitResult fit;
};

struct ReportBundle {
    std::vector<cpw::TransmissionLineParams> table1_rows;
    std::vector<FitRow> fit_rows;
    std::vector<TlsRow> tls_rows;
    std::vector<Series> series;
    std::vector<std::string> warnings;
};

inline void write_series_csv(const std::filesystem::path& path, const Series& s) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "x,y,y_sigma\n";
    for (std::size_t j = 0; j < s.x.size(); ++j) {
        out << io::detail::format_double(s.x[j]) << ',' << io::detail::format_double(s.y[j]) << ','
            << (s.y_sigma[j] ? io::detail::format_double(*s.y_sigma[j]) : std::string()) << '\n';
    }
}

inline std::string series_file_name(const Series& s) { return "series_" + detail::sanitize(s.label) + ".csv"; }

inline json to_json(const ReportBundle& b) {
    json j;
    j["table1_rows"] = json::array();
    for (const auto& row : b.table1_rows) j["table1_rows"].push_back(io::to_json(row));
    j["fit_rows"] = json::array();
    for (const auto& row : b.fit_rows) {
        json r = fit_record(row.fit);
        if (row.resonator_label) r["resonator_label"] = *row.resonator_label;
        if (row.temperature_k) r["temperature_k"] = *row.temperature_k;
        if (row.power) r["power"] = io::to_json(*row.power);
        if (row.photon) r["photon"] = io::to_json(*row.photon);
        j["fit_rows"].push_back(std::move(r));
    }
    j["tls_rows"] = json::array();
    for (const auto& row : b.tls_rows) {
        json r;
        r["resonator_label"] = row.resonator_label;
        r["observations_file"] = row.observations_file;
        const json body = io::to_json(row.fit);
        for (const auto& [key, value] : body.items()) r[key] = value;
        j["tls_rows"].push_back(std::move(r));
    }
    j["series"] = json::array();
    for (const auto& s : b.series) {
        j["series"].push_back(json{{"label", s.label},
                                   {"file", series_file_name(s)},
                                   {"x", s.x_name},
                                   {"y", s.y_name},
                                   {"n_points", s.x.size()}});
    }
    j["warnings"] = b.warnings;
    return j;
}

/// Loss observations per resonator label, as used by build_report.
inline std::map<std::string, std::vector<loss::LossObservation>> report_observations(const ReportBundle& bundle) {
    std::map<std::string, std::vector<loss::LossObservation>> groups;
    for (const auto& row : bundle.fit_rows) {
        if (!row.fit.result.diagnostics.converged || !row.photon || !row.temperature_k) continue;
        loss::LossObservation o{row.photon->n_ph, *row.temperature_k, row.fit.result.params.fr_hz,
                                row.fit.result.qi, std::nullopt};
        if (row.fit.result.uncertainties) o.qi_sigma = row.fit.result.uncertainties->qi;
        groups[row.resonator_label.value_or("")].push_back(o);
    }
    return groups;
}

/// Builds the report for a manifest: fits every trace, converts entries
/// with power information to photon numbers, fits the loss model per
/// resonator label and assembles plot-ready series. Uses exactly the same
/// functions as the fit, photon and tls-fit subcommands.
inline ReportBundle build_report(const io::SweepManifest& manifest, const std::vector<io::DesignConfig>& designs,
                                 unsigned jobs) {
    ReportBundle bundle;
    for (const auto& d : designs) bundle.table1_rows.push_back(d.evaluate());

    std::vector<std::filesystem::path> paths;
    std::vector<io::TraceFormat> formats;
    for (const auto& e : manifest.entries) {
        paths.push_back(e.trace_path);
        formats.push_back(e.format);
    }
    const auto fits = fit_traces(paths, formats, jobs);

    for (std::size_t j = 0; j < fits.size(); ++j) {
        const auto& e = manifest.entries[j];
        FitRow row{fits[j], e.resonator_label, e.temperature_k, e.input_power(), std::nullopt};
        if (row.power) {
            try {
                row.photon = photon_for(row.fit.result, *row.power);
            } catch (const Error& ex) {
                bundle.warnings.push_back(row.fit.source + ": no photon number: " + ex.what());
            }
        }
        if (!row.fit.result.diagnostics.converged) {
            bundle.warnings.push_back(row.fit.source + ": fit did not converge; excluded from loss fits");
        }
        bundle.fit_rows.push_back(std::move(row));
    }

    for (const auto& [label, obs] : report_observations(bundle)) {
        const std::string name = detail::sanitize(label);

        // Measured Qi versus photon number, one series per temperature.
        std::map<double, std::vector<const loss::LossObservation*>> by_temperature;
        for (const auto& o : obs) by_temperature[o.temperature_k].push_back(&o);
        for (auto& [t, points] : by_temperature) {
            std::stable_sort(points.begin(), points.end(), [](auto* a, auto* b) { return a->n_ph < b->n_ph; });
            Series s;
            s.label = "qi_vs_nph_" + name + "_" + io::detail::format_double(t * 1e3) + "mK";
            s.x_name = "n_ph";
            s.y_name = "qi";
            for (const auto* o : points) {
                s.x.push_back(o->n_ph);
                s.y.push_back(o->qi_measured);
                s.y_sigma.push_back(o->qi_sigma);
            }
            bundle.series.push_back(std::move(s));
        }

        if (obs.size() < 4) {
            bundle.warnings.push_back("resonator '" + label + "': fewer than 4 observations; no loss-model fit");
            continue;
        }
        TlsRow row{label, "observations_" + name + ".csv", {}};
        try {
            row.fit = loss::fit_tls(obs);
        } catch (const Error& ex) {
            bundle.warnings.push_back("resonator '" + label + "': loss-model fit failed: " + ex.what());
            continue;
        }
        for (const auto& w : row.fit.warnings) bundle.warnings.push_back("resonator '" + label + "': " + w);

        // Fitted model curve per temperature over the measured n_ph range.
        for (const auto& [t, points] : by_temperature) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = 0.0;
            double fr = 0.0;
            for (const auto* o : points) {
                if (o->n_ph > 0.0) lo = std::min(lo, o->n_ph);
                hi = std::max(hi, o->n_ph);
                fr += o->fr_hz / static_cast<double>(points.size());
            }
            if (!std::isfinite(lo) || !(hi > 0.0)) continue;
            Series s;
            s.label = "tls_model_" + name + "_" + io::detail::format_double(t * 1e3) + "mK";
            s.x_name = "n_ph";
            s.y_name = "qi";
            constexpr int samples = 101;
            const double l0 = std::log10(lo);
            const double l1 = std::log10(hi);
            for (int k = 0; k < samples; ++k) {
                const double n = std::pow(10.0, l0 + (l1 - l0) * k / (samples - 1));
                s.x.push_back(n);
                s.y.push_back(loss::total_qi(row.fit.params, n, t, fr));
                s.y_sigma.push_back(std::nullopt);
            }
            bundle.series.push_back(std::move(s));
        }
        bundle.tls_rows.push_back(std::move(row));
    }
    return bundle;
}

/// Writes report.json, one CSV per series and one observation table per
/// fitted resonator into `dir` (created if needed).
inline void write_report(const std::filesystem::path& dir, const ReportBundle& bundle,
                         const std::map<std::string, std::vector<loss::LossObservation>>& observations) {
    std::filesystem::create_directories(dir);
    std::set<std::string> names;
    for (const auto& s : bundle.series) {
        if (!names.insert(series_file_name(s)).second) throw Error("duplicate series label '" + s.label + "'");
        write_series_csv(dir / series_file_name(s), s);
    }
    for (const auto& row : bundle.tls_rows) {
        std::ofstream out(dir / row.observations_file);
        if (!out) throw Error("cannot write '" + (dir / row.observations_file).string() + "'");
        io::write_observations(out, observations.at(row.resonator_label));
    }
    io::write_json_file(dir / "report.json", to_json(bundle));
}

// ------------------------------------------------------------ commands

namespace detail {

inline std::vector<json> load_fit_records(const std::filesystem::path& path, bool& was_array) {
    const json doc = io::detail::parse_json_text(io::detail::read_all(path), path.string());
    std::vector<json> records;
    was_array = doc.is_array();
    if (was_array) {
        for (const auto& r : doc) records.push_back(r);
    } else {
        records.push_back(doc);
    }
    return records;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coplanar-waveguide resonator design, notch-S21 fitting, photon-number calibration and "
                 "two-level-system loss analysis.",
                 "cpwres"};
    app.require_subcommand(1);
    app.fallthrough(false);
    app.footer("Exit codes: 0 success, 1 usage error, 2 input/parse error, 3 fit did not converge.\n"
               "File formats are described in FORMATS.md.");

    std::string config_path, out_path, fit_path, manifest_path, params_path, out_dir, format_name = "auto";
    std::string argument_name;
    std::vector<std::string> traces, design_paths;
    double p_vna_dbm = 0.0, p_att_db = 0.0, noise = 0.0;
    std::uint64_t seed = 1;
    unsigned jobs = detail::default_jobs();
    const std::vector<std::string> trace_formats{"auto", "csv-reim", "csv-dbdeg", "touchstone"};

    auto* design = app.add_subcommand("design", "Transmission-line parameters of a CPW resonator");
    design->add_option("--config", config_path, "key = value design file")->required();
    design->add_option("--elliptic-argument", argument_name, "Override: parameter | modulus")
        ->check(CLI::IsMember({"parameter", "modulus"}));
    design->add_option("--out", out_path, "Write the record as JSON");

    auto* fit = app.add_subcommand("fit", "Fit the notch model to one or more S21 traces");
    fit->add_option("traces", traces, "Trace files")->required();
    fit->add_option("--format", format_name, "auto | csv-reim | csv-dbdeg | touchstone")
        ->check(CLI::IsMember(trace_formats));
    fit->add_option("--out", out_path, "Write a JSON array of fit records");
    fit->add_option("--jobs", jobs, "Traces fitted concurrently")->check(CLI::PositiveNumber);

    auto* photon_cmd = app.add_subcommand("photon", "Average photon number from a fit record");
    photon_cmd->add_option("--fit", fit_path, "JSON fit record (object or array, as written by fit --out)")
        ->required();
    photon_cmd->add_option("--p-vna-dbm", p_vna_dbm, "VNA output power (dBm)")->required();
    photon_cmd->add_option("--p-att-db", p_att_db, "Line attenuation (dB, negative)")->required();
    photon_cmd->add_option("--out", out_path, "Write the result as JSON");

    auto* tls = app.add_subcommand("tls-fit", "Fit the TLS loss model to Qi versus photon number");
    tls->add_option("--manifest", manifest_path, "CSV: n_ph,temperature_k,fr_hz,qi,qi_sigma")->required();
    tls->add_option("--out", out_path, "Write the result as JSON");

    auto* synth = app.add_subcommand("synth", "Synthesize a notch S21 trace");
    synth->add_option("--params", params_path, "JSON model parameters")->required();
    synth->add_option("--out", out_path, "Output trace file")->required();
    synth->add_option("--seed", seed, "Noise seed");
    synth->add_option("--noise", noise, "Noise sigma per quadrature")->check(CLI::NonNegativeNumber);
    synth->add_option("--format", format_name, "csv-reim | csv-dbdeg")->check(CLI::IsMember({"csv-reim", "csv-dbdeg"}));

    auto* report = app.add_subcommand("report", "Fit a sweep manifest and write a plot-ready report bundle");
    report->add_option("--manifest", manifest_path, "JSON sweep manifest")->required();
    report->add_option("--out-dir", out_dir, "Output directory")->required();
    report->add_option("--design", design_paths, "Design config(s) for the line-parameter table");
    report->add_option("--jobs", jobs, "Traces fitted concurrently")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    detail::KeyValueWriter kv(out);
    try {
        if (*design) {
            auto cfg = io::parse_design_config_file(config_path);
            if (argument_name == "modulus") cfg.argument = cpw::EllipticArgument::modulus;
            if (argument_name == "parameter") cfg.argument = cpw::EllipticArgument::parameter;
            const auto row = cfg.evaluate();
            print_design(kv, row);
            if (!out_path.empty()) io::write_json_file(out_path, io::to_json(row));
            return kSuccess;
        }

        if (*fit) {
            const auto format = detail::format_option(format_name);
            const std::vector<std::filesystem::path> paths(traces.begin(), traces.end());
            const auto results = fit_traces(paths, std::vector<io::TraceFormat>(paths.size(), format), jobs);
            json records = json::array();
            bool all_converged = true;
            for (const auto& r : results) {
                print_fit(kv, r);
                records.push_back(fit_record(r));
                all_converged = all_converged && r.result.diagnostics.converged;
            }
            if (!out_path.empty()) io::write_json_file(out_path, records);
            return all_converged ? kSuccess : kNotConverged;
        }

        if (*photon_cmd) {
            bool was_array = false;
            const auto records = detail::load_fit_records(fit_path, was_array);
            const auto power = photon::input_power(p_vna_dbm, p_att_db);
            json results = json::array();
            for (std::size_t j = 0; j < records.size(); ++j) {
                const auto fit_result = io::fit_result_from_json(records[j], "$[" + std::to_string(j) + "]");
                std::optional<std::string> source;
                if (const auto it = records[j].find("source"); it != records[j].end() && it->is_string()) {
                    source = it->get<std::string>();
                }
                const auto calc = photon_for(fit_result, power);
                if (was_array) kv.section(source.value_or("record " + std::to_string(j)));
                print_photon(kv, power, calc);
                results.push_back(photon_record(source, power, calc));
            }
            if (!out_path.empty()) io::write_json_file(out_path, was_array ? results : results.front());
            return kSuccess;
        }

        if (*tls) {
            const auto observations = io::parse_observations_file(manifest_path);
            const auto r = loss::fit_tls(observations);
            print_tls(kv, r);
            for (const auto& w : r.warnings) err << "warning: " << w << '\n';
            if (!out_path.empty()) io::write_json_file(out_path, io::to_json(r));
            return r.converged ? kSuccess : kNotConverged;
        }

        if (*synth) {
            const json doc = io::detail::parse_json_text(io::detail::read_all(params_path), params_path);
            const auto p = io::notch_params_from_json(doc, "$", {"f_start_hz", "f_stop_hz", "n_points"});
            const double width = p.fr_hz / p.ql;
            const double f_start = io::detail::optional_number(doc, "f_start_hz", "$").value_or(p.fr_hz - 5.0 * width);
            const double f_stop = io::detail::optional_number(doc, "f_stop_hz", "$").value_or(p.fr_hz + 5.0 * width);
            std::size_t n_points = 1001;
            if (const auto it = doc.find("n_points"); it != doc.end()) {
                if (!it->is_number_unsigned()) throw SchemaError("$.n_points", "must be a positive integer");
                n_points = it->get<std::size_t>();
            }
            const auto trace = s21::synthesize_trace(p, f_start, f_stop, n_points, noise, seed);
            const auto format = format_name == "csv-dbdeg" ? io::TraceFormat::csv_dbdeg : io::TraceFormat::csv_reim;
            std::ofstream file(out_path);
            if (!file) throw Error("cannot write '" + out_path + "'");
            io::write_trace(file, trace, format);
            file.close();
            if (!file) throw Error("write failed for '" + out_path + "'");
            kv.put("points", static_cast<int>(trace.size()));
            kv.put("out", out_path);
            return kSuccess;
        }

        if (*report) {
            const auto manifest = io::parse_manifest(manifest_path);
            std::vector<io::DesignConfig> designs;
            for (const auto& d : design_paths) designs.push_back(io::parse_design_config_file(d));
            const auto bundle = build_report(manifest, designs, jobs);
            write_report(out_dir, bundle, report_observations(bundle));
            bool all_converged = true;
            for (const auto& row : bundle.fit_rows) all_converged = all_converged && row.fit.result.diagnostics.converged;
            for (const auto& row : bundle.tls_rows) all_converged = all_converged && row.fit.converged;
            for (const auto& w : bundle.warnings) err << "warning: " << w << '\n';
            kv.put("traces", static_cast<int>(bundle.fit_rows.size()));
            kv.put("loss_fits", static_cast<int>(bundle.tls_rows.size()));
            kv.put("series", static_cast<int>(bundle.series.size()));
            kv.put("out_dir", out_dir);
            return all_converged ? kSuccess : kNotConverged;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInput;
    }
    return kUsage;
}

}  // namespace cpwres::cli
