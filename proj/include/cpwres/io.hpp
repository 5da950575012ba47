#pragma once

// Text formats: S21 traces (CSV re/im, CSV dB/deg, two-port Touchstone),
// JSON sweep manifests, flat key = value design configs, photon-number /
// Qi observation tables, and JSON records for every result type.
//
// Parsers are strict: unknown columns or keys are rejected with the line
// (or JSON field path) at fault.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cpwres/constants.hpp"
#include "cpwres/cpw_design.hpp"
#include "cpwres/errors.hpp"
#include "cpwres/loss_models.hpp"
#include "cpwres/notch_fit.hpp"
#include "cpwres/photon_calib.hpp"
#include "cpwres/s21_model.hpp"

namespace cpwres::io {

using json = nlohmann::ordered_json;

enum class TraceFormat { auto_detect, csv_reim, csv_dbdeg, touchstone };

inline const char* to_string(TraceFormat format) {
    switch (format) {
        case TraceFormat::auto_detect: return "auto";
        case TraceFormat::csv_reim: return "csv-reim";
        case TraceFormat::csv_dbdeg: return "csv-dbdeg";
        case TraceFormat::touchstone: return "touchstone";
    }
    return "auto";
}

inline std::optional<TraceFormat> trace_format_from_string(std::string_view name) {
    for (auto f : {TraceFormat::auto_detect, TraceFormat::csv_reim, TraceFormat::csv_dbdeg, TraceFormat::touchstone}) {
        if (name == to_string(f)) return f;
    }
    return std::nullopt;
}

inline constexpr std::string_view kReimHeader = "frequency_hz,re_s21,im_s21";
inline constexpr std::string_view kDbDegHeader = "frequency_hz,mag_db,phase_deg";
inline constexpr std::string_view kObservationHeader = "n_ph,temperature_k,fr_hz,qi,qi_sigma";

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t j = 0;
    while (j < s.size()) {
        while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        const std::size_t start = j;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > start) out.push_back(s.substr(start, j - start));
    }
    return out;
}

inline std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

/// Parses a whole field as a double. Non-finite spellings ("nan", "inf")
/// are parsed so the caller can report them as non-finite samples rather
/// than as syntax errors.
inline std::optional<double> to_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

inline double field(std::string_view text, const std::string& source, std::size_t line, std::string_view name) {
    const auto v = to_double(text);
    if (!v) {
        throw ParseError(source, line, "field '" + std::string(name) + "' is not a number: '" + std::string(text) + "'");
    }
    if (!std::isfinite(*v)) throw ParseError(source, line, "non-finite sample in field '" + std::string(name) + "'");
    return *v;
}

inline std::string format_double(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

inline void require_increasing(const std::vector<double>& f, const std::string& source, std::size_t line) {
    if (f.size() >= 2 && !(f.back() > f[f.size() - 2])) {
        throw ParseError(source, line, "non-monotonic frequency grid (frequencies must strictly increase)");
    }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return in;
}

inline s21::ComplexTrace parse_csv_trace(std::istream& in, const std::string& source, bool db_deg,
                                         std::string first_line, std::size_t first_line_no) {
    const std::string_view expected = db_deg ? kDbDegHeader : kReimHeader;
    if (trim(first_line) != expected) {
        throw ParseError(source, first_line_no,
                         "malformed header: expected '" + std::string(expected) + "', got '" +
                             std::string(trim(first_line)) + "'");
    }
    s21::ComplexTrace trace;
    std::string line;
    std::size_t line_no = first_line_no;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 3) {
            throw ParseError(source, line_no, "expected 3 columns, found " + std::to_string(cols.size()));
        }
        const double f = field(cols[0], source, line_no, "frequency_hz");
        const double x = field(cols[1], source, line_no, db_deg ? "mag_db" : "re_s21");
        const double y = field(cols[2], source, line_no, db_deg ? "phase_deg" : "im_s21");
        trace.frequencies_hz.push_back(f);
        require_increasing(trace.frequencies_hz, source, line_no);
        if (db_deg) {
            trace.s21.push_back(std::polar(std::pow(10.0, x / 20.0), y * constants::pi / 180.0));
        } else {
            trace.s21.emplace_back(x, y);
        }
    }
    if (trace.size() == 0) throw ParseError(source, line_no, "no data rows");
    return trace;
}

inline s21::ComplexTrace parse_touchstone(std::istream& in, const std::string& source, std::string first_line,
                                          std::size_t first_line_no) {
    double unit = 1e9;
    std::string number_format = "MA";
    bool seen_option = false;

    // Numbers are collected as a flat stream so rows wrapped over several
    // lines are accepted; each value remembers its line for error reports.
    std::vector<std::pair<double, std::size_t>> values;
    auto handle = [&](std::string raw, std::size_t line_no) {
        if (const auto bang = raw.find('!'); bang != std::string::npos) raw.erase(bang);
        const auto text = trim(raw);
        if (text.empty()) return;
        if (text.front() == '[') throw ParseError(source, line_no, "Touchstone 2.0 keyword sections are not supported");
        if (text.front() == '#') {
            if (seen_option) throw ParseError(source, line_no, "duplicate option line");
            if (!values.empty()) throw ParseError(source, line_no, "option line must precede the data");
            seen_option = true;
            const auto tokens = split_whitespace(text.substr(1));
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                const auto tok = upper(tokens[t]);
                if (tok == "HZ") unit = 1.0;
                else if (tok == "KHZ") unit = 1e3;
                else if (tok == "MHZ") unit = 1e6;
                else if (tok == "GHZ") unit = 1e9;
                else if (tok == "RI" || tok == "DB" || tok == "MA") number_format = tok;
                else if (tok == "S") continue;
                else if (tok == "Y" || tok == "Z" || tok == "H" || tok == "G") {
                    throw ParseError(source, line_no, "only S-parameter files are supported");
                } else if (tok == "R") {
                    if (t + 1 >= tokens.size() || !to_double(tokens[t + 1])) {
                        throw ParseError(source, line_no, "option 'R' needs a reference impedance");
                    }
                    ++t;
                } else {
                    throw ParseError(source, line_no, "unknown option '" + std::string(tokens[t]) + "'");
                }
            }
            return;
        }
        for (const auto tok : split_whitespace(text)) {
            const auto v = to_double(tok);
            if (!v) throw ParseError(source, line_no, "not a number: '" + std::string(tok) + "'");
            if (!std::isfinite(*v)) throw ParseError(source, line_no, "non-finite sample");
            values.emplace_back(*v, line_no);
        }
    };

    std::size_t line_no = first_line_no;
    handle(std::move(first_line), line_no);
    std::string line;
    while (std::getline(in, line)) handle(line, ++line_no);

    constexpr std::size_t per_row = 9;  // f, S11, S21, S12, S22
    if (values.empty()) throw ParseError(source, line_no, "no data rows");
    if (values.size() % per_row != 0) {
        throw ParseError(source, values.back().second,
                         "two-port data must have 9 values per frequency point; found a trailing partial row");
    }
    s21::ComplexTrace trace;
    for (std::size_t r = 0; r < values.size(); r += per_row) {
        const std::size_t row_line = values[r].second;
        trace.frequencies_hz.push_back(values[r].first * unit);
        require_increasing(trace.frequencies_hz, source, row_line);
        const double x = values[r + 3].first;
        const double y = values[r + 4].first;
        if (number_format == "RI") {
            trace.s21.emplace_back(x, y);
        } else if (number_format == "MA") {
            trace.s21.push_back(std::polar(x, y * constants::pi / 180.0));
        } else {
            trace.s21.push_back(std::polar(std::pow(10.0, x / 20.0), y * constants::pi / 180.0));
        }
    }
    return trace;
}

}  // namespace detail

/// Reads a trace from a stream. `source` names the input in error messages.
/// In auto mode the first non-blank line decides: a CSV header selects the
/// matching CSV format, a '!' comment or '#' option line selects Touchstone.
inline s21::ComplexTrace parse_trace(std::istream& in, TraceFormat format = TraceFormat::auto_detect,
                                     const std::string& source = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line).empty()) throw ParseError(source, line_no, "empty input");

    if (format == TraceFormat::auto_detect) {
        const auto head = detail::trim(line);
        if (head == kReimHeader) format = TraceFormat::csv_reim;
        else if (head == kDbDegHeader) format = TraceFormat::csv_dbdeg;
        else if (head.front() == '!' || head.front() == '#') format = TraceFormat::touchstone;
        else {
            throw ParseError(source, line_no,
                             "malformed header: cannot detect format (expected a CSV header '" +
                                 std::string(kReimHeader) + "' or '" + std::string(kDbDegHeader) +
                                 "', or a Touchstone option line)");
        }
    }
    switch (format) {
        case TraceFormat::csv_reim: return detail::parse_csv_trace(in, source, false, line, line_no);
        case TraceFormat::csv_dbdeg: return detail::parse_csv_trace(in, source, true, line, line_no);
        default: return detail::parse_touchstone(in, source, line, line_no);
    }
}

inline s21::ComplexTrace parse_trace_file(const std::filesystem::path& path,
                                          TraceFormat format = TraceFormat::auto_detect) {
    auto in = detail::open_input(path);
    return parse_trace(in, format, path.string());
}

/// Writes a trace as CSV (re/im or dB/deg) with 17 significant digits.
inline void write_trace(std::ostream& out, const s21::ComplexTrace& trace, TraceFormat format = TraceFormat::csv_reim) {
    if (format != TraceFormat::csv_reim && format != TraceFormat::csv_dbdeg) {
        throw DomainError("write_trace: only csv-reim and csv-dbdeg output is supported");
    }
    const bool db = format == TraceFormat::csv_dbdeg;
    out << (db ? kDbDegHeader : kReimHeader) << '\n';
    for (std::size_t j = 0; j < trace.size(); ++j) {
        const auto z = trace.s21[j];
        const double x = db ? 20.0 * std::log10(std::abs(z)) : z.real();
        const double y = db ? std::arg(z) * 180.0 / constants::pi : z.imag();
        out << detail::format_double(trace.frequencies_hz[j]) << ',' << detail::format_double(x) << ','
            << detail::format_double(y) << '\n';
    }
}

// ---------------------------------------------------------------- manifest

struct ManifestEntry {
    std::filesystem::path trace_path;  // resolved against the manifest directory
    std::optional<double> p_vna_dbm;
    std::optional<double> p_att_db;
    std::optional<double> temperature_k;
    std::optional<std::string> resonator_label;
    TraceFormat format = TraceFormat::auto_detect;

    /// Input power at the device, available when both power fields are set.
    std::optional<photon::PowerContext> input_power() const {
        if (!p_vna_dbm || !p_att_db) return std::nullopt;
        return photon::input_power(*p_vna_dbm, *p_att_db);
    }

    s21::TraceMetadata metadata() const { return {p_vna_dbm, p_att_db, temperature_k}; }
};

struct SweepManifest {
    std::vector<ManifestEntry> entries;
};

namespace detail {

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source, line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
}

inline std::string read_all(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline std::optional<double> optional_number(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw SchemaError(path + "." + key, "must be a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw SchemaError(path + "." + key, "must be finite");
    return v;
}

inline double required_number(const json& obj, const char* key, const std::string& path) {
    const auto v = optional_number(obj, key, path);
    if (!v) throw SchemaError(path + "." + key, "required field missing");
    return *v;
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw SchemaError(path + "." + key, "unknown field");
        }
    }
}

}  // namespace detail

/// Parses a manifest: a JSON array of
///   {"trace_path": str, "p_vna_dbm": num, "p_att_db": num,
///    "temperature_k": num > 0, "resonator_label": str, "format": str}
/// where only trace_path is required. Missing optional fields stay absent.
/// Relative trace paths are resolved against `base_dir`.
inline SweepManifest parse_manifest_text(const std::string& text, const std::filesystem::path& base_dir = {},
                                         const std::string& source = "<manifest>") {
    const json doc = detail::parse_json_text(text, source);
    if (!doc.is_array()) throw SchemaError("$", "manifest must be a JSON array of entries");
    SweepManifest manifest;
    std::set<std::filesystem::path> seen;
    for (std::size_t j = 0; j < doc.size(); ++j) {
        const std::string path = "$[" + std::to_string(j) + "]";
        const json& e = doc[j];
        if (!e.is_object()) throw SchemaError(path, "entry must be an object");
        detail::reject_unknown_keys(
            e, {"trace_path", "p_vna_dbm", "p_att_db", "temperature_k", "resonator_label", "format"}, path);
        const auto tp = e.find("trace_path");
        if (tp == e.end()) throw SchemaError(path + ".trace_path", "required field missing");
        if (!tp->is_string() || tp->get<std::string>().empty()) {
            throw SchemaError(path + ".trace_path", "must be a non-empty string");
        }
        ManifestEntry entry;
        std::filesystem::path p(tp->get<std::string>());
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        entry.trace_path = p.lexically_normal();
        if (!seen.insert(entry.trace_path).second) {
            throw SchemaError(path + ".trace_path", "duplicate trace_path '" + entry.trace_path.string() + "'");
        }
        entry.p_vna_dbm = detail::optional_number(e, "p_vna_dbm", path);
        entry.p_att_db = detail::optional_number(e, "p_att_db", path);
        entry.temperature_k = detail::optional_number(e, "temperature_k", path);
        if (entry.temperature_k && !(*entry.temperature_k > 0.0)) {
            throw SchemaError(path + ".temperature_k", "must be > 0");
        }
        if (const auto it = e.find("resonator_label"); it != e.end() && !it->is_null()) {
            if (!it->is_string()) throw SchemaError(path + ".resonator_label", "must be a string");
            entry.resonator_label = it->get<std::string>();
        }
        if (const auto it = e.find("format"); it != e.end() && !it->is_null()) {
            const auto f = it->is_string() ? trace_format_from_string(it->get<std::string>()) : std::nullopt;
            if (!f) throw SchemaError(path + ".format", "must be one of auto, csv-reim, csv-dbdeg, touchstone");
            entry.format = *f;
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

inline SweepManifest parse_manifest(const std::filesystem::path& path) {
    return parse_manifest_text(detail::read_all(path), path.parent_path(), path.string());
}

// ------------------------------------------------------------ design config

struct DesignConfig {
    double d_si_um = 0.0;
    double d_sige_um = 0.0;
    double eps_si = 0.0;
    double ge_fraction = 0.0;
    double w_um = 0.0;
    double g_um = 0.0;
    double length_um = 0.0;
    std::optional<double> f_measured_ghz;
    std::optional<double> qi;
    cpw::EllipticArgument argument = cpw::EllipticArgument::parameter;

    cpw::WaferStack stack() const { return cpw::WaferStack(d_si_um, d_sige_um, eps_si, ge_fraction); }

    cpw::TransmissionLineParams evaluate() const {
        return cpw::design_report(stack(), w_um, g_um, length_um, f_measured_ghz, qi, {argument});
    }
};

/// Flat `key = value` configuration; '#' starts a comment. String values
/// may be quoted. Required keys: d_si_um, d_sige_um, eps_si, ge_fraction,
/// w_um, g_um, length_um. Optional: f_measured_ghz, qi,
/// elliptic_argument ("parameter" or "modulus").
inline DesignConfig parse_design_config(std::istream& in, const std::string& source = "<config>") {
    DesignConfig cfg;
    std::map<std::string, double*> required{{"d_si_um", &cfg.d_si_um}, {"d_sige_um", &cfg.d_sige_um},
                                            {"eps_si", &cfg.eps_si},   {"ge_fraction", &cfg.ge_fraction},
                                            {"w_um", &cfg.w_um},       {"g_um", &cfg.g_um},
                                            {"length_um", &cfg.length_um}};
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text = line;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
        text = detail::trim(text);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
        const std::string key(detail::trim(text.substr(0, eq)));
        auto value = detail::trim(text.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (!seen.insert(key).second) throw ParseError(source, line_no, "duplicate key '" + key + "'");

        if (key == "elliptic_argument") {
            if (value == "parameter") cfg.argument = cpw::EllipticArgument::parameter;
            else if (value == "modulus") cfg.argument = cpw::EllipticArgument::modulus;
            else throw ParseError(source, line_no, "elliptic_argument must be 'parameter' or 'modulus'");
        } else if (auto it = required.find(key); it != required.end()) {
            *it->second = detail::field(value, source, line_no, key);
        } else if (key == "f_measured_ghz") {
            cfg.f_measured_ghz = detail::field(value, source, line_no, key);
        } else if (key == "qi") {
            cfg.qi = detail::field(value, source, line_no, key);
        } else {
            throw ParseError(source, line_no, "unknown key '" + key + "'");
        }
    }
    for (const auto& [key, ptr] : required) {
        if (!seen.count(key)) throw ParseError(source, line_no, "missing required key '" + key + "'");
    }
    return cfg;
}

inline DesignConfig parse_design_config_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_design_config(in, path.string());
}

// ------------------------------------------------------- observation table

/// CSV with header `n_ph,temperature_k,fr_hz,qi,qi_sigma`; qi_sigma may be
/// left empty.
inline std::vector<loss::LossObservation> parse_observations(std::istream& in,
                                                             const std::string& source = "<observations>") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line) != kObservationHeader) {
        throw ParseError(source, line_no,
                         "malformed header: expected '" + std::string(kObservationHeader) + "', got '" +
                             std::string(detail::trim(line)) + "'");
    }
    std::vector<loss::LossObservation> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cols = detail::split(line, ',');
        if (cols.size() != 5) throw ParseError(source, line_no, "expected 5 columns, found " + std::to_string(cols.size()));
        loss::LossObservation o;
        o.n_ph = detail::field(cols[0], source, line_no, "n_ph");
        o.temperature_k = detail::field(cols[1], source, line_no, "temperature_k");
        o.fr_hz = detail::field(cols[2], source, line_no, "fr_hz");
        o.qi_measured = detail::field(cols[3], source, line_no, "qi");
        if (!cols[4].empty()) o.qi_sigma = detail::field(cols[4], source, line_no, "qi_sigma");
        if (!(o.n_ph >= 0.0)) throw ParseError(source, line_no, "n_ph must be >= 0");
        if (!(o.temperature_k > 0.0)) throw ParseError(source, line_no, "temperature_k must be > 0");
        if (!(o.fr_hz > 0.0)) throw ParseError(source, line_no, "fr_hz must be > 0");
        if (!(o.qi_measured > 0.0)) throw ParseError(source, line_no, "qi must be > 0");
        if (o.qi_sigma && !(*o.qi_sigma > 0.0)) throw ParseError(source, line_no, "qi_sigma must be > 0");
        out.push_back(o);
    }
    return out;
}

inline std::vector<loss::LossObservation> parse_observations_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_observations(in, path.string());
}

inline void write_observations(std::ostream& out, const std::vector<loss::LossObservation>& observations) {
    out << kObservationHeader << '\n';
    for (const auto& o : observations) {
        out << detail::format_double(o.n_ph) << ',' << detail::format_double(o.temperature_k) << ','
            << detail::format_double(o.fr_hz) << ',' << detail::format_double(o.qi_measured) << ','
            << (o.qi_sigma ? detail::format_double(*o.qi_sigma) : std::string()) << '\n';
    }
}

// ------------------------------------------------------------ JSON records

namespace detail {

inline void put(json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

inline std::optional<double> get_opt(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

inline double get_req(const json& j, const char* key, const std::string& path) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) throw SchemaError(path + "." + key, "required number missing");
    return it->get<double>();
}

}  // namespace detail

inline json to_json(const cpw::TransmissionLineParams& p) {
    json j;
    j["eps_sub"] = p.eps_sub;
    j["eps_eff"] = p.eps_eff;
    j["lg_uh_per_m"] = p.lg_uh_per_m;
    j["cg_nf_per_m"] = p.cg_nf_per_m;
    j["length_um"] = p.length_um;
    j["f_design_ghz"] = p.f_design_ghz;
    detail::put(j, "f_measured_ghz", p.f_measured_ghz);
    detail::put(j, "qi", p.qi);
    detail::put(j, "lk_uh_per_m", p.lk_uh_per_m);
    detail::put(j, "z_eff_ohm", p.z_eff_ohm);
    detail::put(j, "r_ohm_per_m", p.r_ohm_per_m);
    return j;
}

inline cpw::TransmissionLineParams transmission_line_from_json(const json& j, const std::string& path = "$") {
    cpw::TransmissionLineParams p;
    p.eps_sub = detail::get_req(j, "eps_sub", path);
    p.eps_eff = detail::get_req(j, "eps_eff", path);
    p.lg_uh_per_m = detail::get_req(j, "lg_uh_per_m", path);
    p.cg_nf_per_m = detail::get_req(j, "cg_nf_per_m", path);
    p.length_um = detail::get_req(j, "length_um", path);
    p.f_design_ghz = detail::get_req(j, "f_design_ghz", path);
    p.f_measured_ghz = detail::get_opt(j, "f_measured_ghz");
    p.qi = detail::get_opt(j, "qi");
    p.lk_uh_per_m = detail::get_opt(j, "lk_uh_per_m");
    p.z_eff_ohm = detail::get_opt(j, "z_eff_ohm");
    p.r_ohm_per_m = detail::get_opt(j, "r_ohm_per_m");
    return p;
}

inline json to_json(const s21::NotchParams& p) {
    json j;
    j["fr_hz"] = p.fr_hz;
    j["ql"] = p.ql;
    j["qc_mag"] = p.qc_mag;
    j["phi_rad"] = p.phi;
    j["a"] = p.a;
    j["alpha_rad"] = p.alpha;
    j["tau_s"] = p.tau_s;
    return j;
}

/// fr_hz, ql and qc_mag are required; phi_rad, alpha_rad and tau_s default
/// to 0 and a to 1. Keys outside `extra_allowed` and the model keys are
/// rejected.
inline s21::NotchParams notch_params_from_json(const json& j, const std::string& path = "$",
                                              std::initializer_list<std::string_view> extra_allowed = {}) {
    if (!j.is_object()) throw SchemaError(path, "must be an object");
    for (const auto& [key, value] : j.items()) {
        static constexpr std::string_view known[] = {"fr_hz", "ql", "qc_mag", "phi_rad", "a", "alpha_rad", "tau_s"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known) &&
            std::find(extra_allowed.begin(), extra_allowed.end(), key) == extra_allowed.end()) {
            throw SchemaError(path + "." + key, "unknown field");
        }
    }
    s21::NotchParams p;
    p.fr_hz = detail::required_number(j, "fr_hz", path);
    p.ql = detail::required_number(j, "ql", path);
    p.qc_mag = detail::required_number(j, "qc_mag", path);
    p.phi = detail::optional_number(j, "phi_rad", path).value_or(0.0);
    p.a = detail::optional_number(j, "a", path).value_or(1.0);
    p.alpha = detail::optional_number(j, "alpha_rad", path).value_or(0.0);
    p.tau_s = detail::optional_number(j, "tau_s", path).value_or(0.0);
    try {
        p.validate();
    } catch (const DomainError& e) {
        throw SchemaError(path, e.what());
    }
    return p;
}

inline json to_json(const notch::NotchFitResult& r) {
    json j;
    j["params"] = to_json(r.params);
    j["qi"] = r.qi;
    if (r.uncertainties) {
        const auto& u = *r.uncertainties;
        j["sigma"] = json{{"fr_hz", u.fr_hz}, {"ql", u.ql}, {"qc_mag", u.qc_mag}, {"phi_rad", u.phi}, {"qi", u.qi}};
    }
    j["coupling_coefficient"] = r.coupling_coefficient;
    j["coupling_regime"] = notch::to_string(notch::coupling_diagnostics(r).regime);
    j["diagnostics"] = json{{"residual_norm", r.diagnostics.residual_norm},
                            {"n_points", r.diagnostics.n_points},
                            {"iterations", r.diagnostics.iterations},
                            {"converged", r.diagnostics.converged}};
    return j;
}

inline notch::NotchFitResult fit_result_from_json(const json& j, const std::string& path = "$") {
    if (!j.is_object()) throw SchemaError(path, "fit record must be an object");
    const auto params = j.find("params");
    if (params == j.end()) throw SchemaError(path + ".params", "required field missing");
    notch::NotchFitResult r;
    r.params = notch_params_from_json(*params, path + ".params");
    r.qi = detail::optional_number(j, "qi", path).value_or(s21::internal_q(r.params));
    r.coupling_coefficient = detail::optional_number(j, "coupling_coefficient", path).value_or(r.qi / r.params.qc_mag);
    if (const auto s = j.find("sigma"); s != j.end() && s->is_object()) {
        const std::string sp = path + ".sigma";
        r.uncertainties = notch::NotchUncertainties{detail::required_number(*s, "fr_hz", sp),
                                                    detail::required_number(*s, "ql", sp),
                                                    detail::required_number(*s, "qc_mag", sp),
                                                    detail::required_number(*s, "phi_rad", sp),
                                                    detail::required_number(*s, "qi", sp)};
    }
    if (const auto d = j.find("diagnostics"); d != j.end() && d->is_object()) {
        r.diagnostics.residual_norm = d->value("residual_norm", 0.0);
        r.diagnostics.n_points = d->value("n_points", std::size_t{0});
        r.diagnostics.iterations = d->value("iterations", 0);
        r.diagnostics.converged = d->value("converged", false);
    }
    return r;
}

inline json to_json(const photon::PowerContext& p) {
    return json{{"p_vna_dbm", p.p_vna_dbm}, {"p_att_db", p.p_att_db}, {"p_in_dbm", p.p_in_dbm}, {"p_in_w", p.p_in_w}};
}

inline json to_json(const photon::PhotonCalc& c) {
    return json{{"s21_res_power_ratio", c.s21_res_power_ratio},
                {"s11_res_power_ratio", c.s11_res_power_ratio},
                {"p_loss_w", c.p_loss_w},
                {"n_ph", c.n_ph}};
}

inline json to_json(const loss::TlsFitParams& p) {
    return json{{"q_tls0", p.q_tls0}, {"n_c", p.n_c}, {"beta", p.beta}, {"q0", p.q0}};
}

inline loss::TlsFitParams tls_params_from_json(const json& j, const std::string& path = "$") {
    return {detail::get_req(j, "q_tls0", path), detail::get_req(j, "n_c", path), detail::get_req(j, "beta", path),
            detail::get_req(j, "q0", path)};
}

inline json to_json(const loss::TlsFitResult& r) {
    json j;
    j["params"] = to_json(r.params);
    if (r.sigma) j["sigma"] = to_json(*r.sigma);
    j["residual_norm"] = r.residual_norm;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["ill_conditioned"] = r.ill_conditioned;
    j["warnings"] = r.warnings;
    return j;
}

/// Writes `doc` with two-space indentation and a trailing newline. Doubles
/// are emitted in shortest round-trip form, so no precision is lost.
inline void write_json_file(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace cpwres::io
