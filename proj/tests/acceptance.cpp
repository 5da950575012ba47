// Acceptance gate. Each criterion prints one PASS/FAIL line with the
// measured figures. Usage: cpwres_acceptance [--criterion N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cpwres/cpw_design.hpp"
#include "cpwres/loss_models.hpp"
#include "cpwres/notch_fit.hpp"
#include "cpwres/numerics.hpp"
#include "cpwres/photon_calib.hpp"
#include "cpwres/s21_model.hpp"

namespace {

using namespace cpwres;
using Clock = std::chrono::steady_clock;

constexpr double kPi = 3.14159265358979323846;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

double percentile95(std::vector<double> v) {
    if (v.empty()) return INFINITY;
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
    return v[idx];
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, fmt, args...);
    return buffer;
}

// ------------------------------------------------------------------ 1

Verdict table_one() {
    const auto start = Clock::now();
    const cpw::WaferStack stack(378.0, 2.0, 11.7, 0.3);
    struct Row {
        double length_um, f_measured_ghz, qi, lk, r;
    };
    const Row rows[] = {{4643.0, 5.57, 813.0, 0.142, 16.08},
                        {5084.0, 5.04, 776.0, 0.152, 15.52},
                        {4643.0, 5.60, 568.0, 0.135, 22.8},
                        {5084.0, 5.08, 599.0, 0.143, 19.95}};
    bool pass = true;
    double worst_lk = 0.0;
    double worst_r = 0.0;
    double eps_eff = 0.0, lg = 0.0, cg = 0.0, f1 = 0.0, f2 = 0.0;
    for (const auto& row : rows) {
        const auto p = cpw::design_report(stack, 8.0, 5.0, row.length_um, row.f_measured_ghz, row.qi);
        eps_eff = p.eps_eff;
        lg = p.lg_uh_per_m;
        cg = p.cg_nf_per_m;
        (row.length_um == 5084.0 ? f1 : f2) = p.f_design_ghz;
        worst_lk = std::max(worst_lk, rel(*p.lk_uh_per_m, row.lk));
        worst_r = std::max(worst_r, rel(*p.r_ohm_per_m, row.r));
    }
    pass = pass && rel(eps_eff, 6.35) <= 0.01 && rel(f1, 5.85) <= 0.005 && rel(f2, 6.40) <= 0.005 &&
           rel(lg, 0.44) <= 0.03 && rel(cg, 0.159) <= 0.05 && worst_lk <= 0.02 && worst_r <= 0.02;
    const double elapsed = seconds_since(start);
    pass = pass && elapsed < 1.0;
    return {pass, format("eps_eff %.4f, f_design %.4f/%.4f GHz, Lg %.4f uH/m, Cg %.4f nF/m, worst Lk err %.2f%%, "
                         "worst R err %.2f%%, %.3f s",
                         eps_eff, f1, f2, lg, cg, 100 * worst_lk, 100 * worst_r, elapsed)};
}

// ------------------------------------------------------------------ 2

Verdict table_two_three() {
    const loss::TlsFitParams s1_fr1{5703.0, 0.32, 0.16, 946.0};
    const double low = loss::total_qi(s1_fr1, 1.0, 0.05, 5.04e9);
    const double high = loss::total_qi(s1_fr1, 100.0, 0.05, 5.04e9);
    const bool pass = rel(low, 865.0) <= 0.06 && rel(high, 899.0) <= 0.06;
    return {pass, format("Qi(n=1) %.1f vs 865 (%.2f%%), Qi(n=100) %.1f vs 899 (%.2f%%)", low, 100 * rel(low, 865.0),
                         high, 100 * rel(high, 899.0))};
}

// ------------------------------------------------------------------ 3

Verdict notch_round_trip() {
    const auto start = Clock::now();
    s21::NormalStream rng(12345);
    std::vector<double> e_fr, e_ql, e_qc, e_qi;
    double worst_clean = 0.0;
    int failures = 0;
    for (int i = 0; i < 200; ++i) {
        s21::NotchParams p;
        p.fr_hz = 4e9 + 4e9 * rng.uniform();
        p.ql = 200.0 * std::pow(5e4 / 200.0, rng.uniform());
        p.phi = -0.5 + rng.uniform();
        double ratio = 0.0;
        do {
            ratio = 0.5 + 49.5 * rng.uniform();
        } while (!(1.0 / p.ql - std::cos(p.phi) / (ratio * p.ql) > 0.0));
        p.qc_mag = ratio * p.ql;
        p.tau_s = 100e-9 * rng.uniform();
        p.a = 0.3 + 0.9 * rng.uniform();
        p.alpha = -kPi + 2.0 * kPi * rng.uniform();
        const double width = p.fr_hz / p.ql;
        const double qi = s21::internal_q(p);
        const double sigma = s21::noise_sigma_for_snr(p, 40.0);
        try {
            const auto noisy = notch::fit_notch(
                s21::synthesize_trace(p, p.fr_hz - 5 * width, p.fr_hz + 5 * width, 1001, sigma, 1000 + i));
            e_fr.push_back(std::abs(noisy.params.fr_hz - p.fr_hz) / width);
            e_ql.push_back(rel(noisy.params.ql, p.ql));
            e_qc.push_back(rel(noisy.params.qc_mag, p.qc_mag));
            e_qi.push_back(rel(noisy.qi, qi));

            const auto clean =
                notch::fit_notch(s21::synthesize_trace(p, p.fr_hz - 5 * width, p.fr_hz + 5 * width, 1001, 0.0, 1));
            for (double e : {rel(clean.params.fr_hz, p.fr_hz), rel(clean.params.ql, p.ql),
                             rel(clean.params.qc_mag, p.qc_mag), rel(clean.qi, qi)}) {
                worst_clean = std::max(worst_clean, e);
            }
        } catch (const std::exception&) {
            ++failures;
            for (auto* v : {&e_fr, &e_ql, &e_qc, &e_qi}) v->push_back(INFINITY);
            worst_clean = INFINITY;
        }
    }
    const double elapsed = seconds_since(start);
    const double p_fr = percentile95(e_fr), p_ql = percentile95(e_ql), p_qc = percentile95(e_qc),
                 p_qi = percentile95(e_qi);
    const bool pass = p_fr <= 0.1 && p_ql <= 0.02 && p_qc <= 0.02 && p_qi <= 0.05 && worst_clean <= 1e-3 &&
                      failures == 0 && elapsed < 30.0;
    return {pass, format("40 dB p95: fr %.4f linewidth, Ql %.3f%%, |Qc| %.3f%%, Qi %.3f%%; noise-free worst %.2e; "
                         "%d failures; %.1f s",
                         p_fr, 100 * p_ql, 100 * p_qc, 100 * p_qi, worst_clean, failures, elapsed)};
}

// ------------------------------------------------------------------ 4

Verdict photon_identity() {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double hbar = 6.62607015e-34 / (2.0 * kPi);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double qc = std::pow(10.0, 1.0 + 6.0 * u(rng));
        const double ql = qc * (1e-3 + (1.0 - 2e-3) * u(rng));
        const double qi = 1.0 / (1.0 / ql - 1.0 / qc);
        const double fr = 1e8 + 2e10 * u(rng);
        const double p_in = std::pow(10.0, -22.0 + 12.0 * u(rng));
        const double w = 2.0 * kPi * fr;
        const double closed = 2.0 * ql * ql * p_in / (hbar * w * w * qc);
        worst = std::max(worst, rel(photon::photon_number(ql, qc, qi, fr, p_in).n_ph, closed));
    }
    return {worst <= 1e-12, format("worst relative deviation %.2e over 1000 draws", worst)};
}

// ------------------------------------------------------------------ 5

Verdict tls_recovery() {
    struct Row {
        const char* name;
        loss::TlsFitParams p;
        double fr_hz;
    };
    const Row rows[] = {{"S1-fr1", {5703.0, 0.32, 0.16, 946.0}, 5.04e9},
                        {"S1-fr2", {6789.0, 2.1, 0.3, 894.0}, 5.57e9},
                        {"S2-fr1", {2941.0, 0.0104, 0.0791, 693.8}, 5.085e9},
                        {"S2-fr2", {2342.0, 0.115, 0.0820, 694.0}, 5.604e9}};
    const double t = 0.05;
    bool pass = true;
    std::string detail;
    for (const auto& row : rows) {
        auto grid = [&](double noise, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> g(0.0, 1.0);
            std::vector<loss::LossObservation> obs;
            for (int j = 0; j < 25; ++j) {
                const double n = std::pow(10.0, -2.0 + 5.0 * j / 24.0);
                const double qi = loss::total_qi(row.p, n, t, row.fr_hz) * (1.0 + noise * g(rng));
                obs.push_back({n, t, row.fr_hz, qi, std::nullopt});
            }
            return obs;
        };

        double clean_worst = 0.0;
        try {
            const auto r = loss::fit_tls(grid(0.0, 0));
            clean_worst = std::max({rel(r.params.q0, row.p.q0), rel(r.params.q_tls0, row.p.q_tls0),
                                    rel(r.params.n_c, row.p.n_c), rel(r.params.beta, row.p.beta)});
        } catch (const std::exception&) {
            clean_worst = INFINITY;
        }

        std::vector<double> e_q0, e_qtls, e_beta, e_nc;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            try {
                const auto r = loss::fit_tls(grid(0.01, seed));
                e_q0.push_back(rel(r.params.q0, row.p.q0));
                e_qtls.push_back(rel(r.params.q_tls0, row.p.q_tls0));
                e_beta.push_back(std::abs(r.params.beta - row.p.beta));
                e_nc.push_back(std::abs(std::log(r.params.n_c / row.p.n_c)));
            } catch (const std::exception&) {
                for (auto* v : {&e_q0, &e_qtls, &e_beta, &e_nc}) v->push_back(INFINITY);
            }
        }
        const double p_q0 = percentile95(e_q0), p_qtls = percentile95(e_qtls), p_beta = percentile95(e_beta),
                     p_nc = std::exp(percentile95(e_nc));
        const bool row_pass =
            clean_worst <= 1e-3 && p_q0 <= 0.05 && p_qtls <= 0.15 && p_beta <= 0.05 && p_nc <= 2.0;
        pass = pass && row_pass;
        detail += format("%s%s: clean %.1e, p95 q0 %.1f%% q_tls0 %.1f%% beta %.3f n_c x%.2f", detail.empty() ? "" : "; ",
                         row.name, clean_worst, 100 * p_q0, 100 * p_qtls, p_beta, p_nc);
    }
    return {pass, detail};
}

// ------------------------------------------------------------------ 6

/// K(k) by the trapezoidal rule on the periodic integrand, doubling the
/// panel count until successive values agree to a few ulps (or 2^20 panels).
double ellip_k_quadrature(double k) {
    auto integrand = [k](double theta) {
        const double s = std::sin(theta);
        return 1.0 / std::sqrt(1.0 - k * k * s * s);
    };
    // Trapezoid over [0, pi] (full period) halved: converges geometrically.
    std::size_t n = 8;
    double previous = 0.0;
    for (int round = 0; round < 18; ++round, n *= 2) {
        const double h = kPi / static_cast<double>(n);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += integrand(h * static_cast<double>(j));
        const double value = 0.5 * h * sum;
        if (round > 0 && std::abs(value - previous) <= 4.0 * std::numeric_limits<double>::epsilon() * value) {
            return value;
        }
        previous = value;
    }
    return previous;
}

Verdict invariants() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::string detail;
    bool pass = true;

    // Lg * Cg = mu0 eps0 eps_eff.
    double worst_lc = 0.0;
    for (int i = 0; i < 200; ++i) {
        const cpw::WaferStack stack(100.0 + 600.0 * u(rng), 5.0 * u(rng), 2.0 + 10.0 * u(rng), u(rng));
        const auto geom = cpw::CpwGeometry(1.0 + 30.0 * u(rng), 1.0 + 30.0 * u(rng), 5000.0, stack);
        for (auto arg : {cpw::EllipticArgument::parameter, cpw::EllipticArgument::modulus}) {
            const auto f = cpw::conformal_factors(geom, arg);
            const double eps_eff = cpw::effective_permittivity(cpw::substrate_permittivity(stack), f);
            const auto line = cpw::geometric_line_params(f, eps_eff);
            const double product = line.lg_uh_per_m * 1e-6 * line.cg_nf_per_m * 1e-9;
            worst_lc = std::max(worst_lc, rel(product, constants::mu0 * constants::eps0 * eps_eff));
        }
    }
    pass = pass && worst_lc <= 1e-12;
    detail += format("LC identity worst %.1e", worst_lc);

    // AGM against quadrature on 50 moduli.
    double worst_k = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double k = 0.99 * u(rng);
        worst_k = std::max(worst_k, rel(numerics::ellip_k(k), ellip_k_quadrature(k)));
    }
    pass = pass && worst_k <= 1e-12;
    detail += format("; K(k) AGM vs quadrature worst %.1e", worst_k);

    // total_qi non-decreasing in n_ph.
    int violations = 0;
    for (int i = 0; i < 200; ++i) {
        const loss::TlsFitParams p{std::pow(10.0, 2.0 + 4.0 * u(rng)), std::pow(10.0, -2.0 + 4.0 * u(rng)),
                                   0.01 + 1.99 * u(rng), std::pow(10.0, 2.0 + 4.0 * u(rng))};
        const double t = 0.01 + u(rng);
        const double fr = 4e9 + 4e9 * u(rng);
        double previous = 0.0;
        for (double n = 1e-4; n < 1e7; n *= 1.5) {
            const double qi = loss::total_qi(p, n, t, fr);
            if (qi < previous) ++violations;
            previous = qi;
        }
    }
    pass = pass && violations == 0;
    detail += format("; total_qi monotonicity violations %d", violations);

    // fit_notch invariant under a global phase rotation.
    double worst_phase = 0.0;
    for (int i = 0; i < 10; ++i) {
        s21::NotchParams p;
        p.fr_hz = 4e9 + 4e9 * u(rng);
        p.ql = 300.0 + 3e4 * u(rng);
        p.qc_mag = p.ql * (1.5 + 10.0 * u(rng));
        p.phi = -0.5 + u(rng);
        p.a = 0.5 + 0.5 * u(rng);
        p.alpha = -kPi + 2.0 * kPi * u(rng);
        p.tau_s = 80e-9 * u(rng);
        const double width = p.fr_hz / p.ql;
        auto trace = s21::synthesize_trace(p, p.fr_hz - 5 * width, p.fr_hz + 5 * width, 1001,
                                           s21::noise_sigma_for_snr(p, 40.0), 60 + i);
        const auto base = notch::fit_notch(trace);
        const double rotation = -kPi + 2.0 * kPi * u(rng);
        for (auto& v : trace.s21) v *= std::polar(1.0, rotation);
        const auto rotated = notch::fit_notch(trace);
        for (double e : {rel(rotated.params.fr_hz, base.params.fr_hz), rel(rotated.params.ql, base.params.ql),
                         rel(rotated.params.qc_mag, base.params.qc_mag), rel(rotated.qi, base.qi),
                         std::abs(rotated.params.phi - base.params.phi)}) {
            worst_phase = std::max(worst_phase, e);
        }
    }
    pass = pass && worst_phase <= 1e-9;
    detail += format("; global-phase invariance worst %.1e", worst_phase);
    return {pass, detail};
}

// ------------------------------------------------------------------ 7

Verdict relaxation() {
    double lo = INFINITY;
    double hi = 0.0;
    for (double ql : {488.0, 552.0}) {
        for (double fr : {5.04e9, 5.57e9}) {
            const double t_ns = loss::relaxation_bound(ql, fr) * 1e9;
            lo = std::min(lo, t_ns);
            hi = std::max(hi, t_ns);
        }
    }
    return {lo >= 13.0 && hi <= 18.0, format("bound range [%.2f, %.2f] ns", lo, hi)};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "line-parameter table reproduction", table_one},
        {2, "loss model vs measured Qi at n = 1 and 100", table_two_three},
        {3, "notch-fit round trip at 40 dB SNR", notch_round_trip},
        {4, "photon-number closed-form identity", photon_identity},
        {5, "TLS-fit recovery at 1% noise", tls_recovery},
        {6, "invariant suites", invariants},
        {7, "relaxation bound range", relaxation},
    };

    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
            return 2;
        }
    }
    if (only < 0 || only > static_cast<int>(criteria.size())) {
        std::fprintf(stderr, "no criterion %d\n", only);
        return 2;
    }

    bool all = true;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d (%s): %s - %s\n", c.id, c.title, v.pass ? "PASS" : "FAIL", v.detail.c_str());
        std::fflush(stdout);
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
