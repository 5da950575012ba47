#pragma once

// Inverse problem for the notch model: recover fr, Ql, |Qc|, phi, Qi and the
// cable environment (a, alpha, tau) from a measured complex S21 trace.
//
// Pipeline: cable delay by minimum radial scatter of the algebraic circle
// fit, circle fit of the delay-corrected data, phase-vs-frequency fit around
// the circle centre for (fr, Ql), environment from the off-resonant point,
// then a joint Levenberg-Marquardt refinement of all seven parameters
// against the complex model, whose covariance supplies the uncertainties.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpwres/errors.hpp"
#include "cpwres/numerics.hpp"
#include "cpwres/s21_model.hpp"

namespace cpwres::notch {

using s21::ComplexTrace;
using s21::NotchParams;
using complex = std::complex<double>;

struct NotchUncertainties {
    double fr_hz = 0.0;
    double ql = 0.0;
    double qc_mag = 0.0;
    double phi = 0.0;
    double qi = 0.0;
};

struct FitDiagnostics {
    double residual_norm = 0.0;
    std::size_t n_points = 0;
    int iterations = 0;
    bool converged = false;
};

struct NotchFitResult {
    NotchParams params;
    double qi = 0.0;
    std::optional<NotchUncertainties> uncertainties;  // absent when the covariance is singular
    double coupling_coefficient = 0.0;                // qi / |Qc|
    FitDiagnostics diagnostics;
};

struct PhaseFit {
    double fr_hz = 0.0;
    double ql = 0.0;
    double theta0 = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

enum class CouplingRegime { reliable, caution };

inline const char* to_string(CouplingRegime regime) {
    return regime == CouplingRegime::reliable ? "reliable" : "caution";
}

struct CouplingDiagnostics {
    double coupling_coefficient = 0.0;
    std::optional<double> relative_error;  // sigma(qi) / qi
    CouplingRegime regime = CouplingRegime::reliable;
};

/// Nearest-branch unwrap in sample order; jumps larger than pi are folded by 2 pi.
inline std::vector<double> unwrap_phase(std::span<const double> phase) {
    std::vector<double> out(phase.begin(), phase.end());
    double offset = 0.0;
    for (std::size_t j = 1; j < out.size(); ++j) {
        const double jump = phase[j] - phase[j - 1];
        if (jump > constants::pi) {
            offset -= 2.0 * constants::pi * std::round(jump / (2.0 * constants::pi));
        } else if (jump < -constants::pi) {
            offset += 2.0 * constants::pi * std::round(-jump / (2.0 * constants::pi));
        }
        out[j] = phase[j] + offset;
    }
    return out;
}

inline std::vector<complex> remove_delay(const ComplexTrace& trace, double tau_s) {
    std::vector<complex> z(trace.size());
    for (std::size_t j = 0; j < trace.size(); ++j) {
        z[j] = trace.s21[j] * std::polar(1.0, 2.0 * constants::pi * trace.frequencies_hz[j] * tau_s);
    }
    return z;
}

namespace detail {

inline double wrap_angle(double angle) {
    double w = std::remainder(angle, 2.0 * constants::pi);
    if (w <= -constants::pi) w += 2.0 * constants::pi;
    return w;
}

/// Squared radial deviation from the algebraic circle, relative to sum |z|^2.
/// The normaliser does not depend on the delay applied to z, so values for
/// different trial delays are comparable. Collinear point sets score +inf.
inline double radial_scatter(const std::vector<complex>& z) {
    numerics::Circle2D circle;
    try {
        circle = numerics::fit_circle(z);
    } catch (const DegenerateGeometryError&) {
        return std::numeric_limits<double>::infinity();
    }
    const complex c = circle.center();
    double sum = 0.0;
    double norm = 0.0;
    for (const auto& zj : z) {
        const double d = std::abs(zj - c) - circle.radius;
        sum += d * d;
        norm += std::norm(zj);
    }
    return sum / norm;
}

inline std::size_t edge_count(std::size_t n) { return std::max<std::size_t>(2, n / 10); }

}  // namespace detail

/// Cable delay tau (seconds). Starts from the linear phase slope of the
/// outer 10% of samples on each edge, then minimizes the radial scatter of
/// the circle fit to s21 e^{+2 pi i f tau} over a bracket of +-1/(2 span).
inline double estimate_delay(const ComplexTrace& trace) {
    if (trace.size() < 32) throw DomainError("estimate_delay: need at least 32 points");
    trace.validate(32);
    const std::size_t n = trace.size();
    const std::size_t m = detail::edge_count(n);
    const double f_first = trace.frequencies_hz.front();
    const double f_last = trace.frequencies_hz.back();
    const double span = f_last - f_first;
    const double f_center = 0.5 * (f_first + f_last);

    std::vector<double> raw(n);
    for (std::size_t j = 0; j < n; ++j) raw[j] = std::arg(trace.s21[j]);
    const auto phase = unwrap_phase(raw);

    double sx = 0, sy = 0, sxx = 0, sxy = 0, count = 0;
    auto accumulate = [&](std::size_t j) {
        const double x = trace.frequencies_hz[j] - f_center;
        sx += x;
        sy += phase[j];
        sxx += x * x;
        sxy += x * phase[j];
        count += 1.0;
    };
    for (std::size_t j = 0; j < m; ++j) accumulate(j);
    for (std::size_t j = n - m; j < n; ++j) accumulate(j);
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    const double tau0 = -slope / (2.0 * constants::pi);

    // With the delay removed exactly, a trace without a resonance collapses
    // onto a single point.
    {
        const auto z0 = remove_delay(trace, tau0);
        complex mean = std::accumulate(z0.begin(), z0.end(), complex(0.0)) / static_cast<double>(n);
        double spread = 0.0;
        for (const auto& zj : z0) spread = std::max(spread, std::abs(zj - mean));
        if (!(spread > 1e-9 * std::abs(mean))) {
            throw DegenerateGeometryError("estimate_delay: no resonance circle in trace (flat delay line)");
        }
    }

    auto objective = [&](double tau) { return detail::radial_scatter(remove_delay(trace, tau)); };

    constexpr int grid = 81;
    const double half_width = 0.5 / span;
    const double step = 2.0 * half_width / (grid - 1);
    int best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double value = objective(tau0 - half_width + step * i);
        if (value < best_value) {
            best_value = value;
            best = i;
        }
    }
    const double lo = tau0 - half_width + step * std::max(best - 1, 0);
    const double hi = tau0 - half_width + step * std::min(best + 1, grid - 1);
    return numerics::minimize_scalar(objective, lo, hi, 1e-12, step * 1e-10);
}

/// Least-squares fit of theta(f) = theta0 + 2 atan(2 Ql (1 - f/fr)) to an
/// unwrapped phase track. `converged` is cleared when the solver stalls or
/// when the fitted resonance is not resolved inside the frequency span.
inline PhaseFit fit_phase(std::span<const double> frequencies_hz, std::span<const double> theta, double fr0,
                          double ql0, std::optional<double> theta0_initial = std::nullopt) {
    const std::size_t n = frequencies_hz.size();
    if (theta.size() != n || n < 4) throw DomainError("fit_phase: need at least 4 matching samples");
    if (!(fr0 > 0.0) || !(ql0 > 0.0)) throw DomainError("fit_phase: initial fr and Ql must be > 0");

    double theta0 = 0.0;
    if (theta0_initial) {
        theta0 = *theta0_initial;
    } else {
        const auto it = std::lower_bound(frequencies_hz.begin(), frequencies_hz.end(), fr0);
        const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - frequencies_hz.begin()), n - 1);
        theta0 = theta[j];
    }

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < n; ++j) {
            const double u = 2.0 * p[1] * (p[0] - frequencies_hz[j]) / p[0];
            r[static_cast<Eigen::Index>(j)] = p[2] + 2.0 * std::atan(u) - theta[j];
        }
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 3);
        for (std::size_t j = 0; j < n; ++j) {
            const double f = frequencies_hz[j];
            const double u = 2.0 * p[1] * (p[0] - f) / p[0];
            const double g = 2.0 / (1.0 + u * u);
            const auto row = static_cast<Eigen::Index>(j);
            jac(row, 0) = g * 2.0 * p[1] * f / (p[0] * p[0]);
            jac(row, 1) = g * 2.0 * (p[0] - f) / p[0];
            jac(row, 2) = 1.0;
        }
        return jac;
    };

    Eigen::VectorXd start(3);
    start << fr0, ql0, theta0;
    const double inf = std::numeric_limits<double>::infinity();
    numerics::Bounds bounds{Eigen::Vector3d(1e-300, 1e-9, -inf), Eigen::Vector3d(inf, inf, inf)};
    const auto report = numerics::least_squares(residuals, start, bounds, {}, jacobian);

    PhaseFit out;
    out.fr_hz = report.parameters[0];
    out.ql = report.parameters[1];
    out.theta0 = report.parameters[2];
    out.residual_norm = report.residual_norm;
    out.iterations = report.iterations;
    const double f_min = frequencies_hz.front();
    const double f_max = frequencies_hz.back();
    const bool resolved = out.fr_hz >= f_min && out.fr_hz <= f_max && out.fr_hz / out.ql < (f_max - f_min);
    out.converged = report.converged && resolved && report.parameters.allFinite();
    return out;
}

namespace detail {

/// Frequency of steepest phase slope, using a centred difference over a
/// window of max(1, n/100) samples.
inline double steepest_slope_frequency(std::span<const double> f, std::span<const double> theta) {
    const std::size_t n = f.size();
    const std::size_t w = std::max<std::size_t>(1, n / 100);
    double best = -1.0;
    double at = f[n / 2];
    for (std::size_t j = w; j + w < n; ++j) {
        const double slope = std::abs((theta[j + w] - theta[j - w]) / (f[j + w] - f[j - w]));
        if (slope > best) {
            best = slope;
            at = f[j];
        }
    }
    return at;
}

/// fr / FWHM of the resonance dip, measured as the distance of each sample
/// from the off-resonant reference (mean of the two end points). The squared
/// distance is Lorentzian with FWHM fr/Ql.
inline double fwhm_quality(std::span<const double> f, const std::vector<complex>& z, double fr0) {
    const std::size_t n = f.size();
    const complex reference = 0.5 * (z.front() + z.back());
    std::vector<double> depth(n);
    std::size_t peak = 0;
    for (std::size_t j = 0; j < n; ++j) {
        depth[j] = std::norm(z[j] - reference);
        if (depth[j] > depth[peak]) peak = j;
    }
    const double half = 0.5 * depth[peak];
    auto crossing = [&](int direction) -> std::optional<double> {
        std::size_t j = peak;
        while (true) {
            if (direction < 0 && j == 0) return std::nullopt;
            if (direction > 0 && j + 1 >= n) return std::nullopt;
            const std::size_t k = direction < 0 ? j - 1 : j + 1;
            if (depth[k] <= half) {
                const double t = (depth[j] - half) / (depth[j] - depth[k]);
                return f[j] + t * (f[k] - f[j]);
            }
            j = k;
        }
    };
    const auto left = crossing(-1);
    const auto right = crossing(+1);
    const double span = f.back() - f.front();
    double width = 0.0;
    if (left && right) {
        width = *right - *left;
    } else if (left) {
        width = 2.0 * (f[peak] - *left);
    } else if (right) {
        width = 2.0 * (*right - f[peak]);
    }
    if (!(width > 0.0)) width = 0.1 * span;
    return fr0 / width;
}

}  // namespace detail

struct NotchFitOptions {
    numerics::LeastSquaresOptions refinement{};
};

/// Fits the notch model to `trace`. Throws DegenerateGeometryError when no
/// resonance circle exists and UnphysicalError when the fitted quality
/// factors imply Qi <= 0. Non-convergence is reported in the diagnostics.
inline NotchFitResult fit_notch(const ComplexTrace& trace, const NotchFitOptions& options = {}) {
    trace.validate(32);
    const std::size_t n = trace.size();
    const std::span<const double> f(trace.frequencies_hz);
    const double f_first = f.front();
    const double f_last = f.back();
    const double span = f_last - f_first;
    const double f_center = 0.5 * (f_first + f_last);

    // (1)-(3) delay, delay-corrected samples, circle.
    const double tau = estimate_delay(trace);
    const auto z = remove_delay(trace, tau);
    const auto circle = numerics::fit_circle(z);
    const complex center = circle.center();

    // (4) phase around the circle centre.
    std::vector<double> raw(n);
    for (std::size_t j = 0; j < n; ++j) raw[j] = std::arg(z[j] - center);
    const auto theta = unwrap_phase(raw);
    const double fr0 = detail::steepest_slope_frequency(f, theta);
    const double ql0 = detail::fwhm_quality(f, z, fr0);
    const auto phase_fit = fit_phase(f, theta, fr0, ql0);

    // (5)-(6) off-resonant point, environment and normalised circle.
    const complex z_inf = center + circle.radius * std::polar(1.0, phase_fit.theta0 + constants::pi);
    const double a0 = std::abs(z_inf);
    const double alpha0 = std::arg(z_inf);
    const complex center_norm = center / z_inf;
    const double radius_norm = circle.radius / a0;
    const double phi0 = std::arg(1.0 - center_norm);
    const double ql_start = phase_fit.ql;
    const double qc_start = ql_start / (2.0 * radius_norm);

    // (8) joint refinement. Internally the environment phase is referenced
    // to the span centre, alpha_c = alpha - 2 pi f_c tau, which decorrelates
    // it from tau.
    auto model_parts = [&](const Eigen::VectorXd& p, double fj, complex& env, complex& ratio, complex& denom) {
        env = p[4] * std::polar(1.0, p[5] - 2.0 * constants::pi * (fj - f_center) * p[6]);
        ratio = (p[1] / p[2]) * std::polar(1.0, p[3]);
        denom = complex(1.0, 2.0 * p[1] * (fj - p[0]) / p[0]);
    };
    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(2 * n));
        for (std::size_t j = 0; j < n; ++j) {
            complex env, ratio, denom;
            model_parts(p, f[j], env, ratio, denom);
            const complex diff = env * (1.0 - ratio / denom) - trace.s21[j];
            r[static_cast<Eigen::Index>(j)] = diff.real();
            r[static_cast<Eigen::Index>(n + j)] = diff.imag();
        }
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd jac(static_cast<Eigen::Index>(2 * n), 7);
        const complex i(0.0, 1.0);
        for (std::size_t j = 0; j < n; ++j) {
            complex env, ratio, denom;
            const double fj = f[j];
            model_parts(p, fj, env, ratio, denom);
            const complex resonant = ratio / denom;
            const complex s = env * (1.0 - resonant);
            const double detune = (fj - p[0]) / p[0];
            const complex d_denom_d_fr(0.0, -2.0 * p[1] * fj / (p[0] * p[0]));
            const complex d_denom_d_ql(0.0, 2.0 * detune);
            const complex cols[7] = {
                env * resonant / denom * d_denom_d_fr,
                env * (-resonant / p[1] + resonant / denom * d_denom_d_ql),
                env * resonant / p[2],
                env * (-i * resonant),
                s / p[4],
                i * s,
                -2.0 * constants::pi * (fj - f_center) * i * s,
            };
            for (int c = 0; c < 7; ++c) {
                jac(static_cast<Eigen::Index>(j), c) = cols[c].real();
                jac(static_cast<Eigen::Index>(n + j), c) = cols[c].imag();
            }
        }
        return jac;
    };

    Eigen::VectorXd start(7);
    start << phase_fit.fr_hz, ql_start, qc_start, phi0, a0, alpha0 - 2.0 * constants::pi * f_center * tau, tau;
    start[5] = detail::wrap_angle(start[5]);
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd lower(7), upper(7);
    lower << f_first - span, 1e-9, 1e-9, -inf, 1e-300, -inf, -inf;
    upper << f_last + span, inf, inf, inf, inf, inf, inf;
    for (Eigen::Index k = 0; k < 7; ++k) start[k] = std::clamp(start[k], lower[k], upper[k]);
    const auto report = numerics::least_squares(residuals, start, numerics::Bounds{lower, upper},
                                                options.refinement, jacobian);
    const auto& p = report.parameters;

    NotchFitResult result;
    result.params.fr_hz = p[0];
    result.params.ql = p[1];
    result.params.qc_mag = p[2];
    result.params.phi = detail::wrap_angle(p[3]);
    result.params.a = p[4];
    result.params.tau_s = p[6];
    result.params.alpha = detail::wrap_angle(p[5] + 2.0 * constants::pi * f_center * p[6]);

    // (7) diameter-corrected Qi.
    result.qi = s21::internal_q(result.params.ql, result.params.qc_mag, result.params.phi);
    result.coupling_coefficient = result.qi / result.params.qc_mag;

    result.diagnostics.residual_norm = report.residual_norm;
    result.diagnostics.n_points = n;
    result.diagnostics.iterations = report.iterations;
    result.diagnostics.converged = report.converged && phase_fit.converged && p.allFinite();

    if (report.covariance) {
        const auto& cov = *report.covariance;
        const double qi = result.qi;
        const double ql = p[1];
        const double qc = p[2];
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(7);
        grad[1] = qi * qi / (ql * ql);
        grad[2] = -qi * qi * std::cos(p[3]) / (qc * qc);
        grad[3] = -qi * qi * std::sin(p[3]) / qc;
        NotchUncertainties u;
        u.fr_hz = std::sqrt(std::max(cov(0, 0), 0.0));
        u.ql = std::sqrt(std::max(cov(1, 1), 0.0));
        u.qc_mag = std::sqrt(std::max(cov(2, 2), 0.0));
        u.phi = std::sqrt(std::max(cov(3, 3), 0.0));
        u.qi = std::sqrt(std::max(grad.dot(cov * grad), 0.0));
        result.uncertainties = u;
    }
    return result;
}

/// Coupling coefficient Qi/|Qc|, relative Qi error and the reliability
/// regime. Fits are trusted when the coefficient lies in [0.1, 100].
inline CouplingDiagnostics coupling_diagnostics(const NotchFitResult& result) {
    CouplingDiagnostics d;
    d.coupling_coefficient = result.qi / result.params.qc_mag;
    if (result.uncertainties) d.relative_error = result.uncertainties->qi / result.qi;
    d.regime = (d.coupling_coefficient >= 0.1 && d.coupling_coefficient <= 100.0) ? CouplingRegime::reliable
                                                                                   : CouplingRegime::caution;
    return d;
}

inline CouplingDiagnostics coupling_diagnostics(double qi, double qc_mag) {
    NotchFitResult r;
    r.qi = qi;
    r.params.qc_mag = qc_mag;
    return coupling_diagnostics(r);
}

}  // namespace cpwres::notch
