#pragma once

// Loss budget 1/Qi = 1/Q0 + 1/Q_TLS(n, T) + 1/Q_qp(T) with the standard
// saturable two-level-system term
//
//   1/Q_TLS = (1/Q_TLS0) tanh(h fr / 2 k_B T) / (1 + n/n_c)^beta
//
// and the fit of (Q_TLS0, n_c, beta, Q0) to Qi measured over photon number
// and temperature.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpwres/constants.hpp"
#include "cpwres/errors.hpp"
#include "cpwres/numerics.hpp"

namespace cpwres::loss {

struct TlsFitParams {
    double q_tls0 = 0.0;
    double n_c = 0.0;
    double beta = 0.0;
    double q0 = 0.0;

    void validate() const {
        if (!(q_tls0 > 0.0) || !(n_c > 0.0) || !(q0 > 0.0)) {
            throw DomainError("TlsFitParams: q_tls0, n_c and q0 must be > 0");
        }
        if (!(beta > 0.0 && beta <= 2.0)) throw DomainError("TlsFitParams: beta must lie in (0, 2]");
    }
};

struct LossObservation {
    double n_ph = 0.0;
    double temperature_k = 0.0;
    double fr_hz = 0.0;
    double qi_measured = 0.0;
    std::optional<double> qi_sigma;
};

/// Extra loss channel as a function of temperature, e.g. quasiparticles.
using LossHook = std::function<double(double temperature_k)>;

/// tanh(h fr / 2 k_B T); T = 0 is the saturated limit 1.
inline double thermal_factor(double temperature_k, double fr_hz) {
    if (temperature_k == 0.0) return 1.0;
    return std::tanh(constants::planck * fr_hz / (2.0 * constants::boltzmann * temperature_k));
}

inline double tls_inverse_q(const TlsFitParams& p, double n_ph, double temperature_k, double fr_hz) {
    if (!(n_ph >= 0.0)) throw DomainError("tls_inverse_q: n_ph must be >= 0");
    if (!(temperature_k >= 0.0)) throw DomainError("tls_inverse_q: temperature must be >= 0");
    return thermal_factor(temperature_k, fr_hz) / (p.q_tls0 * std::pow(1.0 + n_ph / p.n_c, p.beta));
}

inline double total_qi(const TlsFitParams& p, double n_ph, double temperature_k, double fr_hz,
                       const LossHook& qp_hook = nullptr) {
    const double extra = qp_hook ? qp_hook(temperature_k) : 0.0;
    return 1.0 / (1.0 / p.q0 + tls_inverse_q(p, n_ph, temperature_k, fr_hz) + extra);
}

struct TlsFitResult {
    TlsFitParams params;
    std::optional<TlsFitParams> sigma;       // one-sigma per parameter
    std::optional<Eigen::MatrixXd> covariance;  // (ln q_tls0, ln n_c, beta, ln q0)
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool ill_conditioned = false;
    std::vector<std::string> warnings;
};

struct TlsFitOptions {
    std::optional<TlsFitParams> initial;
    LossHook qp_hook;
    numerics::LeastSquaresOptions solver{};
};

/// Residuals are taken in 1/Q: r_j = 1/Qi_meas - 1/Qi_model, divided by the
/// propagated sigma of 1/Qi when every observation carries qi_sigma.
/// q_tls0, n_c and q0 are fitted as logarithms; beta is bounded to (0, 2].
inline TlsFitResult fit_tls(const std::vector<LossObservation>& observations, const TlsFitOptions& options = {}) {
    if (observations.size() < 4) throw DomainError("fit_tls: need at least 4 observations");
    bool weighted = true;
    double n_min = std::numeric_limits<double>::infinity();
    double n_max = 0.0;
    double qi_max = 0.0;
    for (const auto& o : observations) {
        if (!(o.n_ph >= 0.0) || !(o.temperature_k > 0.0) || !(o.fr_hz > 0.0) || !(o.qi_measured > 0.0)) {
            throw DomainError("fit_tls: observation out of domain (n_ph >= 0, T > 0, fr > 0, Qi > 0)");
        }
        if (!o.qi_sigma || !(*o.qi_sigma > 0.0)) weighted = false;
        if (o.n_ph > 0.0) n_min = std::min(n_min, o.n_ph);
        n_max = std::max(n_max, o.n_ph);
        qi_max = std::max(qi_max, o.qi_measured);
    }

    TlsFitResult result;
    const double decades = (n_max > 0.0 && std::isfinite(n_min)) ? std::log10(n_max / n_min) : 0.0;
    if (observations.size() < 8) {
        result.ill_conditioned = true;
        result.warnings.push_back("fewer than 8 observations");
    }
    if (!(decades >= 1.5)) {
        result.ill_conditioned = true;
        result.warnings.push_back("photon-number span below 1.5 decades; n_c and beta are not separable");
    }

    TlsFitParams init = options.initial.value_or(TlsFitParams{3.0 * qi_max, 1.0, 0.3, qi_max});
    init.validate();

    auto unpack = [](const Eigen::VectorXd& x) {
        return TlsFitParams{std::exp(x[0]), std::exp(x[1]), x[2], std::exp(x[3])};
    };
    const auto m = static_cast<Eigen::Index>(observations.size());
    auto residuals = [&](const Eigen::VectorXd& x) {
        const auto p = unpack(x);
        Eigen::VectorXd r(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto& o = observations[static_cast<std::size_t>(j)];
            const double model = 1.0 / total_qi(p, o.n_ph, o.temperature_k, o.fr_hz, options.qp_hook);
            double value = 1.0 / o.qi_measured - model;
            if (weighted) value /= *o.qi_sigma / (o.qi_measured * o.qi_measured);
            r[j] = value;
        }
        return r;
    };

    Eigen::VectorXd start(4);
    start << std::log(init.q_tls0), std::log(init.n_c), init.beta, std::log(init.q0);
    const double inf = std::numeric_limits<double>::infinity();
    numerics::Bounds bounds{Eigen::Vector4d(-inf, -inf, 1e-6, -inf), Eigen::Vector4d(inf, inf, 2.0, inf)};
    const auto report = numerics::least_squares(residuals, start, bounds, options.solver);

    result.params = unpack(report.parameters);
    result.residual_norm = report.residual_norm;
    result.iterations = report.iterations;
    result.converged = report.converged;
    result.covariance = report.covariance;
    if (report.covariance) {
        const auto& c = *report.covariance;
        result.sigma = TlsFitParams{result.params.q_tls0 * std::sqrt(std::max(c(0, 0), 0.0)),
                                    result.params.n_c * std::sqrt(std::max(c(1, 1), 0.0)),
                                    std::sqrt(std::max(c(2, 2), 0.0)),
                                    result.params.q0 * std::sqrt(std::max(c(3, 3), 0.0))};
    } else {
        result.ill_conditioned = true;
        result.warnings.push_back("covariance unavailable (singular normal matrix)");
    }
    if (!report.converged) result.warnings.push_back("solver did not converge");
    return result;
}

/// Upper bound on qubit relaxation time set by the resonator linewidth, Ql / (2 pi fr).
inline double relaxation_bound(double ql, double fr_hz) {
    if (!(ql > 0.0) || !(fr_hz > 0.0)) throw DomainError("relaxation_bound: Ql and fr must be > 0");
    return ql / (2.0 * constants::pi * fr_hz);
}

}  // namespace cpwres::loss
