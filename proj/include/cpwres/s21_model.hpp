#pragma once

// Notch-type resonator transmission with cable environment,
//
//   S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi} / (1 + 2 i Ql (f/fr - 1))]
//
// plus a seeded synthetic-trace generator used to validate the fitter.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cpwres/constants.hpp"
#include "cpwres/errors.hpp"

namespace cpwres::s21 {

using complex = std::complex<double>;

struct NotchParams {
    double fr_hz = 0.0;
    double ql = 0.0;
    double qc_mag = 0.0;
    double phi = 0.0;    // rad
    double a = 1.0;
    double alpha = 0.0;  // rad
    double tau_s = 0.0;

    void validate() const {
        if (!(fr_hz > 0.0)) throw DomainError("NotchParams: fr must be > 0");
        if (!(ql > 0.0)) throw DomainError("NotchParams: Ql must be > 0");
        if (!(qc_mag > 0.0)) throw DomainError("NotchParams: |Qc| must be > 0");
        if (!(a > 0.0)) throw DomainError("NotchParams: a must be > 0");
        if (!std::isfinite(phi) || !std::isfinite(alpha) || !std::isfinite(tau_s)) {
            throw DomainError("NotchParams: phi, alpha and tau must be finite");
        }
    }
};

/// Diameter-corrected internal quality factor, 1/Qi = 1/Ql - cos(phi)/|Qc|.
inline double internal_q(double ql, double qc_mag, double phi) {
    const double inv = 1.0 / ql - std::cos(phi) / qc_mag;
    if (!(inv > 0.0)) {
        throw UnphysicalError("1/Ql - cos(phi)/|Qc| <= 0: internal quality factor would be negative");
    }
    return 1.0 / inv;
}

inline double internal_q(const NotchParams& p) { return internal_q(p.ql, p.qc_mag, p.phi); }

struct TraceMetadata {
    std::optional<double> p_vna_dbm;
    std::optional<double> p_att_db;
    std::optional<double> temperature_k;
};

struct ComplexTrace {
    std::vector<double> frequencies_hz;
    std::vector<complex> s21;
    TraceMetadata metadata;

    std::size_t size() const { return frequencies_hz.size(); }

    void validate(std::size_t min_points = 2) const {
        if (frequencies_hz.size() != s21.size()) throw DomainError("ComplexTrace: length mismatch");
        if (frequencies_hz.size() < min_points) {
            throw DomainError("ComplexTrace: need at least " + std::to_string(min_points) + " points");
        }
        for (std::size_t j = 0; j < size(); ++j) {
            if (!std::isfinite(frequencies_hz[j]) || !std::isfinite(s21[j].real()) || !std::isfinite(s21[j].imag())) {
                throw DomainError("ComplexTrace: non-finite sample at index " + std::to_string(j));
            }
            if (j > 0 && !(frequencies_hz[j] > frequencies_hz[j - 1])) {
                throw DomainError("ComplexTrace: frequencies not strictly increasing at index " + std::to_string(j));
            }
        }
    }
};

inline complex environment(const NotchParams& p, double f_hz) {
    return p.a * std::polar(1.0, p.alpha - 2.0 * constants::pi * f_hz * p.tau_s);
}

/// Resonator factor alone (environment removed).
inline complex notch_ideal(const NotchParams& p, double f_hz) {
    const complex denom(1.0, 2.0 * p.ql * (f_hz / p.fr_hz - 1.0));
    return 1.0 - (p.ql / p.qc_mag) * std::polar(1.0, p.phi) / denom;
}

inline complex notch_s21(const NotchParams& p, double f_hz) { return environment(p, f_hz) * notch_ideal(p, f_hz); }

/// Standard normal deviates from mt19937_64 via Box-Muller. Uniforms are
/// built from the top 53 bits of each draw, so the stream is identical on
/// every platform (std::normal_distribution is not).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * constants::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Uniform grid from f_start to f_stop (inclusive) with additive complex
/// white Gaussian noise, noise_sigma per real/imaginary component.
inline ComplexTrace synthesize_trace(const NotchParams& p, double f_start_hz, double f_stop_hz, std::size_t n_points,
                                     double noise_sigma, std::uint64_t seed) {
    p.validate();
    if (!(f_start_hz > 0.0) || !(f_start_hz < f_stop_hz)) {
        throw DomainError("synthesize_trace: need 0 < f_start < f_stop");
    }
    if (n_points < 16) throw DomainError("synthesize_trace: need at least 16 points");
    if (!(noise_sigma >= 0.0)) throw DomainError("synthesize_trace: noise_sigma must be >= 0");

    ComplexTrace trace;
    trace.frequencies_hz.resize(n_points);
    trace.s21.resize(n_points);
    NormalStream normal(seed);
    const double step = (f_stop_hz - f_start_hz) / static_cast<double>(n_points - 1);
    for (std::size_t j = 0; j < n_points; ++j) {
        const double f = j + 1 == n_points ? f_stop_hz : f_start_hz + step * static_cast<double>(j);
        trace.frequencies_hz[j] = f;
        complex value = notch_s21(p, f);
        if (noise_sigma > 0.0) {
            const double re = normal();
            const double im = normal();
            value += complex(noise_sigma * re, noise_sigma * im);
        }
        trace.s21[j] = value;
    }
    return trace;
}

/// Per-component noise sigma that puts the resonance circle diameter
/// a Ql/|Qc| at `snr_db` above the complex noise RMS (sigma sqrt 2).
inline double noise_sigma_for_snr(const NotchParams& p, double snr_db) {
    const double diameter = p.a * p.ql / p.qc_mag;
    return diameter * std::pow(10.0, -snr_db / 20.0) / std::sqrt(2.0);
}

}  // namespace cpwres::s21
