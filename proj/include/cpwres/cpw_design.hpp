#pragma once

// Coplanar-waveguide line model for a resonator on a two-layer Si / SiGe
// wafer: layer-averaged substrate permittivity, conformal-mapping effective
// permittivity, geometric L and C per unit length, quarter-wave design
// frequency, and extraction of kinetic inductance, impedance and series
// resistance from a measured resonance.
//
// Public inputs and outputs use lab units (um, GHz, uH/m, nF/m, Ohm/m).
// Everything is converted to SI internally.

#include <cmath>
#include <optional>

#include "cpwres/constants.hpp"
#include "cpwres/errors.hpp"
#include "cpwres/numerics.hpp"

namespace cpwres::cpw {

class WaferStack {
public:
    /// Permittivity of Si(1-x)Ge(x) is taken as eps_si + 4.5 x.
    static constexpr double sige_slope = 4.5;

    WaferStack(double d_si_um, double d_sige_um, double eps_si, double ge_fraction)
        : d_si_um_(d_si_um), d_sige_um_(d_sige_um), eps_si_(eps_si), ge_fraction_(ge_fraction) {
        if (!(d_si_um > 0.0)) throw DomainError("WaferStack: d_si must be > 0");
        if (!(d_sige_um >= 0.0)) throw DomainError("WaferStack: d_sige must be >= 0");
        if (!(eps_si > 1.0)) throw DomainError("WaferStack: eps_si must be > 1");
        if (!(ge_fraction >= 0.0 && ge_fraction <= 1.0)) {
            throw DomainError("WaferStack: Ge fraction must lie in [0, 1]");
        }
    }

    double d_si_um() const { return d_si_um_; }
    double d_sige_um() const { return d_sige_um_; }
    double eps_si() const { return eps_si_; }
    double ge_fraction() const { return ge_fraction_; }
    double eps_sige() const { return eps_si_ + sige_slope * ge_fraction_; }
    double total_thickness_um() const { return d_si_um_ + d_sige_um_; }

private:
    double d_si_um_;
    double d_sige_um_;
    double eps_si_;
    double ge_fraction_;
};

class CpwGeometry {
public:
    CpwGeometry(double w_um, double g_um, double length_um, double d_um)
        : w_um_(w_um), g_um_(g_um), length_um_(length_um), d_um_(d_um) {
        if (!(w_um > 0.0)) throw DomainError("CpwGeometry: width must be > 0");
        if (!(g_um > 0.0)) throw DomainError("CpwGeometry: gap must be > 0");
        if (!(length_um > 0.0)) throw DomainError("CpwGeometry: length must be > 0");
        if (!(d_um > 0.0)) throw DomainError("CpwGeometry: wafer thickness must be > 0");
    }

    CpwGeometry(double w_um, double g_um, double length_um, const WaferStack& stack)
        : CpwGeometry(w_um, g_um, length_um, stack.total_thickness_um()) {}

    double w_um() const { return w_um_; }
    double g_um() const { return g_um_; }
    double length_um() const { return length_um_; }
    double d_um() const { return d_um_; }
    double k() const { return w_um_ / (w_um_ + 2.0 * g_um_); }

private:
    double w_um_;
    double g_um_;
    double length_um_;
    double d_um_;
};

/// How the argument of K(.) in the conformal-mapping formulas is interpreted.
///   modulus:   K evaluated at modulus k (textbook form).
///   parameter: the value k is passed as the parameter m, i.e. K_modulus(sqrt(k)).
///              This convention reproduces the measured line parameters of
///              the reference devices (Lg 0.44 uH/m, Cg 0.159 nF/m and the
///              derived Lk / R values), so it is the default.
enum class EllipticArgument { parameter, modulus };

inline double complete_elliptic(double k, EllipticArgument argument) {
    return argument == EllipticArgument::modulus ? numerics::ellip_k(k) : numerics::ellip_k(std::sqrt(k));
}

struct ConformalMapFactors {
    double k = 0.0;
    double k_prime = 0.0;
    double k3 = 0.0;
    double k3_prime = 0.0;
    double k_tilde = 0.0;
    EllipticArgument argument = EllipticArgument::parameter;
};

struct GeometricLine {
    double lg_uh_per_m = 0.0;
    double cg_nf_per_m = 0.0;
};

struct TransmissionLineParams {
    double eps_sub = 0.0;
    double eps_eff = 0.0;
    double lg_uh_per_m = 0.0;
    double cg_nf_per_m = 0.0;
    double f_design_ghz = 0.0;
    double length_um = 0.0;
    std::optional<double> f_measured_ghz;
    std::optional<double> qi;
    std::optional<double> lk_uh_per_m;
    std::optional<double> z_eff_ohm;
    std::optional<double> r_ohm_per_m;
};

inline double substrate_permittivity(const WaferStack& stack) {
    return (stack.d_si_um() * stack.eps_si() + stack.d_sige_um() * stack.eps_sige()) / stack.total_thickness_um();
}

inline ConformalMapFactors conformal_factors(const CpwGeometry& geom,
                                             EllipticArgument argument = EllipticArgument::parameter) {
    using constants::pi;
    ConformalMapFactors f;
    f.argument = argument;
    const double w = geom.w_um();
    const double g = geom.g_um();
    const double d = geom.d_um();
    f.k = w / (w + 2.0 * g);
    f.k3 = std::tanh(w * pi / (4.0 * d)) / std::tanh((w + 2.0 * g) * pi / (4.0 * d));
    f.k_prime = std::sqrt((1.0 - f.k) * (1.0 + f.k));
    f.k3_prime = std::sqrt((1.0 - f.k3) * (1.0 + f.k3));
    f.k_tilde = complete_elliptic(f.k_prime, argument) * complete_elliptic(f.k3, argument) /
                (complete_elliptic(f.k, argument) * complete_elliptic(f.k3_prime, argument));
    return f;
}

inline double effective_permittivity(double eps_sub, const ConformalMapFactors& factors) {
    if (!(eps_sub > 1.0)) throw DomainError("effective_permittivity: eps_sub must be > 1");
    return (1.0 + eps_sub * factors.k_tilde) / (1.0 + factors.k_tilde);
}

inline GeometricLine geometric_line_params(const ConformalMapFactors& factors, double eps_eff) {
    const double kk = complete_elliptic(factors.k, factors.argument);
    const double kk_prime = complete_elliptic(factors.k_prime, factors.argument);
    const double lg = constants::mu0 * kk_prime / (4.0 * kk);
    const double cg = 4.0 * constants::eps0 * eps_eff * kk / kk_prime;
    return {lg * 1e6, cg * 1e9};
}

/// Quarter-wave resonance f = c / (4 L sqrt(eps_eff)), in GHz.
inline double design_frequency(double length_um, double eps_eff) {
    if (!(length_um > 0.0)) throw DomainError("design_frequency: length must be > 0");
    if (!(eps_eff > 0.0)) throw DomainError("design_frequency: eps_eff must be > 0");
    return constants::speed_of_light / (std::sqrt(eps_eff) * 4.0 * length_um * 1e-6) * 1e-9;
}

/// Phase velocity scales as 1/sqrt((Lg + Lk) Cg), so the drop from the
/// geometric design frequency to the measured one fixes Lk.
inline double extract_kinetic_inductance(double f_design_ghz, double f_measured_ghz, double lg_uh_per_m) {
    if (!(f_measured_ghz > 0.0)) throw DomainError("extract_kinetic_inductance: f_measured must be > 0");
    if (f_measured_ghz > f_design_ghz) {
        throw DomainError("extract_kinetic_inductance: f_measured above f_design implies negative Lk");
    }
    const double ratio = f_design_ghz / f_measured_ghz;
    return lg_uh_per_m * (ratio * ratio - 1.0);
}

inline double characteristic_impedance(double lk_uh_per_m, double lg_uh_per_m, double cg_nf_per_m) {
    const double l_total = (lk_uh_per_m + lg_uh_per_m) * 1e-6;
    if (!(l_total > 0.0)) throw DomainError("characteristic_impedance: Lk + Lg must be > 0");
    if (!(cg_nf_per_m > 0.0)) throw DomainError("characteristic_impedance: Cg must be > 0");
    return std::sqrt(l_total / (cg_nf_per_m * 1e-9));
}

/// R = Z_eff / (Qi L), L converted to metres.
inline double extract_resistance(double z_eff_ohm, double qi, double length_um) {
    if (!(qi > 0.0)) throw DomainError("extract_resistance: Qi must be > 0");
    if (!(length_um > 0.0)) throw DomainError("extract_resistance: length must be > 0");
    return z_eff_ohm / (qi * length_um * 1e-6);
}

struct DesignOptions {
    EllipticArgument argument = EllipticArgument::parameter;
};

/// One full line-model row. Lk and Z_eff need f_measured; R needs Qi as well.
inline TransmissionLineParams design_report(const WaferStack& stack, double w_um, double g_um, double length_um,
                                            std::optional<double> f_measured_ghz = std::nullopt,
                                            std::optional<double> qi = std::nullopt,
                                            const DesignOptions& options = {}) {
    const CpwGeometry geom(w_um, g_um, length_um, stack);
    TransmissionLineParams out;
    out.length_um = length_um;
    out.eps_sub = substrate_permittivity(stack);
    const auto factors = conformal_factors(geom, options.argument);
    out.eps_eff = effective_permittivity(out.eps_sub, factors);
    const auto line = geometric_line_params(factors, out.eps_eff);
    out.lg_uh_per_m = line.lg_uh_per_m;
    out.cg_nf_per_m = line.cg_nf_per_m;
    out.f_design_ghz = design_frequency(length_um, out.eps_eff);
    out.f_measured_ghz = f_measured_ghz;
    out.qi = qi;
    if (f_measured_ghz) {
        out.lk_uh_per_m = extract_kinetic_inductance(out.f_design_ghz, *f_measured_ghz, out.lg_uh_per_m);
        out.z_eff_ohm = characteristic_impedance(*out.lk_uh_per_m, out.lg_uh_per_m, out.cg_nf_per_m);
        if (qi) out.r_ohm_per_m = extract_resistance(*out.z_eff_ohm, *qi, length_um);
    }
    return out;
}

}  // namespace cpwres::cpw
