#pragma once

// Input-power bookkeeping and average intra-resonator photon number.

#include <cmath>

#include "cpwres/constants.hpp"
#include "cpwres/errors.hpp"

namespace cpwres::photon {

struct PowerContext {
    double p_vna_dbm = 0.0;
    double p_att_db = 0.0;  // negative for attenuation
    double p_in_dbm = 0.0;
    double p_in_w = 0.0;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline PowerContext input_power(double p_vna_dbm, double p_att_db) {
    PowerContext ctx;
    ctx.p_vna_dbm = p_vna_dbm;
    ctx.p_att_db = p_att_db;
    ctx.p_in_dbm = p_vna_dbm + p_att_db;
    ctx.p_in_w = dbm_to_watts(ctx.p_in_dbm);
    return ctx;
}

struct PhotonCalc {
    double s21_res_power_ratio = 0.0;  // |S21|^2 on resonance
    double s11_res_power_ratio = 0.0;  // |S11|^2 on resonance
    double p_loss_w = 0.0;
    double n_ph = 0.0;
};

/// On resonance |S21|^2 = (1 - Ql/|Qc|)^2 and |S11|^2 = (Ql/|Qc|)^2; the
/// remainder of P_in is dissipated, and <n> = Qi P_loss / (hbar w^2).
/// The impedance-mismatch angle does not enter.
inline PhotonCalc photon_number(double ql, double qc_mag, double qi, double fr_hz, double p_in_w) {
    if (!(ql > 0.0) || !(qc_mag > 0.0) || !(qi > 0.0)) {
        throw DomainError("photon_number: quality factors must be > 0");
    }
    if (!(fr_hz > 0.0)) throw DomainError("photon_number: fr must be > 0");
    if (!(p_in_w >= 0.0)) throw DomainError("photon_number: P_in must be >= 0");
    if (ql > qc_mag) throw UnphysicalError("photon_number: Ql > |Qc| makes the dissipated power negative");

    const double ratio = ql / qc_mag;
    PhotonCalc out;
    out.s21_res_power_ratio = (1.0 - ratio) * (1.0 - ratio);
    out.s11_res_power_ratio = ratio * ratio;
    // 1 - (1 - q)^2 - q^2 written without the cancellation.
    const double loss_fraction = 2.0 * ratio * (1.0 - ratio);
    out.p_loss_w = p_in_w * loss_fraction;
    const double omega = 2.0 * constants::pi * fr_hz;
    out.n_ph = qi * out.p_loss_w / (constants::hbar * omega * omega);
    return out;
}

}  // namespace cpwres::photon
