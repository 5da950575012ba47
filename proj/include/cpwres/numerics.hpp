#pragma once

// Numerical kernels shared by the design, fitting and loss-model code:
// complete elliptic integral K(k), algebraic circle fit, a bracketed scalar
// minimizer and a damped (Levenberg-Marquardt) nonlinear least-squares solver.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cpwres/constants.hpp"
#include "cpwres/errors.hpp"

namespace cpwres::numerics {

/// Arithmetic-geometric mean of two non-negative numbers.
inline double agm(double a, double b) {
    if (!(a >= 0.0) || !(b >= 0.0)) {
        throw DomainError("agm: arguments must be non-negative");
    }
    for (int i = 0; i < 64; ++i) {
        const double an = 0.5 * (a + b);
        const double bn = std::sqrt(a * b);
        a = an;
        b = bn;
        if (std::abs(a - b) <= 4.0 * std::numeric_limits<double>::epsilon() * a) break;
    }
    return 0.5 * (a + b);
}

/// Complete elliptic integral of the first kind, K(k) = int_0^{pi/2} dt / sqrt(1 - k^2 sin^2 t).
/// The argument is the modulus k (not the parameter m = k^2).
inline double ellip_k(double k) {
    if (!(k >= 0.0) || !(k < 1.0)) {
        throw DomainError("ellip_k: modulus must satisfy 0 <= k < 1");
    }
    const double k_prime = std::sqrt((1.0 - k) * (1.0 + k));
    return constants::pi / (2.0 * agm(1.0, k_prime));
}

struct Point2D {
    double x = 0.0;
    double y = 0.0;
};

struct Circle2D {
    double center_x = 0.0;
    double center_y = 0.0;
    double radius = 0.0;

    std::complex<double> center() const { return {center_x, center_y}; }
};

/// Algebraic circle fit (Taubin, solved by Newton iteration on the
/// characteristic polynomial as in Chernov's reference implementation).
/// Points are centred and scaled before the moments are taken so the fit is
/// invariant under translation, rotation and uniform scaling.
inline Circle2D fit_circle(std::span<const Point2D> points) {
    const std::size_t n = points.size();
    if (n < 3) throw DomainError("fit_circle: need at least 3 points");

    double mean_x = 0.0;
    double mean_y = 0.0;
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw DomainError("fit_circle: non-finite point");
        }
        mean_x += p.x;
        mean_y += p.y;
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double scale = 0.0;
    for (const auto& p : points) {
        scale += (p.x - mean_x) * (p.x - mean_x) + (p.y - mean_y) * (p.y - mean_y);
    }
    scale = std::sqrt(scale / static_cast<double>(n));
    if (!(scale > 0.0)) throw DegenerateGeometryError("fit_circle: all points coincide");

    double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
    for (const auto& p : points) {
        const double xi = (p.x - mean_x) / scale;
        const double yi = (p.y - mean_y) / scale;
        const double zi = xi * xi + yi * yi;
        mxy += xi * yi;
        mxx += xi * xi;
        myy += yi * yi;
        mxz += xi * zi;
        myz += yi * zi;
        mzz += zi * zi;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    mxx *= inv_n;
    myy *= inv_n;
    mxy *= inv_n;
    mxz *= inv_n;
    myz *= inv_n;
    mzz *= inv_n;

    const double mz = mxx + myy;
    const double cov_xy = mxx * myy - mxy * mxy;
    const double var_z = mzz - mz * mz;
    const double a3 = 4.0 * mz;
    const double a2 = -3.0 * mz * mz - mzz;
    const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    const double a22 = a2 + a2;
    const double a33 = a3 + a3 + a3;

    double x = 0.0;
    double y = std::numeric_limits<double>::max();
    for (int iter = 0; iter < 99; ++iter) {
        const double y_old = y;
        y = a0 + x * (a1 + x * (a2 + x * a3));
        if (std::abs(y) > std::abs(y_old)) {
            x = 0.0;
            break;
        }
        const double dy = a1 + x * (a22 + x * a33);
        if (dy == 0.0) break;
        const double x_old = x;
        x = x_old - y / dy;
        if (std::abs(x - x_old) <= 1e-15 * std::max(std::abs(x), 1e-300)) break;
        if (x < 0.0) {
            x = 0.0;
            break;
        }
    }

    const double det = x * x - x * mz + cov_xy;
    if (!(std::abs(det) > 1e-12)) {
        throw DegenerateGeometryError("fit_circle: points are collinear");
    }
    const double cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    const double cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    const double r = std::sqrt(cx * cx + cy * cy + mz);
    if (!std::isfinite(r) || !(r > 0.0)) {
        throw DegenerateGeometryError("fit_circle: no finite circle through the points");
    }
    return {cx * scale + mean_x, cy * scale + mean_y, r * scale};
}

inline Circle2D fit_circle(std::span<const std::complex<double>> points) {
    std::vector<Point2D> xy;
    xy.reserve(points.size());
    for (const auto& z : points) xy.push_back({z.real(), z.imag()});
    return fit_circle(std::span<const Point2D>(xy));
}

inline Circle2D fit_circle(const std::vector<std::complex<double>>& points) {
    return fit_circle(std::span<const std::complex<double>>(points));
}

/// Brent minimization of a scalar function on [lo, hi].
template <class F>
double minimize_scalar(F&& f, double lo, double hi, double rel_tol = 1e-12, double abs_tol = 0.0,
                       int max_iter = 200) {
    constexpr double golden = 0.3819660112501051;
    double a = std::min(lo, hi);
    double b = std::max(lo, hi);
    double x = a + golden * (b - a);
    double w = x;
    double v = x;
    double fx = f(x);
    double fw = fx;
    double fv = fx;
    double d = 0.0;
    double e = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
        const double xm = 0.5 * (a + b);
        const double tol1 = rel_tol * std::abs(x) + abs_tol + 1e-300;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
        bool golden_step = true;
        if (std::abs(e) > tol1) {
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            const double e_prev = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
                golden_step = false;
            }
        }
        if (golden_step) {
            e = (x >= xm) ? a - x : b - x;
            d = golden * e;
        }
        const double u = std::abs(d) >= tol1 ? x + d : x + (d >= 0 ? tol1 : -tol1);
        const double fu = f(u);
        if (fu <= fx) {
            if (u >= x) a = x; else b = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Nonlinear least squares

struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct LeastSquaresOptions {
    double step_tolerance = 1e-10;       // max_i |dx_i| / (|x_i| + tol)
    double reduction_tolerance = 1e-12;  // relative decrease of the squared residual
    int max_iterations = 500;
    double initial_damping = 1e-6;       // relative to diag(J^T J)
};

struct LeastSquaresReport {
    Eigen::VectorXd parameters;
    std::optional<Eigen::MatrixXd> covariance;  // empty when J^T J is singular or m <= p
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFunction = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

namespace detail {

inline Eigen::VectorXd clamp_to(const Eigen::VectorXd& x, const std::optional<Bounds>& bounds) {
    if (!bounds) return x;
    return x.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
}

/// Central differences with step max(1e-8 |p|, 1e-12); one-sided at a bound.
inline Eigen::MatrixXd finite_difference_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& fx, const std::optional<Bounds>& bounds) {
    Eigen::MatrixXd jac(fx.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = std::max(1e-8 * std::abs(x[i]), 1e-12);
        Eigen::VectorXd xp = x;
        Eigen::VectorXd xm = x;
        xp[i] += h;
        xm[i] -= h;
        const bool up_ok = !bounds || xp[i] <= bounds->upper[i];
        const bool down_ok = !bounds || xm[i] >= bounds->lower[i];
        if (up_ok && down_ok) {
            jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
        } else if (up_ok) {
            jac.col(i) = (f(xp) - fx) / h;
        } else {
            jac.col(i) = (fx - f(xm)) / h;
        }
    }
    return jac;
}

/// sigma^2 (J^T J)^-1, computed on the column-equilibrated normal matrix.
inline std::optional<Eigen::MatrixXd> covariance_from(const Eigen::MatrixXd& jac, double sum_squares) {
    const Eigen::Index m = jac.rows();
    const Eigen::Index p = jac.cols();
    if (m <= p) return std::nullopt;
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    Eigen::VectorXd scale(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(normal(i, i) > 0.0) || !std::isfinite(normal(i, i))) return std::nullopt;
        scale[i] = 1.0 / std::sqrt(normal(i, i));
    }
    const Eigen::MatrixXd scaled = scale.asDiagonal() * normal * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
    if (eig.info() != Eigen::Success) return std::nullopt;
    const double max_ev = eig.eigenvalues().maxCoeff();
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(min_ev > 1e-14 * max_ev)) return std::nullopt;
    const Eigen::MatrixXd inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                                eig.eigenvectors().transpose();
    const double sigma2 = sum_squares / static_cast<double>(m - p);
    Eigen::MatrixXd cov = sigma2 * (scale.asDiagonal() * inv * scale.asDiagonal());
    cov = 0.5 * (cov + cov.transpose()).eval();
    return cov;
}

}  // namespace detail

/// Levenberg-Marquardt with Marquardt diagonal scaling and Nielsen's damping
/// update. Box bounds are honoured by projecting each trial point. The
/// Jacobian is taken from `jacobian` when supplied, otherwise by central
/// finite differences.
inline LeastSquaresReport least_squares(const ResidualFunction& residual_fn, const Eigen::VectorXd& initial,
                                        const std::optional<Bounds>& bounds = std::nullopt,
                                        const LeastSquaresOptions& options = {},
                                        const JacobianFunction& jacobian = nullptr) {
    const Eigen::Index p = initial.size();
    if (bounds) {
        if (bounds->lower.size() != p || bounds->upper.size() != p) {
            throw DomainError("least_squares: bounds dimension mismatch");
        }
        for (Eigen::Index i = 0; i < p; ++i) {
            if (initial[i] < bounds->lower[i] || initial[i] > bounds->upper[i]) {
                throw DomainError("least_squares: initial point outside bounds");
            }
        }
    }

    Eigen::VectorXd x = initial;
    Eigen::VectorXd r = residual_fn(x);
    if (!r.allFinite()) throw DomainError("least_squares: residual not finite at the initial point");
    auto jac_at = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& r_at) {
        return jacobian ? jacobian(at) : detail::finite_difference_jacobian(residual_fn, at, r_at, bounds);
    };
    Eigen::MatrixXd jac = jac_at(x, r);
    double cost = r.squaredNorm();

    LeastSquaresReport report;
    double mu = -1.0;
    double nu = 2.0;
    int iter = 0;
    bool converged = false;

    while (iter < options.max_iterations) {
        if (cost == 0.0) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd a = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() == 0.0 || !g.allFinite()) {
            converged = g.allFinite();
            break;
        }
        Eigen::VectorXd diag = a.diagonal();
        const double diag_max = diag.maxCoeff();
        for (Eigen::Index i = 0; i < p; ++i) {
            if (!(diag[i] > 1e-300)) diag[i] = std::max(diag_max * 1e-12, 1e-300);
        }
        if (mu < 0.0) mu = options.initial_damping;

        Eigen::MatrixXd damped = a;
        damped.diagonal() += mu * diag;
        const Eigen::VectorXd step = damped.ldlt().solve(-g);
        ++iter;
        if (!step.allFinite()) {
            mu *= nu;
            nu *= 2.0;
            continue;
        }
        const Eigen::VectorXd x_new = detail::clamp_to(x + step, bounds);
        const Eigen::VectorXd h = x_new - x;

        bool small_step = true;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (std::abs(h[i]) > options.step_tolerance * (std::abs(x[i]) + options.step_tolerance)) {
                small_step = false;
                break;
            }
        }
        if (small_step) {
            converged = true;
            break;
        }

        const Eigen::VectorXd r_new = residual_fn(x_new);
        const double cost_new = r_new.allFinite() ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
        const double predicted = cost - (r + jac * h).squaredNorm();
        const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;

        if (rho > 0.0 && cost_new < cost) {
            const double rel_decrease = (cost - cost_new) / cost;
            x = x_new;
            r = r_new;
            cost = cost_new;
            jac = jac_at(x, r);
            const double t = 2.0 * rho - 1.0;
            mu *= std::max(0.1, 1.0 - t * t * t);
            nu = 2.0;
            if (rel_decrease < options.reduction_tolerance) {
                converged = true;
                break;
            }
        } else {
            mu *= nu;
            nu *= 2.0;
            if (mu > 1e30) {
                // Damping has grown without producing a decrease: x is a
                // minimum to working precision.
                converged = true;
                break;
            }
        }
    }

    report.parameters = x;
    report.residual_norm = std::sqrt(cost);
    report.iterations = iter;
    report.converged = converged;
    report.covariance = detail::covariance_from(jac, cost);
    return report;
}

}  // namespace cpwres::numerics
