// device.hpp — transmon and waveguide-reflection formulas plus the least-squares fitters

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfsim::device {

using Complex = std::complex<double>;

struct FitReport {
    Eigen::VectorXd params;
    double residual_norm{0.0};
    Eigen::VectorXd confidence;  // linearized 1σ half-widths
    int iterations{0};
    bool converged{false};
    std::string warning;  // empty when clean
};

struct LMOptions {
    int max_iterations{200};
    double gradient_tol{1e-10};
    double step_tol{1e-14};
    double lambda0{1e-3};
};

// Damped Gauss–Newton (Levenberg–Marquardt) driver with analytic Jacobians.
inline FitReport levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian, Eigen::VectorXd p,
    const LMOptions& opts = {}) {
    FitReport rep;
    Eigen::VectorXd r = residual(p);
    double cost = r.squaredNorm();
    double lambda = opts.lambda0;

    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        Eigen::MatrixXd J = jacobian(p);
        Eigen::VectorXd g = J.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < opts.gradient_tol * (1.0 + std::sqrt(cost))) {
            rep.converged = true;
            break;
        }
        Eigen::MatrixXd JtJ = J.transpose() * J;

        bool accepted = false;
        for (int damp = 0; damp < 25; ++damp) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
            Eigen::VectorXd step = A.ldlt().solve(-g);
            Eigen::VectorXd p_new = p + step;
            Eigen::VectorXd r_new = residual(p_new);
            const double cost_new = r_new.squaredNorm();
            if (std::isfinite(cost_new) && cost_new < cost) {
                if (step.norm() < opts.step_tol * (1.0 + p.norm())) {
                    p = p_new;
                    r = r_new;
                    cost = cost_new;
                    rep.converged = true;
                    accepted = true;
                    break;
                }
                p = p_new;
                r = r_new;
                cost = cost_new;
                lambda = std::max(lambda * 0.1, 1e-14);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if (rep.converged) break;
        if (!accepted) break;  // stalled
    }

    rep.params = p;
    rep.iterations = iter;
    rep.residual_norm = std::sqrt(cost);

    // Linearized per-parameter confidence half-widths.
    Eigen::MatrixXd J = jacobian(p);
    const Eigen::Index m = J.rows(), n = J.cols();
    rep.confidence = Eigen::VectorXd::Zero(n);
    if (m > n) {
        const double s2 = cost / static_cast<double>(m - n);
        Eigen::MatrixXd cov = (J.transpose() * J).ldlt().solve(Eigen::MatrixXd::Identity(n, n));
        for (Eigen::Index i = 0; i < n; ++i)
            rep.confidence[i] = std::sqrt(std::max(0.0, s2 * cov(i, i)));
    }
    if (!rep.converged) {
        Eigen::VectorXd g = J.transpose() * r;
        rep.converged = g.cwiseAbs().maxCoeff() < opts.gradient_tol * (1.0 + rep.residual_norm);
    }
    return rep;
}

// ------------------------------ transmon spectrum ----------------------------

struct TransmonParams {
    double E_J{13.25};  // GHz
    double E_C{0.625};  // GHz

    void validate() const {
        if (!(E_J > E_C && E_C > 0.0))
            throw std::invalid_argument("TransmonParams: transmon regime requires E_J > E_C > 0");
    }
};

// Transition frequency |n⟩→|n+1⟩ in GHz at relative flux δφ/φ₀.
inline double transmon_transition(const TransmonParams& p, double flux_ratio, int level = 0) {
    p.validate();
    const double c = std::cos(std::numbers::pi * flux_ratio);
    if (!(c > 0.0))
        throw std::invalid_argument("transmon_transition: flux outside the positive-plasma branch");
    return std::sqrt(8.0 * p.E_J * p.E_C * c) - p.E_C * (level + 1);
}

struct TransmonSample {
    double flux_ratio;
    double freq_ghz;
    int level{0};  // 0 for E01, 1 for E12
};

inline FitReport fit_transmon(const std::vector<TransmonSample>& data) {
    if (data.size() < 4) throw std::invalid_argument("fit_transmon: need at least 4 samples");
    double fmin = data.front().flux_ratio, fmax = fmin;
    for (const auto& s : data) {
        fmin = std::min(fmin, s.flux_ratio);
        fmax = std::max(fmax, s.flux_ratio);
    }
    const double c_lo = std::cos(std::numbers::pi * fmin), c_hi = std::cos(std::numbers::pi * fmax);
    if (std::abs(std::sqrt(std::max(c_lo, 0.0)) - std::sqrt(std::max(c_hi, 0.0))) < 1e-6)
        throw std::invalid_argument("fit_transmon: degenerate design (all samples at one flux)");

    // Initial guess from the two extreme-flux samples of the lowest branch.
    const TransmonSample* lo = nullptr;
    const TransmonSample* hi = nullptr;
    for (const auto& s : data) {
        if (s.level != 0) continue;
        if (!lo || s.flux_ratio < lo->flux_ratio) lo = &s;
        if (!hi || s.flux_ratio > hi->flux_ratio) hi = &s;
    }
    if (!lo || !hi) lo = hi = &data.front();
    const double s1 = std::sqrt(std::max(std::cos(std::numbers::pi * lo->flux_ratio), 1e-6));
    const double s2 = std::sqrt(std::max(std::cos(std::numbers::pi * hi->flux_ratio), 1e-6));
    double A = std::abs(s1 - s2) > 1e-9 ? (lo->freq_ghz - hi->freq_ghz) / (s1 - s2)
                                        : lo->freq_ghz / s1;
    double E_C = std::max(A * s1 - lo->freq_ghz, 0.05);
    double E_J = A * A / (8.0 * E_C);

    auto residual = [&data](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double c = std::max(std::cos(std::numbers::pi * data[i].flux_ratio), 1e-12);
            const double f = std::sqrt(std::max(8.0 * p[0] * p[1] * c, 1e-300)) -
                             p[1] * (data[i].level + 1);
            r[static_cast<Eigen::Index>(i)] = f - data[i].freq_ghz;
        }
        return r;
    };
    auto jac = [&data](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J(data.size(), 2);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double c = std::max(std::cos(std::numbers::pi * data[i].flux_ratio), 1e-12);
            const double plasma = std::sqrt(std::max(8.0 * p[0] * p[1] * c, 1e-300));
            J(static_cast<Eigen::Index>(i), 0) = plasma / (2.0 * p[0]);
            J(static_cast<Eigen::Index>(i), 1) = plasma / (2.0 * p[1]) - (data[i].level + 1);
        }
        return J;
    };

    Eigen::VectorXd p0(2);
    p0 << E_J, E_C;
    FitReport rep = levenberg_marquardt(residual, jac, p0);
    if (!rep.converged) throw std::runtime_error("fit_transmon: no convergence");
    return rep;
}

// ---------------------------- waveguide reflection ---------------------------

// Reflection coefficient of the waveguide-coupled atom under a drive of Rabi
// amplitude Omega, probed at detuning delta_omega. All rates share one unit.
inline Complex reflection_coefficient(double delta_omega, double Omega, double gamma_1,
                                      double gamma_2, double gamma_e) {
    if (!(gamma_1 > 0.0) || !(gamma_2 > 0.0))
        throw std::invalid_argument("reflection_coefficient: gamma_1 and gamma_2 must be positive");
    const double denom = 1.0 + (delta_omega / gamma_2) * (delta_omega / gamma_2) +
                         Omega * Omega / (gamma_1 * gamma_2);
    const Complex num = Complex(1.0, -delta_omega / gamma_2);
    return 1.0 - (gamma_e / gamma_2) * num / denom;
}

// Weak-drive limit: a circle of radius γ_e/2γ₂ centred at 1 − γ_e/2γ₂.
inline Complex reflection_weak(double delta_omega, double gamma_2, double gamma_e) {
    return 1.0 - (gamma_e / gamma_2) / Complex(1.0, delta_omega / gamma_2);
}

struct ReflectionSample {
    double delta_omega;
    Complex r;
};

// Complex-residual least squares on the reflection model. In the weak-drive
// mode gamma_1 is unidentifiable and must be pinned by the caller.
inline FitReport fit_reflection(const std::vector<ReflectionSample>& data, double Omega,
                                std::optional<double> gamma_1_fixed = std::nullopt) {
    if (data.size() < 6) throw std::invalid_argument("fit_reflection: need at least 6 samples");
    const bool fit_gamma1 = !gamma_1_fixed.has_value();

    // Initial guesses from the dip shape: depth → γ_e/γ₂, half-width → γ₂.
    double depth = 0.0, center_mag = 0.0;
    double wmin = data.front().delta_omega, wmax = wmin;
    for (const auto& s : data) {
        const double d = std::abs(1.0 - s.r);
        if (d > depth) depth = d;
        wmin = std::min(wmin, s.delta_omega);
        wmax = std::max(wmax, s.delta_omega);
        if (std::abs(s.delta_omega) < 1e-12) center_mag = d;
    }
    (void)center_mag;
    double g2_0 = 0.0;
    int crossings = 0;
    for (const auto& s : data)
        if (std::abs(1.0 - s.r) > 0.5 * depth) {
            g2_0 = std::max(g2_0, std::abs(s.delta_omega));
            ++crossings;
        }
    if (g2_0 <= 0.0 || crossings < 2) g2_0 = 0.25 * (wmax - wmin);
    double ge_0 = std::min(depth * g2_0 > 0 ? depth * g2_0 / g2_0 * g2_0 : g2_0, 2.0 * g2_0);
    ge_0 = depth * g2_0;

    auto model = [&](const Eigen::VectorXd& p, double w) {
        const double g1 = fit_gamma1 ? p[2] : *gamma_1_fixed;
        return reflection_coefficient(w, Omega, std::max(g1, 1e-9), std::max(p[1], 1e-9),
                                      p[0]);
    };
    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(2 * data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Complex diff = model(p, data[i].delta_omega) - data[i].r;
            r[2 * static_cast<Eigen::Index>(i)] = diff.real();
            r[2 * static_cast<Eigen::Index>(i) + 1] = diff.imag();
        }
        return r;
    };
    auto jac = [&](const Eigen::VectorXd& p) {
        const int np = fit_gamma1 ? 3 : 2;
        Eigen::MatrixXd J(2 * data.size(), np);
        const double ge = p[0], g2 = std::max(p[1], 1e-9);
        const double g1 = fit_gamma1 ? std::max(p[2], 1e-9) : *gamma_1_fixed;
        const double W = Omega * Omega / g1;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double w = data[i].delta_omega;
            const Complex z(1.0, -w / g2);
            const double D = 1.0 + (w / g2) * (w / g2) + W / g2;
            const Complex dr_dge = -z / (g2 * D);
            const double u = ge / g2;
            const Complex zp(0.0, w / (g2 * g2));
            const double Dp = -2.0 * w * w / (g2 * g2 * g2) - W / (g2 * g2);
            const Complex dr_dg2 = -((-ge / (g2 * g2)) * z / D + u * zp / D - u * z * Dp / (D * D));
            const Eigen::Index k = 2 * static_cast<Eigen::Index>(i);
            J(k, 0) = dr_dge.real();
            J(k + 1, 0) = dr_dge.imag();
            J(k, 1) = dr_dg2.real();
            J(k + 1, 1) = dr_dg2.imag();
            if (fit_gamma1) {
                const double dD_dg1 = -Omega * Omega / (g1 * g1 * g2);
                const Complex dr_dg1 = u * z * dD_dg1 / (D * D);
                J(k, 2) = dr_dg1.real();
                J(k + 1, 2) = dr_dg1.imag();
            }
        }
        return J;
    };

    Eigen::VectorXd p0(fit_gamma1 ? 3 : 2);
    p0[0] = std::max(ge_0, 1e-3);
    p0[1] = std::max(g2_0, 1e-3);
    if (fit_gamma1) p0[2] = std::max(g2_0, 1e-3);
    FitReport rep = levenberg_marquardt(residual, jac, p0);
    if (!rep.converged) throw std::runtime_error("fit_reflection: no convergence");
    if (fit_gamma1 && rep.params[1] < 0.5 * rep.params[2] - 1e-9)
        rep.warning = "gamma_2 below gamma_1/2";
    return rep;
}

// -------------------------------- curve fits ---------------------------------

// Lorentzian: y = offset + height·(w/2)² / ((x−x0)² + (w/2)²), params
// (center, fwhm, height, offset).
inline FitReport fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 5)
        throw std::invalid_argument("fit_lorentzian: need at least 5 points");
    const std::size_t n = x.size();
    std::size_t imax = 0;
    double ymin = y[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] > y[imax]) imax = i;
        ymin = std::min(ymin, y[i]);
    }
    std::string warning;
    if (imax == 0 || imax + 1 == n) warning = "peak at range boundary";

    const double off0 = ymin;
    const double h0 = std::max(y[imax] - ymin, 1e-300);
    const double half = off0 + 0.5 * h0;
    double xl = x.front(), xr = x.back();
    for (std::size_t i = imax; i-- > 0;)
        if (y[i] < half) {
            xl = x[i];
            break;
        }
    for (std::size_t i = imax + 1; i < n; ++i)
        if (y[i] < half) {
            xr = x[i];
            break;
        }
    const double w0 = std::max(xr - xl, std::abs(x[1] - x[0]));

    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        const double q = 0.25 * p[1] * p[1];
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = x[i] - p[0];
            r[static_cast<Eigen::Index>(i)] = p[3] + p[2] * q / (dx * dx + q) - y[i];
        }
        return r;
    };
    auto jac = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J(n, 4);
        const double q = 0.25 * p[1] * p[1];
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = x[i] - p[0];
            const double den = dx * dx + q;
            const Eigen::Index k = static_cast<Eigen::Index>(i);
            J(k, 0) = p[2] * q * 2.0 * dx / (den * den);
            J(k, 1) = p[2] * (0.5 * p[1]) * dx * dx / (den * den);
            J(k, 2) = q / den;
            J(k, 3) = 1.0;
        }
        return J;
    };

    Eigen::VectorXd p0(4);
    p0 << x[imax], w0, h0, off0;
    FitReport rep = levenberg_marquardt(residual, jac, p0);
    if (!rep.converged) throw std::runtime_error("fit_lorentzian: no convergence");
    rep.params[1] = std::abs(rep.params[1]);
    // Flag shapes a single Lorentzian cannot represent (e.g. merged peaks).
    const double rms = rep.residual_norm / std::sqrt(static_cast<double>(n));
    if (rms > 5e-3 * std::abs(rep.params[2])) {
        if (!warning.empty()) warning += "; ";
        warning += "poor single-peak fit (possible merged peaks)";
    }
    rep.warning = warning;
    return rep;
}

// Single-resonance lineshape with a dispersive admixture sharing the same
// center and width: y = offset + [A·q + B·√q·(x−x0)]/((x−x0)² + q), q = (w/2)².
// Params (center, fwhm, height A, dispersive B, offset). B = 0 is a Lorentzian;
// the B term captures the asymmetry a complex-weighted resonance mode carries,
// so the fitted center tracks the mode frequency rather than the skewed maximum.
inline FitReport fit_resonance(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 6)
        throw std::invalid_argument("fit_resonance: need at least 6 points");
    const std::size_t n = x.size();
    std::size_t imax = 0;
    double ymin = y[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] > y[imax]) imax = i;
        ymin = std::min(ymin, y[i]);
    }
    const double off0 = ymin;
    const double h0 = std::max(y[imax] - ymin, 1e-300);
    const double half = off0 + 0.5 * h0;
    double xl = x.front(), xr = x.back();
    for (std::size_t i = imax; i-- > 0;)
        if (y[i] < half) {
            xl = x[i];
            break;
        }
    for (std::size_t i = imax + 1; i < n; ++i)
        if (y[i] < half) {
            xr = x[i];
            break;
        }
    const double w0 = std::max(xr - xl, std::abs(x[1] - x[0]));

    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        const double q = 0.25 * p[1] * p[1];
        const double sq = std::sqrt(q);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = x[i] - p[0];
            r[static_cast<Eigen::Index>(i)] = p[4] + (p[2] * q + p[3] * sq * u) / (u * u + q) - y[i];
        }
        return r;
    };
    auto jac = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J(n, 5);
        const double q = 0.25 * p[1] * p[1];
        const double sq = std::sqrt(q);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = x[i] - p[0];
            const double den = u * u + q;
            const double num = p[2] * q + p[3] * sq * u;
            const Eigen::Index k = static_cast<Eigen::Index>(i);
            J(k, 0) = (-p[3] * sq * den + 2.0 * u * num) / (den * den);
            J(k, 1) = ((p[2] * 0.5 * p[1] + p[3] * 0.5 * u) * den - num * 0.5 * p[1]) / (den * den);
            J(k, 2) = q / den;
            J(k, 3) = sq * u / den;
            J(k, 4) = 1.0;
        }
        return J;
    };

    Eigen::VectorXd p0(5);
    p0 << x[imax], w0, h0, 0.0, off0;
    FitReport rep = levenberg_marquardt(residual, jac, p0);
    if (!rep.converged) throw std::runtime_error("fit_resonance: no convergence");
    rep.params[1] = std::abs(rep.params[1]);
    return rep;
}

struct ResonanceGuess {
    double center;
    double fwhm;
    double height;
};

// Joint fit of K overlapping resonances plus a common offset:
// y = offset + Σ_k [A_k·q_k + B_k·√q_k·(x−c_k)]/((x−c_k)² + q_k).
// Params: [offset, (c, fwhm, A, B)·K]. Overlapping tails are modelled rather
// than truncated, so centers and widths stay unbiased in multiplets.
inline FitReport fit_multi_resonance(const std::vector<double>& x, const std::vector<double>& y,
                                     const std::vector<ResonanceGuess>& guesses) {
    const std::size_t n = x.size();
    const std::size_t K = guesses.size();
    if (n != y.size() || K == 0 || n < 4 * K + 1)
        throw std::invalid_argument("fit_multi_resonance: inconsistent or insufficient data");

    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = p[0];
            for (std::size_t k = 0; k < K; ++k) {
                const double c = p[1 + 4 * k], w = p[2 + 4 * k], A = p[3 + 4 * k],
                             B = p[4 + 4 * k];
                const double q = 0.25 * w * w;
                const double u = x[i] - c;
                v += (A * q + B * std::sqrt(q) * u) / (u * u + q);
            }
            r[static_cast<Eigen::Index>(i)] = v - y[i];
        }
        return r;
    };
    auto jac = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, 1 + 4 * K);
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(i);
            J(row, 0) = 1.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double c = p[1 + 4 * k], w = p[2 + 4 * k], A = p[3 + 4 * k],
                             B = p[4 + 4 * k];
                const double q = 0.25 * w * w;
                const double sq = std::sqrt(q);
                const double u = x[i] - c;
                const double den = u * u + q;
                const double num = A * q + B * sq * u;
                J(row, 1 + 4 * k) = (-B * sq * den + 2.0 * u * num) / (den * den);
                J(row, 2 + 4 * k) = ((A * 0.5 * w + B * 0.5 * u) * den - num * 0.5 * w) / (den * den);
                J(row, 3 + 4 * k) = q / den;
                J(row, 4 + 4 * k) = sq * u / den;
            }
        }
        return J;
    };

    double ymin = y[0];
    for (double v : y) ymin = std::min(ymin, v);
    Eigen::VectorXd p0(1 + 4 * K);
    p0[0] = ymin;
    for (std::size_t k = 0; k < K; ++k) {
        p0[1 + 4 * k] = guesses[k].center;
        p0[2 + 4 * k] = guesses[k].fwhm;
        p0[3 + 4 * k] = guesses[k].height;
        p0[4 + 4 * k] = 0.0;
    }
    FitReport rep = levenberg_marquardt(residual, jac, p0);
    if (!rep.converged) throw std::runtime_error("fit_multi_resonance: no convergence");
    for (std::size_t k = 0; k < K; ++k) rep.params[2 + 4 * k] = std::abs(rep.params[2 + 4 * k]);
    return rep;
}

// Exponential decay: y = amplitude·e^{−t/T1} + offset, params (amplitude, T1, offset).
inline FitReport fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size() || t.size() < 5)
        throw std::invalid_argument("fit_exponential: need at least 5 points");
    const std::size_t n = t.size();
    const std::size_t head = std::max<std::size_t>(1, n / 10);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < head; ++i) first += y[i];
    for (std::size_t i = n - head; i < n; ++i) last += y[i];
    first /= head;
    last /= head;
    if (last > first + 1e-12 * std::max(std::abs(first), 1.0))
        throw std::invalid_argument("fit_exponential: growth detected");

    double off0 = last;
    double amp0 = std::max(first - off0, 1e-300);
    // Log-linear slope over the early segment for the initial decay time.
    double sxx = 0.0, sxy = 0.0, sx = 0.0, sy = 0.0;
    int cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = y[i] - off0;
        if (v <= 1e-12 * amp0) continue;
        const double ly = std::log(v);
        sx += t[i];
        sy += ly;
        sxx += t[i] * t[i];
        sxy += t[i] * ly;
        ++cnt;
        if (cnt > static_cast<int>(n) / 2 && i > n / 2) break;
    }
    double T0 = 0.25 * (t.back() - t.front());
    if (cnt >= 2) {
        const double slope = (cnt * sxy - sx * sy) / std::max(cnt * sxx - sx * sx, 1e-300);
        if (slope < -1e-12) T0 = -1.0 / slope;
    }

    auto residual = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i)
            r[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-t[i] / p[1]) + p[2] - y[i];
        return r;
    };
    auto jac = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J(n, 3);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-t[i] / p[1]);
            const Eigen::Index k = static_cast<Eigen::Index>(i);
            J(k, 0) = e;
            J(k, 1) = p[0] * e * t[i] / (p[1] * p[1]);
            J(k, 2) = 1.0;
        }
        return J;
    };

    Eigen::VectorXd p0(3);
    p0 << amp0, std::max(T0, 1e-6), off0;
    FitReport rep = levenberg_marquardt(residual, jac, p0);
    if (!rep.converged) throw std::runtime_error("fit_exponential: no convergence");
    return rep;
}

}  // namespace rfsim::device
