// oracles.hpp — independent reference implementations used only by the tests.
// Nothing here may call into the library paths under test.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace oracles {

// Optical Bloch equations for a resonantly driven two-level atom, integrated
// with a fixed-step classical RK4. State is (⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩); rates are
// angular (rad/µs).
struct BlochParams {
    double omega{0.0};    // Rabi drive, rad/µs
    double gamma1{0.0};   // energy relaxation
    double gamma2{0.0};   // total dephasing
};

inline std::array<double, 3> bloch_rhs(const BlochParams& p, const std::array<double, 3>& s) {
    return {-p.gamma2 * s[0],
            -p.gamma2 * s[1] - p.omega * s[2],
            p.omega * s[1] - p.gamma1 * (s[2] + 1.0)};
}

inline std::vector<std::array<double, 3>> bloch_integrate(const BlochParams& p,
                                                          std::array<double, 3> s0,
                                                          const std::vector<double>& grid,
                                                          double h = 1e-4) {
    std::vector<std::array<double, 3>> out;
    out.reserve(grid.size());
    double t = grid.front();
    std::array<double, 3> s = s0;
    out.push_back(s);
    auto step = [&](double dt) {
        auto k1 = bloch_rhs(p, s);
        std::array<double, 3> tmp;
        for (int i = 0; i < 3; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
        auto k2 = bloch_rhs(p, tmp);
        for (int i = 0; i < 3; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
        auto k3 = bloch_rhs(p, tmp);
        for (int i = 0; i < 3; ++i) tmp[i] = s[i] + dt * k3[i];
        auto k4 = bloch_rhs(p, tmp);
        for (int i = 0; i < 3; ++i) s[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    };
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double target = grid[g];
        while (t < target - 1e-12) {
            const double dt = std::min(h, target - t);
            step(dt);
            t += dt;
        }
        out.push_back(s);
    }
    return out;
}

// Stationary Bloch vector by direct 3x3 linear solve.
inline std::array<double, 3> bloch_steady(const BlochParams& p) {
    Eigen::Matrix3d M;
    M << -p.gamma2, 0.0, 0.0,
          0.0, -p.gamma2, -p.omega,
          0.0, p.omega, -p.gamma1;
    Eigen::Vector3d rhs(0.0, 0.0, p.gamma1);
    Eigen::Vector3d s = M.colPivHouseholderQr().solve(rhs);
    return {s[0], s[1], s[2]};
}

// Regression of ⟨σ₊(0)σ₋(τ)⟩ for the driven two-level atom: the same Bloch
// generator applied to the operator-weighted initial condition. Works directly
// with the 2x2 matrix X(τ) obeying the master equation.
inline std::vector<std::complex<double>> two_level_regression(
    const BlochParams& p, const Eigen::Matrix2cd& rho_ss, const std::vector<double>& tau_grid,
    double h = 1e-4) {
    using C = std::complex<double>;
    using M2 = Eigen::Matrix2cd;
    M2 sm = M2::Zero(), sp = M2::Zero(), sz = M2::Zero();
    sm(0, 1) = 1.0;
    sp(1, 0) = 1.0;
    sz(0, 0) = -1.0;
    sz(1, 1) = 1.0;
    const double gphi = p.gamma2 - 0.5 * p.gamma1;
    M2 H = 0.5 * p.omega * (sm + sp);
    auto rhs = [&](const M2& X) -> M2 {
        M2 out = C(0, -1) * (H * X - X * H);
        out += 0.5 * p.gamma1 * (2.0 * sm * X * sp - sp * sm * X - X * sp * sm);
        out += 0.25 * gphi * (2.0 * sz * X * sz - 2.0 * X);
        return out;
    };
    M2 X = rho_ss * sp;
    std::vector<C> out;
    out.reserve(tau_grid.size());
    out.push_back((sm * X).trace());
    double t = tau_grid.front();
    for (std::size_t g = 1; g < tau_grid.size(); ++g) {
        while (t < tau_grid[g] - 1e-12) {
            const double dt = std::min(h, tau_grid[g] - t);
            M2 k1 = rhs(X);
            M2 k2 = rhs(X + 0.5 * dt * k1);
            M2 k3 = rhs(X + 0.5 * dt * k2);
            M2 k4 = rhs(X + dt * k3);
            X += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += dt;
        }
        out.push_back((sm * X).trace());
    }
    return out;
}

// Least-squares circle fit (Kasa method): returns (cx, cy, radius).
inline std::array<double, 3> fit_circle(const std::vector<std::complex<double>>& pts) {
    const int n = static_cast<int>(pts.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        const double x = pts[i].real(), y = pts[i].imag();
        A(i, 0) = 2.0 * x;
        A(i, 1) = 2.0 * y;
        A(i, 2) = 1.0;
        b[i] = x * x + y * y;
    }
    Eigen::Vector3d sol = A.colPivHouseholderQr().solve(b);
    const double r = std::sqrt(sol[2] + sol[0] * sol[0] + sol[1] * sol[1]);
    return {sol[0], sol[1], r};
}

// Quadratic interpolation of a peak position on a uniform grid.
inline double refine_peak(const std::vector<double>& x, const std::vector<double>& y, std::size_t i) {
    if (i == 0 || i + 1 >= y.size()) return x[i];
    const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
    if (std::abs(denom) < 1e-300) return x[i];
    const double delta = 0.5 * (y[i - 1] - y[i + 1]) / denom;
    return x[i] + delta * (x[1] - x[0]);
}

}  // namespace oracles
