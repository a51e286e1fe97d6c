// ode.hpp — adaptive Dormand–Prince (5)4 integration with dense output for complex ODE systems

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfsim::ode {

using Vector = Eigen::VectorXcd;

struct IntegratorOptions {
    double rtol{1e-8};
    double atol{1e-10};
    double initial_step{0.0};          // 0 = choose automatically
    long long max_steps{50'000'000};
};

// Right-hand side signature: dydt = f(t, y).
using Rhs = std::function<void(double, const Vector&, Vector&)>;

namespace detail {

// Dormand–Prince coefficients (DOPRI5, FSAL).
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                        b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output quartic weights.
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace detail

// Integrates dy/dt = f(t, y) from t0 over a monotone increasing sample grid,
// invoking on_sample(index, t, y) at every grid point (dense output, no step
// restriction to grid points). The first grid entry may equal t0.
class DormandPrince {
public:
    explicit DormandPrince(IntegratorOptions opts = {}) : opts_(opts) {}

    void integrate(const Rhs& f, double t0, const Vector& y0, const std::vector<double>& grid,
                   const std::function<void(std::size_t, double, const Vector&)>& on_sample) const {
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw std::invalid_argument("DormandPrince: sample grid must be strictly increasing");
        if (!grid.empty() && grid.front() < t0 - 1e-300)
            throw std::invalid_argument("DormandPrince: grid starts before t0");

        const Eigen::Index n = y0.size();
        Vector y = y0;
        Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yerr(n);

        double t = t0;
        std::size_t next = 0;
        while (next < grid.size() && grid[next] <= t + 1e-300) {
            on_sample(next, t, y);
            ++next;
        }
        if (next >= grid.size()) return;
        const double t_end = grid.back();

        f(t, y, k1);
        double h = opts_.initial_step > 0.0 ? opts_.initial_step : guess_step(t, y, k1, f);

        long long steps = 0;
        while (t < t_end) {
            if (++steps > opts_.max_steps)
                throw std::runtime_error("DormandPrince: step budget exhausted at t = " + std::to_string(t));
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
                throw std::runtime_error("DormandPrince: step size underflow at t = " + std::to_string(t));
            if (t + h > t_end) h = t_end - t;

            using namespace detail;
            ytmp = y + h * (a21 * k1);
            f(t + c2 * h, ytmp, k2);
            ytmp = y + h * (a31 * k1 + a32 * k2);
            f(t + c3 * h, ytmp, k3);
            ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            f(t + c4 * h, ytmp, k4);
            ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f(t + c5 * h, ytmp, k5);
            ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            f(t + h, ytmp, k6);
            ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            f(t + h, ynew, k7);
            yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

            double err = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sc = opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                const double r  = std::abs(yerr[i]) / sc;
                err += r * r;
            }
            err = std::sqrt(err / static_cast<double>(n));

            if (err <= 1.0) {
                // Accept; emit dense output for grid points inside (t, t+h].
                while (next < grid.size() && grid[next] <= t + h + 1e-300) {
                    const double theta = (grid[next] - t) / h;
                    if (theta >= 1.0 - 1e-12) {
                        on_sample(next, grid[next], ynew);
                    } else {
                        dense_eval(y, ynew, k1, k3, k4, k5, k6, k7, h, theta, ytmp);
                        on_sample(next, grid[next], ytmp);
                    }
                    ++next;
                }
                t += h;
                y.swap(ynew);
                k1.swap(k7);  // FSAL
                if (next >= grid.size()) return;
            }
            const double limited = std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-16), -0.2)));
            h *= limited;
        }
    }

private:
    IntegratorOptions opts_;

    static void dense_eval(const Vector& y0, const Vector& y1, const Vector& k1, const Vector& k3,
                           const Vector& k4, const Vector& k5, const Vector& k6, const Vector& k7,
                           double h, double theta, Vector& out) {
        using namespace detail;
        // Hairer's contiguous-output polynomial for DOPRI5.
        Vector ydiff = y1 - y0;
        Vector bspl  = h * k1 - ydiff;
        Vector r5    = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        Vector r4    = ydiff - h * k7 - bspl;
        const double th1 = 1.0 - theta;
        out = y0 + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5)));
    }

    double guess_step(double t, const Vector& y, const Vector& dydt, const Rhs& f) const {
        const double d0 = norm_scaled(y, y);
        const double d1n = norm_scaled(dydt, y);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        Vector y1 = y + h0 * dydt;
        Vector f1(y.size());
        f(t + h0, y1, f1);
        const double d2 = norm_scaled(f1 - dydt, y) / h0;
        double h1 = (std::max(d1n, d2) <= 1e-15)
                        ? std::max(1e-6, h0 * 1e-3)
                        : std::pow(0.01 / std::max(d1n, d2), 0.2);
        return std::min(100.0 * h0, h1);
    }

    double norm_scaled(const Vector& v, const Vector& ref) const {
        double s = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double sc = opts_.atol + opts_.rtol * std::abs(ref[i]);
            const double r  = std::abs(v[i]) / sc;
            s += r * r;
        }
        return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
    }
};

}  // namespace rfsim::ode
