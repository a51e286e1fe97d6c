// correlation.hpp — two-time correlators via the regression theorem, emission spectra
// (static and periodically modulated), pump calibration, and waveguide output traces

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsim/device.hpp"
#include "rfsim/hilbert.hpp"
#include "rfsim/lindblad.hpp"
#include "rfsim/parallel.hpp"

namespace rfsim::correlation {

using hilbert::Complex;
using hilbert::HilbertSpec;
using hilbert::Matrix;
using hilbert::Operator;
using hilbert::SystemSpec;
using hilbert::two_pi;
using lindblad::DensityMatrix;
using lindblad::Liouvillian;
using Vector = Eigen::VectorXcd;

// ------------------------------ correlation traces ---------------------------

struct CorrelationTrace {
    std::vector<double> tau;  // µs, uniform, starting at 0
    Vector values;            // ⟨A(t)B(t+τ)⟩ at stationarity
    Complex asymptote{0.0};   // ⟨A⟩_ss·⟨B⟩_ss
    bool normalized{false};
};

struct TwoTimeOptions {
    enum class Method { propagate, eigen };
    Method method{Method::propagate};
    double stationarity_tol{1e-8};
    ode::IntegratorOptions integrator{};
};

// Liouvillian eigenmode expansion of a two-time correlation:
// C(τ) = coherent_weight + Σ_k weights_k·e^{λ_k τ}, the zero modes separated out.
struct EigenModes {
    Vector lambda;
    Vector weights;
    Complex coherent_weight{0.0};
};

namespace detail {

inline void check_stationary(const Liouvillian& L, const DensityMatrix& rho_ss, double tol) {
    Vector v = Eigen::Map<const Vector>(rho_ss.rho.data(), L.dim() * L.dim());
    Vector out(v.size());
    L.apply(0.0, v, out);
    const double res = out.cwiseAbs().maxCoeff();
    if (res > tol)
        throw std::invalid_argument("two_time_correlation: state is not stationary (residual " +
                                    std::to_string(res) + ")");
}

}  // namespace detail

inline EigenModes correlation_modes(const Liouvillian& L, const DensityMatrix& rho_ss,
                                    const Operator& A, const Operator& B, double zero_tol = 1e-6) {
    if (!L.is_static())
        throw std::invalid_argument("correlation_modes: static generator required");
    const int d = L.dim();
    Matrix dense = L.dense_static();
    Eigen::ComplexEigenSolver<Matrix> es(dense);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("correlation_modes: eigendecomposition failed");

    Matrix X0 = rho_ss.rho * A.mat;
    Vector v0 = Eigen::Map<const Vector>(X0.data(), d * d);
    Vector c = es.eigenvectors().partialPivLu().solve(v0);

    Matrix Bdag = B.mat.adjoint();
    Vector u = Eigen::Map<const Vector>(Bdag.data(), d * d);
    Vector projections = es.eigenvectors().adjoint() * u;

    EigenModes modes;
    std::vector<Complex> lam, w;
    lam.reserve(d * d);
    w.reserve(d * d);
    for (int k = 0; k < d * d; ++k) {
        const Complex weight = std::conj(projections[k]) * c[k];
        if (std::abs(es.eigenvalues()[k]) <= zero_tol) {
            modes.coherent_weight += weight;
        } else {
            lam.push_back(es.eigenvalues()[k]);
            w.push_back(weight);
        }
    }
    modes.lambda = Eigen::Map<const Vector>(lam.data(), static_cast<Eigen::Index>(lam.size()));
    modes.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    return modes;
}

// ⟨A(t)B(t+τ)⟩ in the stationary state: tr[B·e^{Lτ}(ρ_ss A)] for τ ≥ 0.
// Default path propagates the vectorized initial condition; the eigen path is
// the independent cross-check.
inline CorrelationTrace two_time_correlation(const Liouvillian& L, const DensityMatrix& rho_ss,
                                             const Operator& A, const Operator& B,
                                             const std::vector<double>& tau_grid,
                                             const TwoTimeOptions& opts = {}) {
    if (tau_grid.empty() || std::abs(tau_grid.front()) > 1e-15)
        throw std::invalid_argument("two_time_correlation: tau grid must start at 0");
    if (!L.is_static())
        throw std::invalid_argument("two_time_correlation: static generator required "
                                    "(use modulated_spectrum for periodic problems)");
    detail::check_stationary(L, rho_ss, opts.stationarity_tol);

    CorrelationTrace trace;
    trace.tau = tau_grid;
    trace.values.resize(static_cast<Eigen::Index>(tau_grid.size()));
    trace.asymptote = (rho_ss.rho * A.mat).trace() * (rho_ss.rho * B.mat).trace();

    if (opts.method == TwoTimeOptions::Method::eigen) {
        EigenModes modes = correlation_modes(L, rho_ss, A, B);
        for (std::size_t i = 0; i < tau_grid.size(); ++i) {
            Complex v = modes.coherent_weight;
            for (Eigen::Index k = 0; k < modes.lambda.size(); ++k)
                v += modes.weights[k] * std::exp(modes.lambda[k] * tau_grid[i]);
            trace.values[static_cast<Eigen::Index>(i)] = v;
        }
        return trace;
    }

    Matrix X0 = rho_ss.rho * A.mat;
    lindblad::propagate_matrix(
        L, X0, 0.0, tau_grid,
        [&](std::size_t idx, double, const Matrix& X) {
            trace.values[static_cast<Eigen::Index>(idx)] = (B.mat * X).trace();
        },
        opts.integrator);
    return trace;
}

// Normalized first-order correlation: pointwise division by the τ = 0 value.
inline CorrelationTrace g1(const CorrelationTrace& trace) {
    if (trace.normalized) throw std::invalid_argument("g1: trace already normalized");
    const Complex v0 = trace.values.size() ? trace.values[0] : Complex(0.0);
    if (std::abs(v0) < 1e-14)
        throw std::invalid_argument("g1: zero coincidence value (undriven system)");
    CorrelationTrace out = trace;
    out.values /= v0;
    out.asymptote /= v0;
    out.normalized = true;
    return out;
}

// --------------------------------- spectra -----------------------------------

struct Peak {
    double position{0.0};  // MHz relative to ω_d/2π
    double height{0.0};
    double fwhm{0.0};      // MHz
};

struct SpectrumResult {
    Eigen::VectorXd freq;     // MHz relative to ω_d/2π
    Eigen::VectorXd density;  // arbitrary units
    std::vector<Peak> peaks;
    std::string normalization;
};

struct SpectrumOptions {
    double f_min{-65.0};  // MHz
    double f_max{65.0};
    double df{0.05};
    bool hann{false};  // correlations decay intrinsically; Hann available by flag
    bool subtract_coherent{true};
    double peak_prominence{0.02};     // fraction of the global maximum
    double peak_min_separation{1.0};  // MHz
    double tail_frac{1e-4};           // required |C̃(τ_max)| relative to |C(0)|
};

namespace detail {

// Half-height extent of the peak at index i, clipped at the adjacent valleys so
// overlapping neighbours never leak into the estimate.
struct PeakExtent {
    double xl, xr;
    Eigen::Index jl, jr;
};

inline PeakExtent peak_extent(const Eigen::VectorXd& freq, const Eigen::VectorXd& density,
                              Eigen::Index i, double half) {
    const Eigen::Index n = freq.size();
    PeakExtent e{freq[0], freq[n - 1], 0, n - 1};
    for (Eigen::Index j = i; j-- > 0;) {
        if (density[j] < half) {
            const double f = (half - density[j]) / (density[j + 1] - density[j]);
            e.xl = freq[j] + f * (freq[j + 1] - freq[j]);
            e.jl = j;
            break;
        }
        if (density[j] > density[j + 1]) {  // valley passed
            e.xl = freq[j + 1];
            e.jl = j + 1;
            break;
        }
        e.xl = freq[j];
        e.jl = j;
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
        if (density[j] < half) {
            const double f = (density[j - 1] - half) / (density[j - 1] - density[j]);
            e.xr = freq[j - 1] + f * (freq[j] - freq[j - 1]);
            e.jr = j;
            break;
        }
        if (density[j] > density[j - 1]) {
            e.xr = freq[j - 1];
            e.jr = j - 1;
            break;
        }
        e.xr = freq[j];
        e.jr = j;
    }
    return e;
}

// Deterministic peak detection: strict local maxima, prominence filter,
// minimum-separation enforcement (highest first), then a local Lorentzian fit
// for sub-grid position and FWHM.
inline std::vector<Peak> detect_peaks(const Eigen::VectorXd& freq, const Eigen::VectorXd& density,
                                      const SpectrumOptions& opts) {
    const Eigen::Index n = freq.size();
    std::vector<Peak> out;
    if (n < 3) return out;
    const double global_max = density.maxCoeff();
    if (!(global_max > 0.0)) return out;

    std::vector<Eigen::Index> cands;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (!(density[i] > density[i - 1] && density[i] >= density[i + 1])) continue;
        double left_base = density[i];
        for (Eigen::Index j = i; j-- > 0;) {
            if (density[j] > density[i]) break;
            left_base = std::min(left_base, density[j]);
        }
        double right_base = density[i];
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (density[j] > density[i]) break;
            right_base = std::min(right_base, density[j]);
        }
        const double prom = density[i] - std::max(left_base, right_base);
        if (prom >= opts.peak_prominence * global_max) cands.push_back(i);
    }

    std::sort(cands.begin(), cands.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (density[a] != density[b]) return density[a] > density[b];
        return a < b;
    });
    std::vector<Eigen::Index> accepted;
    for (Eigen::Index c : cands) {
        bool keep = true;
        for (Eigen::Index a : accepted)
            if (std::abs(freq[c] - freq[a]) < opts.peak_min_separation) {
                keep = false;
                break;
            }
        if (keep) accepted.push_back(c);
    }
    std::sort(accepted.begin(), accepted.end());

    const double df = freq[1] - freq[0];
    std::vector<PeakExtent> extents;
    extents.reserve(accepted.size());
    for (Eigen::Index i : accepted) {
        Peak p;
        p.position = freq[i];
        p.height = density[i];
        const PeakExtent ext = peak_extent(freq, density, i, 0.5 * density[i]);
        extents.push_back(ext);
        p.fwhm = std::max(ext.xr - ext.xl, df);
        out.push_back(p);
    }

    // One joint fit over the whole band, so overlapping tails are modelled
    // rather than truncated. Per-peak extents stay as the fallback.
    std::vector<double> xs(freq.data(), freq.data() + n);
    std::vector<double> ys(density.data(), density.data() + n);
    std::vector<device::ResonanceGuess> guesses;
    guesses.reserve(out.size());
    double dmin = density.minCoeff();
    for (const auto& p : out) guesses.push_back({p.position, p.fwhm, p.height - dmin});
    try {
        auto rep = device::fit_multi_resonance(xs, ys, guesses);
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double c = rep.params[1 + 4 * k];
            const double w = rep.params[2 + 4 * k];
            const double gate = std::max(2.0 * df, 0.75 * out[k].fwhm);
            if (std::abs(c - freq[accepted[k]]) <= gate && w > 0.0 &&
                w < 8.0 * std::max(out[k].fwhm, df)) {
                out[k].position = c;
                out[k].fwhm = w;
            }
        }
    } catch (const std::exception&) {
        // keep the extent-based estimates
    }
    return out;
}

// Effective complex decay rate of the trace tail, used to close the half-sided
// transform analytically beyond τ_max and suppress truncation ringing.
inline std::optional<Complex> tail_rate(const std::vector<double>& tau, const Vector& values) {
    const Eigen::Index n = values.size();
    const Eigen::Index k = std::min<Eigen::Index>(std::max<Eigen::Index>(n / 10, 8), n - 1);
    Complex acc(0.0, 0.0);
    int cnt = 0;
    for (Eigen::Index i = n - k; i < n; ++i) {
        const Complex a = values[i - 1], b = values[i];
        if (std::abs(a) < 1e-300 || std::abs(b) < 1e-300) continue;
        acc += std::log(b / a);
        ++cnt;
    }
    if (cnt == 0) return std::nullopt;
    const double dt = tau[1] - tau[0];
    Complex lam = acc / (static_cast<double>(cnt) * dt);
    if (!(lam.real() < -1e-9)) return std::nullopt;
    return lam;
}

}  // namespace detail

// Half-sided transform of the (coherent-subtracted) correlation:
// S(δf) = π⁻¹ Re ∫₀^∞ C̃(τ)·e^{i·2π·δf·τ} dτ, evaluated on the requested grid.
inline SpectrumResult emission_spectrum(const CorrelationTrace& trace,
                                        const SpectrumOptions& opts = {}) {
    const std::size_t n = trace.tau.size();
    if (n < 16) throw std::invalid_argument("emission_spectrum: trace too short");
    const double dt = trace.tau[1] - trace.tau[0];
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(trace.tau[i] - trace.tau[i - 1] - dt) > 1e-9 * dt)
            throw std::invalid_argument("emission_spectrum: tau grid must be uniform");
    const double f_abs = std::max(std::abs(opts.f_min), std::abs(opts.f_max));
    if (dt > 1.0 / (2.0 * f_abs))
        throw std::invalid_argument("emission_spectrum: aliasing (tau spacing too coarse for band)");

    Vector ct = trace.values;
    if (opts.subtract_coherent) ct.array() -= trace.asymptote;
    const double c0 = std::abs(trace.values[0]);
    if (std::abs(ct[static_cast<Eigen::Index>(n - 1)]) > opts.tail_frac * std::max(c0, 1e-300))
        throw std::runtime_error("emission_spectrum: insufficient tau span (tail above threshold)");

    std::vector<double> window(n, 1.0);
    if (opts.hann) {
        const double T = trace.tau.back();
        for (std::size_t i = 0; i < n; ++i)
            window[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * trace.tau[i] / T));
    }

    const int nf = static_cast<int>(std::floor((opts.f_max - opts.f_min) / opts.df + 0.5)) + 1;
    SpectrumResult out;
    out.freq.resize(nf);
    out.density.resize(nf);
    out.normalization = trace.normalized
                            ? "pi^-1 Re half-sided transform of normalized g1 (units: us)"
                            : "pi^-1 Re half-sided transform of <s+(t)s-(t+tau)> (units: us)";

    const std::optional<Complex> lam = opts.hann ? std::nullopt : detail::tail_rate(trace.tau, ct);
    const Complex c_end = ct[static_cast<Eigen::Index>(n - 1)];
    const double t_end = trace.tau.back();

    for (int j = 0; j < nf; ++j) {
        const double f = opts.f_min + j * opts.df;
        const double w = two_pi * f;
        Complex sum(0.0, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double tw = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
            sum += tw * window[k] * ct[static_cast<Eigen::Index>(k)] *
                   std::polar(1.0, w * trace.tau[k]);
        }
        sum *= dt;
        if (lam) sum += c_end * std::polar(1.0, w * t_end) / (-(*lam + Complex(0.0, w)));
        out.freq[j] = f;
        out.density[j] = sum.real() / std::numbers::pi;
    }
    out.peaks = detail::detect_peaks(out.freq, out.density, opts);
    return out;
}

// Exact Lorentzian-sum spectrum from the Liouvillian eigenmode expansion.
inline SpectrumResult emission_spectrum_from_modes(const EigenModes& modes,
                                                   const SpectrumOptions& opts = {}) {
    const int nf = static_cast<int>(std::floor((opts.f_max - opts.f_min) / opts.df + 0.5)) + 1;
    SpectrumResult out;
    out.freq.resize(nf);
    out.density.resize(nf);
    out.normalization = "pi^-1 sum of regression-weighted Liouvillian modes (units: us)";
    for (int j = 0; j < nf; ++j) {
        const double f = opts.f_min + j * opts.df;
        const double w = two_pi * f;
        Complex s(0.0, 0.0);
        for (Eigen::Index k = 0; k < modes.lambda.size(); ++k)
            s += modes.weights[k] / (-modes.lambda[k] - Complex(0.0, w));
        out.freq[j] = f;
        out.density[j] = s.real() / std::numbers::pi;
    }
    out.peaks = detail::detect_peaks(out.freq, out.density, opts);
    return out;
}

// τ grid satisfying the sampling rules: spacing ≤ 1/(8·f_max), span ≥
// 10/min{γ₂, κ, g₁} over the positive rates.
inline std::vector<double> default_tau_grid(const SystemSpec& spec, double f_max_mhz,
                                            double span_factor = 1.0) {
    double min_rate = spec.gamma_2();
    if (spec.kappa > 0.0) min_rate = std::min(min_rate, spec.kappa);
    if (spec.g_c > 0.0) min_rate = std::min(min_rate, 0.5 * spec.g_c);
    if (!(min_rate > 0.0)) min_rate = 1.0;
    const double span = span_factor * 10.0 / (two_pi * min_rate);
    const double dt = 1.0 / (8.0 * f_max_mhz);
    const int n = static_cast<int>(std::ceil(span / dt));
    std::vector<double> grid(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) grid[static_cast<std::size_t>(i)] = i * dt;
    return grid;
}

// Propagates the correlation in span-sized chunks until the incoherent tail has
// decayed below tail_frac, so emission_spectrum's span precondition holds.
inline CorrelationTrace correlate_until_settled(const Liouvillian& L, const DensityMatrix& rho_ss,
                                                const Operator& A, const Operator& B,
                                                const std::vector<double>& base_grid,
                                                double tail_frac = 1e-4, int max_chunks = 8,
                                                const ode::IntegratorOptions& integ = {}) {
    detail::check_stationary(L, rho_ss, 1e-8);
    const double dt = base_grid[1] - base_grid[0];
    const std::size_t chunk = base_grid.size() - 1;

    CorrelationTrace trace;
    trace.asymptote = (rho_ss.rho * A.mat).trace() * (rho_ss.rho * B.mat).trace();
    trace.tau.reserve(base_grid.size());
    std::vector<Complex> values;
    values.reserve(base_grid.size());

    Matrix X_end = rho_ss.rho * A.mat;
    values.push_back((B.mat * X_end).trace());
    trace.tau.push_back(0.0);

    double t0 = 0.0;
    for (int c = 0; c < max_chunks; ++c) {
        std::vector<double> grid(chunk);
        for (std::size_t i = 1; i <= chunk; ++i) grid[i - 1] = t0 + i * dt;
        Matrix X_next;
        lindblad::propagate_matrix(
            L, X_end, t0, grid,
            [&](std::size_t idx, double t, const Matrix& Xi) {
                values.push_back((B.mat * Xi).trace());
                trace.tau.push_back(t);
                if (idx + 1 == grid.size()) X_next = Xi;
            },
            integ);
        X_end = std::move(X_next);
        t0 = trace.tau.back();
        const double tail = std::abs(values.back() - trace.asymptote);
        const double c0 = std::abs(values.front());
        if (tail <= tail_frac * std::max(c0, 1e-300)) {
            trace.values =
                Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
            return trace;
        }
    }
    throw std::runtime_error(
        "correlate_until_settled: correlation tail did not decay within the span budget");
}

// ------------------------- periodically modulated path -----------------------

struct PeriodicOptions {
    int settle_min_cycles{8};
    int max_cycles{600};
    double drift_tol{1e-4};
    int samples_per_cycle{48};
    ode::IntegratorOptions integrator{};
};

struct PeriodicSteadyState {
    DensityMatrix state;      // at absolute time t0
    double t0{0.0};
    double period{0.0};
    double mean_photon{0.0};  // period-averaged ⟨a†a⟩
    int cycles_used{0};
};

namespace detail {

inline double modulation_period(const Liouvillian& L) {
    if (L.is_static()) throw std::invalid_argument("modulation period: generator is static");
    double nu = 0.0;
    for (const auto& [m, f] : L.modulation()) {
        const double af = std::abs(f);
        if (af < 1e-12) continue;
        if (nu == 0.0)
            nu = af;
        else if (std::abs(af - nu) > 1e-9 * nu)
            throw std::invalid_argument("modulated path: incommensurate modulation frequencies");
    }
    if (nu == 0.0) throw std::invalid_argument("modulated path: zero modulation frequency");
    return two_pi / nu;
}

inline Matrix static_part_steady(const Liouvillian& L) {
    bool ok = true;
    Vector x = lindblad::detail::trace_replaced_solve(L.static_superoperator(), L.dim(), 0, ok);
    if (!ok) {
        Matrix g = Matrix::Zero(L.dim(), L.dim());
        g(0, 0) = 1.0;
        return g;
    }
    Matrix r = Eigen::Map<const Matrix>(x.data(), L.dim(), L.dim());
    r = 0.5 * (r + r.adjoint().eval());
    r /= r.trace().real();
    return r;
}

}  // namespace detail

// Evolve to the periodic steady state: the cycle-averaged photon number and the
// stroboscopic observables must drift by less than drift_tol between cycles.
inline PeriodicSteadyState periodic_steady_state(const Liouvillian& L,
                                                 const PeriodicOptions& opts = {}) {
    const double T = detail::modulation_period(L);
    const auto ops = hilbert::build_operators(L.space());
    const Matrix n_op = ops.a_dag.mat * ops.a.mat;

    Matrix rho = detail::static_part_steady(L);
    const int ns = opts.samples_per_cycle;
    double prev_mean = -1.0, prev_strobe = 0.0;
    double t = 0.0;
    for (int cycle = 0; cycle < opts.max_cycles; ++cycle) {
        std::vector<double> grid(static_cast<std::size_t>(ns) + 1);
        for (int i = 0; i <= ns; ++i) grid[static_cast<std::size_t>(i)] = t + T * i / ns;
        double mean = 0.0;
        lindblad::propagate_matrix(
            L, rho, t, grid,
            [&](std::size_t idx, double, const Matrix& r) {
                const double w = (idx == 0 || idx == static_cast<std::size_t>(ns)) ? 0.5 : 1.0;
                mean += w * (r * n_op).trace().real();
                if (idx == static_cast<std::size_t>(ns)) rho = r;
            },
            opts.integrator);
        mean /= ns;
        const double strobe = (rho * n_op).trace().real();
        t += T;

        if (cycle + 1 >= opts.settle_min_cycles && prev_mean >= 0.0) {
            const double scale = std::max({std::abs(mean), std::abs(prev_mean), 1e-9});
            if (std::abs(mean - prev_mean) / scale < opts.drift_tol &&
                std::abs(strobe - prev_strobe) / scale < opts.drift_tol) {
                PeriodicSteadyState out;
                Matrix r = 0.5 * (rho + rho.adjoint().eval());
                r /= r.trace().real();
                out.state = DensityMatrix{std::move(r), L.space()};
                out.t0 = t;
                out.period = T;
                out.mean_photon = mean;
                out.cycles_used = cycle + 1;
                return out;
            }
        }
        prev_mean = mean;
        prev_strobe = strobe;
    }
    throw std::runtime_error("periodic_steady_state: cycle-to-cycle drift did not settle "
                             "(failure to reach periodic steady state)");
}

struct ModulatedOptions {
    int t0_samples{16};
    PeriodicOptions periodic{};
    ode::IntegratorOptions integrator{};
    double tail_frac{1e-4};
    int max_chunks{8};
    unsigned workers{0};
};

// Quasi-stationary emission spectrum of a periodically modulated generator:
// correlations started from t0 points spanning one modulation period, with the
// time-dependent coherent product ⟨σ₊⟩(t0)·⟨σ₋⟩(t0+τ) removed per sample,
// averaged over t0, then transformed as in emission_spectrum.
inline SpectrumResult modulated_spectrum(const Liouvillian& L,
                                         const std::vector<double>& base_tau_grid,
                                         const SpectrumOptions& sopts = {},
                                         const ModulatedOptions& mopts = {}) {
    if (L.is_static())
        throw std::invalid_argument("modulated_spectrum: periodic modulation required");
    if (mopts.t0_samples < 16)
        throw std::invalid_argument("modulated_spectrum: need at least 16 t0 samples per period");

    const PeriodicSteadyState pss = periodic_steady_state(L, mopts.periodic);
    const auto ops = hilbert::build_operators(L.space());
    const int d = L.dim();
    const int M = mopts.t0_samples;

    std::vector<Matrix> rho_t0(static_cast<std::size_t>(M));
    {
        std::vector<double> grid(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) grid[static_cast<std::size_t>(j)] = pss.t0 + pss.period * j / M;
        lindblad::propagate_matrix(
            L, pss.state.rho, pss.t0, grid,
            [&](std::size_t idx, double, const Matrix& r) { rho_t0[idx] = r; },
            mopts.integrator);
    }

    const double dt = base_tau_grid[1] - base_tau_grid[0];
    const std::size_t chunk = base_tau_grid.size() - 1;

    // Per-sample stacked state [X_j; ρ_j], extended chunk by chunk.
    std::vector<Vector> y_end(static_cast<std::size_t>(M));
    std::vector<std::vector<Complex>> incoherent(static_cast<std::size_t>(M));
    std::vector<Complex> sp0(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        Vector y(2 * d * d);
        Matrix X0 = rho_t0[ju] * ops.sigma_plus.mat;
        y.segment(0, d * d) = Eigen::Map<const Vector>(X0.data(), d * d);
        y.segment(d * d, d * d) = Eigen::Map<const Vector>(rho_t0[ju].data(), d * d);
        y_end[ju] = std::move(y);
        sp0[ju] = (rho_t0[ju] * ops.sigma_plus.mat).trace();
        incoherent[ju].push_back((ops.sigma_minus.mat * X0).trace() -
                                 sp0[ju] * (ops.sigma_minus.mat * rho_t0[ju]).trace());
    }

    double tau0 = 0.0;
    for (int c = 0; c < mopts.max_chunks; ++c) {
        parallel::parallel_for(
            static_cast<std::size_t>(M),
            [&](std::size_t j) {
                std::vector<double> grid(chunk);
                for (std::size_t i = 1; i <= chunk; ++i) grid[i - 1] = tau0 + i * dt;
                const double t_abs0 = pss.t0 + pss.period * static_cast<double>(j) / M;

                ode::DormandPrince integ(mopts.integrator);
                Vector y_last;
                integ.integrate(
                    [&](double tau, const Vector& y, Vector& dydt) {
                        const double ta = t_abs0 + tau;
                        L.apply(ta, y.segment(0, d * d), dydt.segment(0, d * d));
                        L.apply(ta, y.segment(d * d, d * d), dydt.segment(d * d, d * d));
                    },
                    tau0, y_end[j], grid,
                    [&](std::size_t idx, double, const Vector& y) {
                        Eigen::Map<const Matrix> Xv(y.data(), d, d);
                        Eigen::Map<const Matrix> Rv(y.data() + d * d, d, d);
                        incoherent[j].push_back((ops.sigma_minus.mat * Xv).trace() -
                                                sp0[j] * (ops.sigma_minus.mat * Rv).trace());
                        if (idx + 1 == grid.size()) y_last = y;
                    });
                y_end[j] = std::move(y_last);
            },
            mopts.workers);
        tau0 += chunk * dt;

        const std::size_t n_tau = incoherent[0].size();
        Vector avg = Vector::Zero(static_cast<Eigen::Index>(n_tau));
        for (int j = 0; j < M; ++j)
            for (std::size_t i = 0; i < n_tau; ++i)
                avg[static_cast<Eigen::Index>(i)] +=
                    incoherent[static_cast<std::size_t>(j)][i] / static_cast<double>(M);

        const double tail = std::abs(avg[avg.size() - 1]);
        const double c0 = std::abs(avg[0]);
        if (tail <= mopts.tail_frac * std::max(c0, 1e-300)) {
            CorrelationTrace trace;
            trace.tau.resize(n_tau);
            for (std::size_t i = 0; i < n_tau; ++i) trace.tau[i] = i * dt;
            trace.values = avg;
            trace.asymptote = Complex(0.0, 0.0);  // coherent part already removed per sample
            SpectrumOptions so = sopts;
            so.subtract_coherent = false;
            SpectrumResult out = emission_spectrum(trace, so);
            out.normalization +=
                "; t0-averaged over one modulation period (" + std::to_string(M) + " samples)";
            return out;
        }
    }
    throw std::runtime_error(
        "modulated_spectrum: averaged correlation tail did not decay within the span budget");
}

// ------------------------------ pump calibration ------------------------------

struct CalibrationResult {
    double pump_amp{0.0};
    double achieved_n{0.0};
    int evaluations{0};
};

// Scalar root-find on pump_amp such that the period-averaged ⟨a†a⟩ of the
// periodic steady state matches target_n within rel_tol.
inline CalibrationResult calibrate_pump(const SystemSpec& spec, double target_n,
                                        double rel_tol = 0.01, const PeriodicOptions& popts = {}) {
    if (!(target_n > 0.0)) throw std::invalid_argument("calibrate_pump: target_n must be > 0");

    auto mean_n = [&](double p) {
        SystemSpec s = spec;
        s.pump_amp = p;
        auto L = lindblad::build_liouvillian(lindblad::build_hamiltonian(s), s);
        return periodic_steady_state(L, popts).mean_photon;
    };

    int evals = 0;
    double lo = 0.0;
    double n_lo = [&] {
        SystemSpec s0 = spec;
        s0.pump_amp = 0.0;
        auto L = lindblad::build_liouvillian(lindblad::build_hamiltonian(s0), s0);
        auto ss = lindblad::steady_state(L);
        const auto ops = hilbert::build_operators(spec.hilbert);
        return (ss.rho * (ops.a_dag.mat * ops.a.mat)).trace().real();
    }();
    if (n_lo > target_n)
        throw std::runtime_error("calibrate_pump: bracket failure (undriven photon number " +
                                 std::to_string(n_lo) + " already above target)");

    double hi = std::max(spec.kappa, 1e-3) * std::sqrt(target_n);
    double n_hi = mean_n(hi);
    ++evals;
    int expand = 0;
    while (n_hi < target_n) {
        if (++expand > 8)
            throw std::runtime_error("calibrate_pump: bracket failure (scanned pump_amp up to " +
                                     std::to_string(hi) + ")");
        lo = hi;
        n_lo = n_hi;
        hi *= 1.7;
        n_hi = mean_n(hi);
        ++evals;
    }

    double p = hi, n_p = n_hi;
    for (int it = 0; it < 40 && std::abs(n_p - target_n) > rel_tol * target_n; ++it) {
        double prop;
        if (n_hi > n_lo + 1e-15) {
            const double f = (target_n - n_lo) / (n_hi - n_lo);
            prop = lo + std::min(std::max(f, 0.1), 0.9) * (hi - lo);
        } else {
            prop = 0.5 * (lo + hi);
        }
        p = prop;
        n_p = mean_n(p);
        ++evals;
        if (n_p < target_n) {
            lo = p;
            n_lo = n_p;
        } else {
            hi = p;
            n_hi = n_p;
        }
    }
    if (std::abs(n_p - target_n) > rel_tol * target_n)
        throw std::runtime_error("calibrate_pump: did not reach target within tolerance");
    return CalibrationResult{p, n_p, evals};
}

// ------------------------------- output traces --------------------------------

struct PowerTraces {
    std::vector<double> time;  // µs
    Eigen::VectorXd literal;   // (γ₁/4)(1+⟨σ_z⟩)e^{−γ₁t}, ħω_a ≡ 1
    Eigen::VectorXd physical;  // γ_e·⟨σ₊σ₋⟩(t)
    std::string literal_label{"(gamma_1/4)(1+<sz>)exp(-gamma_1 t), hbar*omega_a = 1"};
    std::string physical_label{"gamma_e*<s+ s->(t)"};
};

// Both power readings are emitted side by side: the literal decaying-envelope
// form and the instantaneous radiated power.
inline PowerTraces output_power_trace(const std::vector<double>& times, const Vector& sz,
                                      const SystemSpec& spec) {
    if (times.size() != static_cast<std::size_t>(sz.size()))
        throw std::invalid_argument("output_power_trace: size mismatch");
    PowerTraces out;
    out.time = times;
    out.literal.resize(sz.size());
    out.physical.resize(sz.size());
    const double g1 = two_pi * spec.gamma_1;
    const double ge = two_pi * spec.gamma_e;
    for (Eigen::Index i = 0; i < sz.size(); ++i) {
        const double pop = 1.0 + sz[i].real();
        out.literal[i] = 0.25 * g1 * pop * std::exp(-g1 * times[static_cast<std::size_t>(i)]);
        out.physical[i] = 0.5 * ge * pop;
    }
    return out;
}

struct FieldTraces {
    std::vector<double> time;  // µs
    Vector field;              // ∝ ⟨σ₋(t)⟩
    Vector b_out;              // √(γ_e/2)·⟨σ₋(t)⟩
    std::string prefactor_note{
        "field proportional to <s->(t); radiative prefactor and propagation phase folded "
        "into arbitrary units"};
};

inline FieldTraces output_field_trace(const std::vector<double>& times, const Vector& sm,
                                      const SystemSpec& spec, double /*x*/ = 0.0) {
    if (times.size() != static_cast<std::size_t>(sm.size()))
        throw std::invalid_argument("output_field_trace: size mismatch");
    FieldTraces out;
    out.time = times;
    out.field = sm;
    out.b_out = std::sqrt(two_pi * spec.gamma_e / 2.0) * sm;
    return out;
}

}  // namespace rfsim::correlation
