// lindblad.hpp — master-equation generator, time evolution, and steady-state solve

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rfsim/hilbert.hpp"
#include "rfsim/ode.hpp"

namespace rfsim::lindblad {

using hilbert::Complex;
using hilbert::HilbertSpec;
using hilbert::Matrix;
using hilbert::Operator;
using hilbert::OperatorSet;
using hilbert::SystemSpec;
using hilbert::two_pi;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using Vector = Eigen::VectorXcd;

// ----------------------------- density matrices ------------------------------

struct DensityMatrix {
    Matrix rho;
    HilbertSpec space;
};

struct StateDiagnostics {
    double trace_deviation{0.0};   // |tr ρ − 1|
    double hermiticity_dev{0.0};   // max |ρ − ρ†|
    double min_eigenvalue{0.0};
};

inline StateDiagnostics diagnose(const Matrix& rho) {
    StateDiagnostics d;
    d.trace_deviation = std::abs(rho.trace() - Complex(1.0, 0.0));
    d.hermiticity_dev = (rho - rho.adjoint().eval()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint().eval()),
                                             Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

inline void validate_density(const DensityMatrix& dm, double trace_tol = 1e-10,
                             double herm_tol = 1e-10, double eig_floor = -1e-8) {
    const StateDiagnostics d = diagnose(dm.rho);
    if (d.trace_deviation > trace_tol)
        throw std::invalid_argument("DensityMatrix: trace deviates from 1 by " +
                                    std::to_string(d.trace_deviation));
    if (d.hermiticity_dev > herm_tol)
        throw std::invalid_argument("DensityMatrix: not Hermitian within tolerance");
    if (d.min_eigenvalue < eig_floor)
        throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                    std::to_string(d.min_eigenvalue));
}

// Ground state |g,0⟩⟨g,0|.
inline DensityMatrix ground_state(const HilbertSpec& space) {
    space.validate();
    Matrix rho = Matrix::Zero(space.dim(), space.dim());
    rho(0, 0) = 1.0;
    return DensityMatrix{std::move(rho), space};
}

// ------------------------------- Hamiltonian ---------------------------------

// A periodic Hamiltonian piece: op·e^{iνt} + op†·e^{−iνt}, ν in rad/µs.
struct HamiltonianTerm {
    Matrix op;
    double freq{0.0};
};

struct Hamiltonian {
    Matrix static_part;                    // rad/µs
    std::vector<HamiltonianTerm> periodic; // empty for time-independent problems
    HilbertSpec space;
};

// Rotating-frame Hamiltonian at ω_d. Input spec values are in 2π·MHz; the
// returned matrices are angular (rad/µs). A nonzero pump adds the periodic
// term (pump_amp/2)(a·e^{iδt} + a†·e^{−iδt}) with δ = ω_pc − ω_d.
inline Hamiltonian build_hamiltonian(const SystemSpec& spec) {
    spec.validate();
    const OperatorSet ops = hilbert::build_operators(spec.hilbert);

    Matrix coupling = ops.a_dag.mat * ops.sigma_minus.mat;
    coupling = (coupling + coupling.adjoint().eval()).eval();

    Matrix H = spec.delta_c() * (ops.a_dag.mat * ops.a.mat) + (0.5 * spec.delta_a()) * ops.sigma_z.mat +
               spec.g_c * coupling + (0.5 * spec.Omega) * (ops.sigma_minus.mat + ops.sigma_plus.mat) +
               (0.5 * spec.Omega_c) * (ops.a.mat + ops.a_dag.mat);
    H *= two_pi;

    Hamiltonian out;
    out.static_part = std::move(H);
    out.space = spec.hilbert;
    if (spec.pump_amp != 0.0) {
        const double delta = two_pi * (spec.omega_pc - spec.omega_d);
        out.periodic.push_back({(two_pi * 0.5 * spec.pump_amp) * ops.a.mat, delta});
    }
    return out;
}

// ------------------------------- Liouvillian ---------------------------------

// One collapse channel: contributes coeff·(2AρA† − A†Aρ − ρA†A) to the generator
// (the dissipator here carries the factor 2 in the sandwich term).
struct Channel {
    double coeff{0.0};
    Matrix op;
};

namespace detail {

// Append triplets of scale·(A ⊗ B) for column-major vectorization.
inline void kron_triplets(const Matrix& A, const Matrix& B, Complex scale,
                          std::vector<Eigen::Triplet<Complex>>& out) {
    const Eigen::Index da = A.rows(), db = B.rows();
    for (Eigen::Index ia = 0; ia < da; ++ia)
        for (Eigen::Index ja = 0; ja < da; ++ja) {
            const Complex va = A(ia, ja);
            if (va == Complex(0.0, 0.0)) continue;
            for (Eigen::Index ib = 0; ib < db; ++ib)
                for (Eigen::Index jb = 0; jb < db; ++jb) {
                    const Complex vb = B(ib, jb);
                    if (vb == Complex(0.0, 0.0)) continue;
                    out.emplace_back(ia * db + ib, ja * db + jb, scale * va * vb);
                }
        }
}

// Superoperator of ρ ↦ −i[H, ρ] in the column-stacked convention
// vec(AρB) = (Bᵀ ⊗ A)·vec(ρ).
inline SparseMatrix commutator_super(const Matrix& H) {
    const Eigen::Index d = H.rows();
    std::vector<Eigen::Triplet<Complex>> trip;
    const Matrix id = Matrix::Identity(d, d);
    kron_triplets(id, H, Complex(0.0, -1.0), trip);
    kron_triplets(H.transpose(), id, Complex(0.0, 1.0), trip);
    SparseMatrix out(d * d, d * d);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

// Superoperator of ρ ↦ coeff·(2AρA† − A†Aρ − ρA†A).
inline SparseMatrix dissipator_super(const Matrix& A, double coeff) {
    const Eigen::Index d = A.rows();
    const Matrix AdA = A.adjoint() * A;
    const Matrix id = Matrix::Identity(d, d);
    std::vector<Eigen::Triplet<Complex>> trip;
    kron_triplets(A.conjugate(), A, Complex(2.0 * coeff, 0.0), trip);
    kron_triplets(id, AdA, Complex(-coeff, 0.0), trip);
    kron_triplets(AdA.transpose(), id, Complex(-coeff, 0.0), trip);
    SparseMatrix out(d * d, d * d);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

}  // namespace detail

// Lindblad generator acting on vectorized density matrices, optionally with
// time-periodic Hamiltonian terms. Immutable after construction.
class Liouvillian {
public:
    Liouvillian(const Hamiltonian& H, std::vector<Channel> channels)
        : space_(H.space), dim_(H.space.dim()), channels_(std::move(channels)) {
        SparseMatrix super = detail::commutator_super(H.static_part);
        for (const auto& ch : channels_) {
            if (ch.coeff < 0.0) throw std::invalid_argument("Liouvillian: negative channel coefficient");
            if (ch.coeff == 0.0) continue;
            super += detail::dissipator_super(ch.op, ch.coeff);
        }
        static_super_ = std::move(super);
        for (const auto& term : H.periodic) {
            modulation_.emplace_back(detail::commutator_super(term.op), term.freq);
            modulation_.emplace_back(detail::commutator_super(term.op.adjoint()), -term.freq);
        }
    }

    int dim() const noexcept { return dim_; }
    const HilbertSpec& space() const noexcept { return space_; }
    bool is_static() const noexcept { return modulation_.empty(); }

    const SparseMatrix& static_superoperator() const noexcept { return static_super_; }
    const std::vector<std::pair<SparseMatrix, double>>& modulation() const noexcept {
        return modulation_;
    }
    const std::vector<Channel>& channels() const noexcept { return channels_; }

    // Generator action on a vectorized operator at absolute time t.
    void apply(double t, Eigen::Ref<const Vector> x, Eigen::Ref<Vector> out) const {
        out.noalias() = static_super_ * x;
        for (const auto& [m, nu] : modulation_) {
            const Complex phase = std::polar(1.0, nu * t);
            out.noalias() += phase * (m * x);
        }
    }

    Matrix apply_matrix(double t, const Matrix& X) const {
        Vector x = Eigen::Map<const Vector>(X.data(), dim_ * dim_);
        Vector y(dim_ * dim_);
        apply(t, x, y);
        return Eigen::Map<const Matrix>(y.data(), dim_, dim_);
    }

    Matrix dense_static() const { return Matrix(static_super_); }

private:
    HilbertSpec space_;
    int dim_;
    SparseMatrix static_super_;
    std::vector<std::pair<SparseMatrix, double>> modulation_;
    std::vector<Channel> channels_;
};

// Generator of the master equation in the rotating frame:
//   ρ̇ = −i[H,ρ] + (γ₁/2)D(σ₋)ρ + (γ_φ/4)D(σ_z)ρ
//        + (κ(n_th+1)/2)D(a)ρ + (κ·n_th/2)D(a†)ρ,
// with D(A)ρ = 2AρA† − A†Aρ − ρA†A. The dephasing coefficient γ_φ/4 makes the
// atom coherence decay at exactly γ₂ = γ₁/2 + γ_φ (D carries a factor 2, and
// σ_z flips the coherence sign, so the printed-coefficient form would give 4γ_φ).
inline Liouvillian build_liouvillian(const Hamiltonian& H, const SystemSpec& spec) {
    const Matrix dev = H.static_part - H.static_part.adjoint().eval();
    if (dev.cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("build_liouvillian: Hamiltonian must be Hermitian");

    const OperatorSet ops = hilbert::build_operators(spec.hilbert);
    std::vector<Channel> channels;
    channels.push_back({two_pi * 0.5 * spec.gamma_1, ops.sigma_minus.mat});
    channels.push_back({two_pi * 0.25 * spec.gamma_phi, ops.sigma_z.mat});
    channels.push_back({two_pi * 0.5 * spec.kappa * (spec.n_th + 1.0), ops.a.mat});
    if (spec.n_th > 0.0) channels.push_back({two_pi * 0.5 * spec.kappa * spec.n_th, ops.a_dag.mat});
    return Liouvillian(H, std::move(channels));
}

// -------------------------------- evolution ----------------------------------

struct Trajectory {
    std::vector<double> times;            // µs
    Matrix expectations;                  // rows: times, cols: observables
    std::vector<double> trace_deviation;
    std::vector<double> hermiticity_dev;
    std::vector<double> min_eigenvalue;
};

struct EvolveOptions {
    ode::IntegratorOptions integrator{};
    double trace_tol{1e-6};
    bool check_positivity{true};
};

struct EvolveResult {
    Trajectory trajectory;
    DensityMatrix final_state;
};

// Propagate an arbitrary (not necessarily Hermitian) matrix under the generator,
// sampling at the given absolute times. Used directly by correlation evaluations.
inline void propagate_matrix(const Liouvillian& L, const Matrix& X0, double t0,
                             const std::vector<double>& grid,
                             const std::function<void(std::size_t, double, const Matrix&)>& on_sample,
                             const ode::IntegratorOptions& opts = {}) {
    const int d = L.dim();
    if (X0.rows() != d || X0.cols() != d)
        throw std::invalid_argument("propagate_matrix: dimension mismatch");
    Vector x0 = Eigen::Map<const Vector>(X0.data(), d * d);
    ode::DormandPrince integ(opts);
    integ.integrate(
        [&L](double t, const Vector& y, Vector& dydt) { L.apply(t, y, dydt); }, t0, x0, grid,
        [&](std::size_t idx, double t, const Vector& y) {
            on_sample(idx, t, Eigen::Map<const Matrix>(y.data(), d, d));
        });
}

// Integrate the master equation from rho0 with dense output on `grid` (µs),
// recording expectation values of the supplied observables and the state
// health diagnostics at every grid point.
inline EvolveResult evolve(const Liouvillian& L, const DensityMatrix& rho0,
                           const std::vector<double>& grid, const std::vector<Operator>& observables,
                           const EvolveOptions& opts = {}) {
    if (grid.empty()) throw std::invalid_argument("evolve: empty time grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("evolve: grid must be monotone increasing");
    if (!(rho0.space == L.space())) throw std::invalid_argument("evolve: space mismatch");
    validate_density(rho0, 1e-8, 1e-8);

    const std::size_t m = grid.size();
    Trajectory traj;
    traj.times = grid;
    traj.expectations.resize(m, static_cast<Eigen::Index>(observables.size()));
    traj.trace_deviation.resize(m);
    traj.hermiticity_dev.resize(m);
    traj.min_eigenvalue.resize(m);

    Matrix final_rho;
    propagate_matrix(
        L, rho0.rho, grid.front(), grid,
        [&](std::size_t idx, double t, const Matrix& rho) {
            for (std::size_t k = 0; k < observables.size(); ++k)
                traj.expectations(idx, static_cast<Eigen::Index>(k)) = (rho * observables[k].mat).trace();
            StateDiagnostics d;
            d.trace_deviation = std::abs(rho.trace() - Complex(1.0, 0.0));
            d.hermiticity_dev = (rho - rho.adjoint().eval()).cwiseAbs().maxCoeff();
            if (opts.check_positivity) {
                Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint().eval()),
                                                         Eigen::EigenvaluesOnly);
                d.min_eigenvalue = es.eigenvalues().minCoeff();
            }
            traj.trace_deviation[idx] = d.trace_deviation;
            traj.hermiticity_dev[idx] = d.hermiticity_dev;
            traj.min_eigenvalue[idx] = d.min_eigenvalue;
            if (d.trace_deviation > opts.trace_tol)
                throw std::runtime_error("evolve: trace deviation " + std::to_string(d.trace_deviation) +
                                         " at t = " + std::to_string(t));
            if (idx + 1 == m) final_rho = rho;
        },
        opts.integrator);

    DensityMatrix fin{0.5 * (final_rho + final_rho.adjoint().eval()), L.space()};
    return EvolveResult{std::move(traj), std::move(fin)};
}

// ------------------------------- steady state --------------------------------

namespace detail {

// Solve the replaced-row system: row `row` of L is overwritten with the trace
// functional and the right-hand side is e_row.
inline Vector trace_replaced_solve(const SparseMatrix& L, int d, int row, bool& ok) {
    SparseMatrix A = L;
    // Zero the chosen row, then set trace entries.
    for (int col = 0; col < A.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(A, col); it; ++it)
            if (it.row() == row) it.valueRef() = Complex(0.0, 0.0);
    std::vector<Eigen::Triplet<Complex>> trip;
    for (int k = 0; k < d; ++k) trip.emplace_back(row, k * (d + 1), Complex(1.0, 0.0));
    SparseMatrix T(d * d, d * d);
    T.setFromTriplets(trip.begin(), trip.end());
    A += T;
    A.makeCompressed();

    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) {
        ok = false;
        return Vector::Zero(d * d);
    }
    Vector rhs = Vector::Zero(d * d);
    rhs[row] = 1.0;
    Vector x = lu.solve(rhs);
    // One round of iterative refinement against the replaced system.
    Vector r = rhs - A * x;
    x += lu.solve(r);
    ok = x.allFinite();
    return x;
}

}  // namespace detail

struct SteadyStateOptions {
    double residual_tol{1e-10};
    double degeneracy_tol{1e-6};
};

// Stationary state of a static generator by null-space solve with the trace
// condition replacing one row. A degenerate null space (dimension > 1) is
// reported, not silently resolved.
inline DensityMatrix steady_state(const Liouvillian& L, const SteadyStateOptions& opts = {}) {
    if (!L.is_static())
        throw std::invalid_argument("steady_state: generator has periodic terms");
    const int d = L.dim();
    const SparseMatrix& S = L.static_superoperator();

    bool ok1 = true, ok2 = true;
    Vector x1 = detail::trace_replaced_solve(S, d, 0, ok1);
    Vector x2 = detail::trace_replaced_solve(S, d, (d - 1) * (d + 1), ok2);
    if (!ok1 || !ok2)
        throw std::runtime_error("steady_state: degenerate or singular generator (factorization failed)");
    if ((x1 - x2).cwiseAbs().maxCoeff() > opts.degeneracy_tol)
        throw std::runtime_error("steady_state: degenerate null space (solutions from independent "
                                 "row replacements disagree)");

    const double residual = (S * x1).cwiseAbs().maxCoeff();
    if (residual > opts.residual_tol)
        throw std::runtime_error("steady_state: residual " + std::to_string(residual) +
                                 " exceeds tolerance");

    Matrix rho = Eigen::Map<const Matrix>(x1.data(), d, d);
    rho = 0.5 * (rho + rho.adjoint().eval());
    rho /= rho.trace().real();
    DensityMatrix out{std::move(rho), L.space()};
    validate_density(out, 1e-9, 1e-9, -1e-7);
    return out;
}

// --------------------------- truncation convergence --------------------------

struct ConvergenceOptions {
    int start{2};
    int step{2};
    int cap{40};
};

// Smallest N_c at which the supplied observable vector changes by less than
// rel_tol (relative to its max magnitude) when N_c is increased by `step`.
inline HilbertSpec converge_truncation(const SystemSpec& spec,
                                       const std::function<Eigen::VectorXd(const SystemSpec&)>& observable,
                                       double rel_tol, const ConvergenceOptions& opts = {}) {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("converge_truncation: rel_tol must be > 0");
    SystemSpec probe = spec;
    probe.hilbert.cavity_levels = opts.start;
    Eigen::VectorXd prev = observable(probe);
    for (int nc = opts.start; nc + opts.step <= opts.cap; nc += opts.step) {
        probe.hilbert.cavity_levels = nc + opts.step;
        Eigen::VectorXd next = observable(probe);
        const double scale = std::max(next.cwiseAbs().maxCoeff(), 1e-300);
        double change = 0.0;
        if (prev.size() == next.size())
            change = (next - prev).cwiseAbs().maxCoeff() / scale;
        else
            change = 1.0;  // observable shape changed; keep growing
        if (change < rel_tol) {
            HilbertSpec out = spec.hilbert;
            out.cavity_levels = nc;
            return out;
        }
        prev = std::move(next);
    }
    throw std::runtime_error("converge_truncation: no convergence up to cavity_levels = " +
                             std::to_string(opts.cap));
}

}  // namespace rfsim::lindblad
