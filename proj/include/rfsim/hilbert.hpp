// hilbert.hpp — Operators on the truncated atom⊗cavity space and the drive-displacement frame change

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rfsim::hilbert {

using Complex = std::complex<double>;
using Matrix  = Eigen::MatrixXcd;
using Vector  = Eigen::VectorXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Two-level atom ⊗ cavity truncated to the lowest `cavity_levels` Fock states.
// Basis order: atom index slowest (|g⟩ = 0, |e⟩ = 1), cavity Fock index fastest,
// so basis state k = atom·cavity_levels + fock.
struct HilbertSpec {
    int atom_levels{2};
    int cavity_levels{2};

    int dim() const noexcept { return atom_levels * cavity_levels; }

    void validate() const {
        if (atom_levels != 2)
            throw std::invalid_argument("HilbertSpec: atom_levels must be 2");
        if (cavity_levels < 2)
            throw std::invalid_argument("HilbertSpec: cavity_levels must be >= 2");
    }

    bool operator==(const HilbertSpec&) const = default;
};

// Dense operator tagged with its Hilbert space.
struct Operator {
    Matrix mat;
    HilbertSpec space;

    int dim() const noexcept { return static_cast<int>(mat.rows()); }
    bool finite() const { return mat.allFinite(); }
};

// Kronecker product with the first factor slowest:
// (A ⊗ B)(i_a·d_b + i_b, j_a·d_b + j_b) = A(i_a, j_a)·B(i_b, j_b).
inline Matrix kron(const Matrix& A, const Matrix& B) {
    const Eigen::Index ra = A.rows(), ca = A.cols();
    const Eigen::Index rb = B.rows(), cb = B.cols();
    Matrix out(ra * rb, ca * cb);
    for (Eigen::Index i = 0; i < ra; ++i)
        for (Eigen::Index j = 0; j < ca; ++j)
            out.block(i * rb, j * cb, rb, cb) = A(i, j) * B;
    return out;
}

// Embed a 2x2 atom operator and an Nc x Nc cavity operator into the full space.
inline Operator tensor(const Matrix& atom_op, const Matrix& cavity_op, const HilbertSpec& space) {
    space.validate();
    if (atom_op.rows() != space.atom_levels || atom_op.cols() != space.atom_levels)
        throw std::invalid_argument("tensor: atom factor dimension mismatch");
    if (cavity_op.rows() != space.cavity_levels || cavity_op.cols() != space.cavity_levels)
        throw std::invalid_argument("tensor: cavity factor dimension mismatch");
    return Operator{kron(atom_op, cavity_op), space};
}

struct OperatorSet {
    Operator a;            // cavity annihilation
    Operator a_dag;        // cavity creation
    Operator sigma_minus;  // |g⟩⟨e|
    Operator sigma_plus;   // |e⟩⟨g|
    Operator sigma_z;      // |e⟩⟨e| − |g⟩⟨g|
    Operator identity;
    HilbertSpec space;
};

// All six elementary operators on the full tensor space. Atom operators act as
// identity on the cavity factor and vice versa.
inline OperatorSet build_operators(const HilbertSpec& space) {
    space.validate();
    const int nc = space.cavity_levels;

    Matrix id2 = Matrix::Identity(2, 2);
    Matrix idc = Matrix::Identity(nc, nc);

    Matrix a_c = Matrix::Zero(nc, nc);
    for (int n = 1; n < nc; ++n) a_c(n - 1, n) = std::sqrt(static_cast<double>(n));

    Matrix sm = Matrix::Zero(2, 2);
    sm(0, 1) = 1.0;  // |g⟩⟨e|
    Matrix sp = Matrix::Zero(2, 2);
    sp(1, 0) = 1.0;  // |e⟩⟨g|
    Matrix sz = Matrix::Zero(2, 2);
    sz(0, 0) = -1.0;
    sz(1, 1) = 1.0;

    OperatorSet ops;
    ops.space       = space;
    ops.a           = tensor(id2, a_c, space);
    ops.a_dag       = Operator{ops.a.mat.adjoint(), space};
    ops.sigma_minus = tensor(sm, idc, space);
    ops.sigma_plus  = tensor(sp, idc, space);
    ops.sigma_z     = tensor(sz, idc, space);
    ops.identity    = Operator{Matrix::Identity(space.dim(), space.dim()), space};
    return ops;
}

// Full physical parameter set. All frequencies, rates and couplings are stored
// as angular values in units of 2π·MHz (the stored number is ω/2π in MHz);
// times are in microseconds throughout. Detunings are always derived, never
// stored.
struct SystemSpec {
    double omega_a{6814.0};   // atom transition
    double omega_c{6777.0};   // cavity mode
    double omega_d{6814.0};   // coherent drive
    double omega_pc{6777.0};  // cavity pump
    double gamma_1{3.6};      // atom energy relaxation
    double gamma_phi{1.0};    // atom pure dephasing
    double gamma_e{3.5};      // emission into the waveguide
    double kappa{1.5};        // cavity decay
    double g_c{7.5};          // atom-cavity coupling
    double Omega{0.0};        // atom Rabi drive
    double Omega_c{0.0};      // cavity-port drive amplitude
    double pump_amp{0.0};     // cavity pump amplitude
    double n_th{0.0};         // mean thermal photons in the cavity bath
    HilbertSpec hilbert{2, 12};

    double delta_a() const noexcept { return omega_a - omega_d; }
    double delta_c() const noexcept { return omega_c - omega_d; }
    double delta_0() const noexcept { return omega_a - omega_c; }
    double gamma_2() const noexcept { return 0.5 * gamma_1 + gamma_phi; }

    void validate() const {
        auto nonneg = [](double v, const char* name) {
            if (!(v >= 0.0))
                throw std::invalid_argument(std::string("SystemSpec: ") + name + " must be >= 0");
        };
        nonneg(gamma_1, "gamma_1");
        nonneg(gamma_phi, "gamma_phi");
        nonneg(gamma_e, "gamma_e");
        nonneg(kappa, "kappa");
        nonneg(n_th, "n_th");
        if (gamma_e > gamma_1 + 1e-12)
            throw std::invalid_argument("SystemSpec: gamma_e must not exceed gamma_1");
        hilbert.validate();
    }
};

// Move a detuned cavity-port drive onto the atom: Ω += −g_c·Ω_c/Δ_c, Ω_c → 0.
// Rejects near-resonant port drives, where the displacement picture breaks down.
inline SystemSpec displace_frame(const SystemSpec& spec, double min_detuning = 0.1) {
    spec.validate();
    SystemSpec out = spec;
    if (spec.Omega_c == 0.0) return out;
    if (std::abs(spec.delta_c()) < min_detuning)
        throw std::invalid_argument(
            "displace_frame: port drive is resonant with the cavity (|delta_c| below floor)");
    out.Omega += -spec.g_c * spec.Omega_c / spec.delta_c();
    out.Omega_c = 0.0;
    return out;
}

}  // namespace rfsim::hilbert
