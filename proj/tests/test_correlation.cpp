#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rfsim/correlation.hpp"
#include "support/oracles.hpp"

using namespace rfsim;
using hilbert::Complex;
using hilbert::Matrix;
using hilbert::two_pi;
namespace corr = rfsim::correlation;

namespace {

struct Setup {
    hilbert::SystemSpec spec;
    lindblad::Liouvillian L;
    lindblad::DensityMatrix ss;
    hilbert::OperatorSet ops;
};

Setup make_setup(double omega, double g_c, int nc, double n_th = 0.0) {
    hilbert::SystemSpec spec;
    spec.Omega = omega;
    spec.g_c = g_c;
    spec.n_th = n_th;
    spec.hilbert.cavity_levels = nc;
    auto H = lindblad::build_hamiltonian(spec);
    lindblad::Liouvillian L = lindblad::build_liouvillian(H, spec);
    auto ss = lindblad::steady_state(L);
    return Setup{spec, std::move(L), std::move(ss), hilbert::build_operators(spec.hilbert)};
}

}  // namespace

TEST_CASE("coincidence limit equals the stationary population") {
    auto s = make_setup(14.5, 0.0, 2);
    auto tau = corr::default_tau_grid(s.spec, 40.0);
    auto trace = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau);
    const Complex expected = (s.ss.rho * (s.ops.sigma_plus.mat * s.ops.sigma_minus.mat)).trace();
    REQUIRE(std::abs(trace.values[0] - expected) < 1e-12);
}

TEST_CASE("long-time factorization") {
    auto s = make_setup(14.5, 0.0, 2);
    auto tau = corr::default_tau_grid(s.spec, 40.0);
    auto trace = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau);
    const Complex prod = (s.ss.rho * s.ops.sigma_plus.mat).trace() *
                         (s.ss.rho * s.ops.sigma_minus.mat).trace();
    REQUIRE(std::abs(trace.asymptote - prod) < 1e-14);
    const double rel = std::abs(trace.values[trace.values.size() - 1] - prod) /
                       std::abs(trace.values[0]);
    REQUIRE(rel < 1e-6);
}

TEST_CASE("non-stationary input is rejected") {
    auto s = make_setup(14.5, 0.0, 2);
    auto bad = lindblad::ground_state(s.spec.hilbert);
    auto tau = corr::default_tau_grid(s.spec, 40.0);
    REQUIRE_THROWS_AS(
        corr::two_time_correlation(s.L, bad, s.ops.sigma_plus, s.ops.sigma_minus, tau),
        std::invalid_argument);
}

TEST_CASE("decoupled-atom correlation matches the two-level regression oracle") {
    auto s = make_setup(8.0, 0.0, 2);
    std::vector<double> tau(301);
    for (int i = 0; i <= 300; ++i) tau[static_cast<std::size_t>(i)] = i * 0.002;
    auto trace = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau);

    // Atom-block reduced state (cavity in vacuum).
    Eigen::Matrix2cd rho2;
    const int nc = s.spec.hilbert.cavity_levels;
    rho2 << s.ss.rho(0, 0) + s.ss.rho(1, 1), s.ss.rho(0, nc), s.ss.rho(nc, 0),
        s.ss.rho(nc, nc) + s.ss.rho(nc + 1, nc + 1);
    oracles::BlochParams p{two_pi * s.spec.Omega, two_pi * s.spec.gamma_1,
                           two_pi * s.spec.gamma_2()};
    auto ref = oracles::two_level_regression(p, rho2, tau, 2e-5);
    for (std::size_t i = 0; i < tau.size(); ++i)
        REQUIRE(std::abs(trace.values[static_cast<Eigen::Index>(i)] - ref[i]) < 5e-7);
}

TEST_CASE("propagated and eigen-path correlations agree") {
    auto s = make_setup(37.0, 7.5, 6);
    std::vector<double> tau(201);
    for (int i = 0; i <= 200; ++i) tau[static_cast<std::size_t>(i)] = i * 0.004;
    corr::TwoTimeOptions prop, eig;
    eig.method = corr::TwoTimeOptions::Method::eigen;
    auto t1 = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau, prop);
    auto t2 = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau, eig);
    for (Eigen::Index i = 0; i < t1.values.size(); ++i)
        REQUIRE(std::abs(t1.values[i] - t2.values[i]) < 1e-7);
}

TEST_CASE("g1 normalization") {
    auto s = make_setup(14.5, 0.0, 2);
    auto tau = corr::default_tau_grid(s.spec, 40.0);
    auto trace = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau);
    auto norm = corr::g1(trace);
    REQUIRE(norm.normalized);
    REQUIRE(std::abs(norm.values[0] - Complex(1.0, 0.0)) < 1e-12);
    REQUIRE_THROWS_AS(corr::g1(norm), std::invalid_argument);

    // Undriven system has zero coincidence value.
    auto dark = make_setup(0.0, 7.5, 3);
    auto dtrace =
        corr::two_time_correlation(dark.L, dark.ss, dark.ops.sigma_plus, dark.ops.sigma_minus, tau);
    REQUIRE_THROWS_AS(corr::g1(dtrace), std::invalid_argument);
}

TEST_CASE("dark atom emits nothing") {
    auto s = make_setup(0.0, 7.5, 3);
    auto tau = corr::default_tau_grid(s.spec, 65.0);
    auto trace = corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau);
    auto spec = corr::emission_spectrum(trace);
    REQUIRE(spec.density.cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(spec.peaks.empty());
}

TEST_CASE("Mollow triplet of the decoupled atom") {
    auto s = make_setup(14.5, 0.0, 2);
    auto L = s.L;
    corr::SpectrumOptions sopts;
    sopts.f_min = -40.0;
    sopts.f_max = 40.0;
    auto base = corr::default_tau_grid(s.spec, 40.0);
    auto trace = corr::correlate_until_settled(L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, base);
    auto spec = corr::emission_spectrum(trace, sopts);

    REQUIRE(spec.peaks.size() == 3);
    REQUIRE(spec.peaks[0].position == Catch::Approx(-14.5).margin(0.2));
    REQUIRE(spec.peaks[1].position == Catch::Approx(0.0).margin(0.2));
    REQUIRE(spec.peaks[2].position == Catch::Approx(14.5).margin(0.2));

    // Independent oracle: peak offsets are imaginary parts of strongly weighted
    // Liouvillian eigenmodes.
    auto modes = corr::correlation_modes(L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus);
    double wmax = 0.0;
    for (Eigen::Index k = 0; k < modes.weights.size(); ++k)
        wmax = std::max(wmax, std::abs(modes.weights[k]));
    for (const auto& p : spec.peaks) {
        bool matched = false;
        for (Eigen::Index k = 0; k < modes.lambda.size(); ++k) {
            if (std::abs(modes.weights[k]) < 0.02 * wmax) continue;
            if (std::abs(-modes.lambda[k].imag() / two_pi - p.position) < 0.3) matched = true;
        }
        REQUIRE(matched);
    }
}

TEST_CASE("spectrum path equivalence and integral identity") {
    auto s = make_setup(37.0, 7.5, 8);
    corr::SpectrumOptions sopts;
    sopts.f_min = -120.0;
    sopts.f_max = 120.0;
    sopts.df = 0.05;

    auto base = corr::default_tau_grid(s.spec, 120.0);
    auto trace = corr::correlate_until_settled(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, base);
    auto s_dft = corr::emission_spectrum(trace, sopts);
    auto modes = corr::correlation_modes(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus);
    auto s_eig = corr::emission_spectrum_from_modes(modes, sopts);

    const double peak = s_eig.density.maxCoeff();
    REQUIRE(peak > 0.0);
    REQUIRE((s_dft.density - s_eig.density).cwiseAbs().maxCoeff() < 0.01 * peak);

    // ∫S dω over the band equals the incoherent coincidence value within 2%.
    const double dw = two_pi * sopts.df;
    const double integral = s_eig.density.sum() * dw;
    const double expected = (trace.values[0] - trace.asymptote).real();
    REQUIRE(integral == Catch::Approx(expected).epsilon(0.02));

    // Nonnegativity within the numerical floor.
    REQUIRE(s_eig.density.minCoeff() > -1e-9 * peak);

    // Coherent weight separated by the eigen path matches the asymptote.
    REQUIRE(std::abs(modes.coherent_weight - trace.asymptote) < 1e-8);
}

TEST_CASE("weak-drive emission line has HWHM gamma_2") {
    auto s = make_setup(0.4, 0.0, 2);
    corr::SpectrumOptions sopts;
    sopts.f_min = -25.0;
    sopts.f_max = 25.0;
    sopts.df = 0.02;
    auto modes = corr::correlation_modes(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus);
    auto spec = corr::emission_spectrum_from_modes(modes, sopts);
    REQUIRE(spec.peaks.size() >= 1);
    const auto central =
        *std::min_element(spec.peaks.begin(), spec.peaks.end(),
                          [](const corr::Peak& a, const corr::Peak& b) {
                              return std::abs(a.position) < std::abs(b.position);
                          });
    REQUIRE(0.5 * central.fwhm == Catch::Approx(s.spec.gamma_2()).epsilon(0.05));
}

TEST_CASE("sideband asymmetry favors the +Delta_0 group") {
    auto s = make_setup(37.0, 7.5, 8);
    corr::SpectrumOptions sopts;
    sopts.f_min = -60.0;
    sopts.f_max = 60.0;
    auto modes = corr::correlation_modes(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus);
    auto spec = corr::emission_spectrum_from_modes(modes, sopts);
    double left = 0.0, right = 0.0;
    for (Eigen::Index i = 0; i < spec.freq.size(); ++i) {
        if (spec.freq[i] > 24.5 && spec.freq[i] < 49.5) right += spec.density[i];
        if (spec.freq[i] < -24.5 && spec.freq[i] > -49.5) left += spec.density[i];
    }
    REQUIRE(right > left);
}

TEST_CASE("peak detection is deterministic") {
    auto s = make_setup(37.0, 7.5, 6);
    corr::SpectrumOptions sopts;
    auto modes = corr::correlation_modes(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus);
    auto a = corr::emission_spectrum_from_modes(modes, sopts);
    auto b = corr::emission_spectrum_from_modes(modes, sopts);
    REQUIRE(a.peaks.size() == b.peaks.size());
    for (std::size_t i = 0; i < a.peaks.size(); ++i) {
        REQUIRE(a.peaks[i].position == b.peaks[i].position);
        REQUIRE(a.peaks[i].height == b.peaks[i].height);
        REQUIRE(a.peaks[i].fwhm == b.peaks[i].fwhm);
    }
}

TEST_CASE("span and aliasing guards") {
    auto s = make_setup(14.5, 0.0, 2);
    std::vector<double> tau_short(32);
    for (int i = 0; i < 32; ++i) tau_short[static_cast<std::size_t>(i)] = i * 0.002;
    auto trace =
        corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau_short);
    REQUIRE_THROWS_WITH(corr::emission_spectrum(trace),
                        Catch::Matchers::ContainsSubstring("insufficient tau span"));

    // Coarse grid vs wide band.
    std::vector<double> tau_coarse(600);
    for (int i = 0; i < 600; ++i) tau_coarse[static_cast<std::size_t>(i)] = i * 0.02;
    auto trace2 =
        corr::two_time_correlation(s.L, s.ss, s.ops.sigma_plus, s.ops.sigma_minus, tau_coarse);
    corr::SpectrumOptions wide;
    wide.f_max = 65.0;
    wide.f_min = -65.0;
    REQUIRE_THROWS_WITH(corr::emission_spectrum(trace2, wide),
                        Catch::Matchers::ContainsSubstring("aliasing"));
}

TEST_CASE("modulated spectrum with zero-amplitude pump reduces to the static case") {
    hilbert::SystemSpec spec;
    spec.Omega = 20.0;
    spec.hilbert.cavity_levels = 5;
    auto H = lindblad::build_hamiltonian(spec);
    // Inject an explicit zero-amplitude periodic term at the pump detuning.
    H.periodic.push_back(
        {Matrix::Zero(spec.hilbert.dim(), spec.hilbert.dim()), two_pi * (spec.omega_pc - spec.omega_d)});
    auto L = lindblad::build_liouvillian(H, spec);
    REQUIRE_FALSE(L.is_static());

    corr::SpectrumOptions sopts;
    sopts.f_min = -60.0;
    sopts.f_max = 60.0;
    sopts.df = 0.1;
    auto base = corr::default_tau_grid(spec, 60.0, 2.0);
    auto mod = corr::modulated_spectrum(L, base, sopts);

    auto H0 = lindblad::build_hamiltonian(spec);
    auto L0 = lindblad::build_liouvillian(H0, spec);
    auto ss = lindblad::steady_state(L0);
    auto ops = hilbert::build_operators(spec.hilbert);
    auto trace = corr::correlate_until_settled(L0, ss, ops.sigma_plus, ops.sigma_minus, base);
    auto stat = corr::emission_spectrum(trace, sopts);

    const double scale = stat.density.cwiseAbs().maxCoeff();
    REQUIRE((mod.density - stat.density).cwiseAbs().maxCoeff() < 1e-6 * scale);
}

TEST_CASE("pump calibration reaches the target photon number") {
    hilbert::SystemSpec spec;
    spec.Omega = 0.0;
    spec.hilbert.cavity_levels = 8;
    const double target = 0.6;
    auto cal = corr::calibrate_pump(spec, target);
    REQUIRE(std::abs(cal.achieved_n - target) <= 0.01 * target);
    REQUIRE(cal.pump_amp > 0.0);

    // Monotonicity over a sampled sweep.
    auto mean_at = [&](double p) {
        hilbert::SystemSpec s = spec;
        s.pump_amp = p;
        auto L = lindblad::build_liouvillian(lindblad::build_hamiltonian(s), s);
        return corr::periodic_steady_state(L).mean_photon;
    };
    const double n1 = mean_at(0.6 * cal.pump_amp);
    const double n2 = mean_at(0.85 * cal.pump_amp);
    REQUIRE(n1 < n2);
    REQUIRE(n2 < cal.achieved_n);
}

TEST_CASE("power and field traces") {
    SECTION("ground state emits nothing") {
        std::vector<double> t{0.0, 0.1, 0.2};
        Eigen::VectorXcd sz(3), sm(3);
        sz.setConstant(Complex(-1.0, 0.0));
        sm.setZero();
        hilbert::SystemSpec spec;
        auto pw = corr::output_power_trace(t, sz, spec);
        REQUIRE(pw.literal.cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(pw.physical.cwiseAbs().maxCoeff() == 0.0);
        auto fd = corr::output_field_trace(t, sm, spec);
        REQUIRE(fd.field.cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(fd.b_out.cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("free decay recovers T1 within 1%") {
        hilbert::SystemSpec spec;
        spec.g_c = 0.0;
        spec.Omega = 0.0;
        spec.hilbert.cavity_levels = 2;
        auto L = lindblad::build_liouvillian(lindblad::build_hamiltonian(spec), spec);
        auto ops = hilbert::build_operators(spec.hilbert);
        Matrix rho = Matrix::Zero(4, 4);
        rho(2, 2) = 1.0;  // |e,0⟩
        std::vector<double> grid(121);
        for (int i = 0; i <= 120; ++i) grid[static_cast<std::size_t>(i)] = i * 0.0025;
        auto res = lindblad::evolve(L, {rho, spec.hilbert}, grid, {ops.sigma_z});
        auto pw = corr::output_power_trace(grid, res.trajectory.expectations.col(0), spec);
        std::vector<double> y(pw.physical.data(), pw.physical.data() + pw.physical.size());
        auto fit = device::fit_exponential(grid, y);
        const double t1_expected = 1.0 / (two_pi * spec.gamma_1);
        REQUIRE(fit.params[1] == Catch::Approx(t1_expected).epsilon(0.01));
    }

    SECTION("coherent emission is bounded by the total emission") {
        auto s = make_setup(10.0, 0.0, 2);
        const Complex sm = (s.ss.rho * s.ops.sigma_minus.mat).trace();
        const double total = (s.ss.rho * (s.ops.sigma_plus.mat * s.ops.sigma_minus.mat))
                                 .trace()
                                 .real();
        std::vector<double> t{0.0};
        Eigen::VectorXcd smv(1);
        smv[0] = sm;
        auto fd = corr::output_field_trace(t, smv, s.spec);
        const double ge_half = two_pi * s.spec.gamma_e / 2.0;
        REQUIRE(std::norm(fd.b_out[0]) <= ge_half * total + 1e-12);
    }
}

TEST_CASE("pumped scenarios need a larger truncation than vacuum ones") {
    // Mean-photon observable: static steady state for the vacuum case, periodic
    // steady state when the pump is active.
    auto observable = [](const hilbert::SystemSpec& s) {
        Eigen::VectorXd v(1);
        if (s.pump_amp == 0.0) {
            auto L = lindblad::build_liouvillian(lindblad::build_hamiltonian(s), s);
            auto ss = lindblad::steady_state(L);
            auto ops = hilbert::build_operators(s.hilbert);
            v[0] = (ss.rho * (ops.a_dag.mat * ops.a.mat)).trace().real();
        } else {
            auto L = lindblad::build_liouvillian(lindblad::build_hamiltonian(s), s);
            v[0] = corr::periodic_steady_state(L).mean_photon;
        }
        return v;
    };

    hilbert::SystemSpec vacuum;
    vacuum.Omega = 37.0;
    auto nc_vac = lindblad::converge_truncation(vacuum, observable, 1e-3);

    hilbert::SystemSpec pumped = vacuum;
    pumped.pump_amp = 2.2;  // drives ⟨n⟩ well above 1
    lindblad::ConvergenceOptions copts;
    copts.start = 4;
    auto nc_pump = lindblad::converge_truncation(pumped, observable, 1e-3, copts);
    REQUIRE(nc_pump.cavity_levels > nc_vac.cavity_levels);
}
