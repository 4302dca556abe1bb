// test_hamiltonians.cpp — Generator constructors against independently built
// Kronecker-product oracles and small analytic spectra.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qdb/hamiltonians.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace {

using qdb::Cx;

// ---- Independent building blocks (no library helpers) ----

Eigen::MatrixXcd kron2(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
    Eigen::MatrixXcd out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

// Chain product, slowest factor first (qubit 1 slowest, boson last/fastest).
Eigen::MatrixXcd kron_chain(const std::vector<Eigen::MatrixXcd>& ms) {
    Eigen::MatrixXcd out = ms.front();
    for (std::size_t k = 1; k < ms.size(); ++k) out = kron2(out, ms[k]);
    return out;
}

Eigen::MatrixXcd eye(int n) { return Eigen::MatrixXcd::Identity(n, n); }

Eigen::MatrixXcd ox() {
    Eigen::MatrixXcd m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Eigen::MatrixXcd oy() {
    Eigen::MatrixXcd m(2, 2);
    m << Cx(0, 0), Cx(0, -1), Cx(0, 1), Cx(0, 0);
    return m;
}

Eigen::MatrixXcd oz() {
    Eigen::MatrixXcd m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

// Spin basis {|↑⟩, |↓⟩}: raising |↑⟩⟨↓| has entry (0,1), lowering (1,0).
Eigen::MatrixXcd raise2() {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(0, 1) = 1.0;
    return m;
}

Eigen::MatrixXcd lower2() {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(1, 0) = 1.0;
    return m;
}

Eigen::MatrixXcd boson_lower(int d) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
    for (int q = 1; q < d; ++q) a(q - 1, q) = std::sqrt(static_cast<double>(q));
    return a;
}

// Pauli operator `op2` on qubit j of an N-qubit register (no boson).
Eigen::MatrixXcd on_qubit(const Eigen::MatrixXcd& op2, int j, int N) {
    std::vector<Eigen::MatrixXcd> factors;
    for (int k = 1; k <= N; ++k) factors.push_back(k == j ? op2 : eye(2));
    return kron_chain(factors);
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

Eigen::MatrixXcd commutator(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return a * b - b * a;
}

} // namespace

// ---- Blue sideband ----

TEST_CASE("blue sideband has the anti-Jaynes-Cummings matrix elements") {
    // Single qubit + boson with d = 3: full matrix is the local block itself,
    // basis index = qubit_digit·3 + level (qubit digit 0 = ↑).
    const qdb::SpinBosonSpace space{1, 3};
    const qdb::LinearOperator h = qdb::blue_sideband(1, space);
    REQUIRE(h.matrix.rows() == 6);
    CHECK(h.hermitian);
    CHECK_FALSE(h.real_in_canonical_basis);

    // ⟨↑,l+1|H|↓,l⟩ = −i√(l+1): rows 0·3+(l+1), columns 1·3+l.
    CHECK(std::abs(h.matrix(1, 3) - Cx(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(h.matrix(2, 4) - Cx(0.0, -std::sqrt(2.0))) < 1e-14);
    CHECK(std::abs(h.matrix(3, 1) - Cx(0.0, +1.0)) < 1e-14);
    CHECK(std::abs(h.matrix(4, 2) - Cx(0.0, +std::sqrt(2.0))) < 1e-14);

    // Purely imaginary and Hermitian.
    CHECK(h.matrix.real().cwiseAbs().maxCoeff() < 1e-15);
    CHECK(max_abs(h.matrix - h.matrix.adjoint()) < 1e-15);

    // Exactly four nonzero entries for d = 3.
    int nnz = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (std::abs(h.matrix(i, j)) > 1e-15) ++nnz;
    CHECK(nnz == 4);
}

TEST_CASE("blue sideband equals i(a sigma- - adag sigma+) built by hand") {
    // Oracle built directly from the definition with independent ladder
    // matrices, ordering [qubit 1, ..., qubit N, boson].
    for (int N : {1, 2}) {
        const int d = 4;
        const qdb::SpinBosonSpace space{N, d};
        const Eigen::MatrixXcd a = boson_lower(d);
        const Eigen::MatrixXcd adag = a.adjoint();
        for (int j = 1; j <= N; ++j) {
            std::vector<Eigen::MatrixXcd> t1, t2;
            for (int k = 1; k <= N; ++k) {
                t1.push_back(k == j ? lower2() : eye(2));
                t2.push_back(k == j ? raise2() : eye(2));
            }
            t1.push_back(a);
            t2.push_back(adag);
            const Eigen::MatrixXcd oracle =
                Cx(0.0, 1.0) * (kron_chain(t1) - kron_chain(t2));
            const qdb::LinearOperator h = qdb::blue_sideband(j, space);
            CAPTURE(N);
            CAPTURE(j);
            CHECK(max_abs(h.matrix - oracle) < 1e-14);
        }
    }
}

TEST_CASE("blue sideband commutes with the extended magnetization") {
    const qdb::SpinBosonSpace space{3, 4};
    const Eigen::MatrixXcd z = qdb::extended_magnetization(space).matrix;
    for (int j = 1; j <= 3; ++j) {
        const Eigen::MatrixXcd h = qdb::blue_sideband(j, space).matrix;
        CHECK(max_abs(commutator(h, z)) < 1e-12);
        // ... but not with the bare magnetization (it trades spin for boson).
        const Eigen::MatrixXcd m = qdb::magnetization(space).matrix;
        CHECK(max_abs(commutator(h, m)) > 0.5);
    }
}

TEST_CASE("blue sideband rejects unusable spaces") {
    CHECK_THROWS_AS((void)qdb::blue_sideband(1, qdb::SpinBosonSpace{2, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)qdb::blue_sideband(1, qdb::SpinBosonSpace{2, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)qdb::blue_sideband(3, qdb::SpinBosonSpace{2, 3}),
                    std::invalid_argument);
}

// ---- Magnetization diagnostics ----

TEST_CASE("extended magnetization diagonal reads half spin sum minus level") {
    const int d = 4;
    const qdb::SpinBosonSpace space{2, d};
    const Eigen::MatrixXcd z = qdb::extended_magnetization(space).matrix;
    CHECK(max_abs(z - Eigen::MatrixXcd(z.diagonal().asDiagonal())) < 1e-15);
    // index = (b1·2 + b2)·d + q, bit 0 = ↑ contributes +1/2.
    CHECK(std::abs(z(0 * d + 0, 0 * d + 0) - Cx(1.0, 0.0)) < 1e-15);  // ↑↑, q=0
    CHECK(std::abs(z(0 * d + 3, 0 * d + 3) - Cx(-2.0, 0.0)) < 1e-15); // ↑↑, q=3
    CHECK(std::abs(z(2 * d + 1, 2 * d + 1) - Cx(-1.0, 0.0)) < 1e-15); // ↓↑, q=1
    CHECK(std::abs(z(3 * d + 2, 3 * d + 2) - Cx(-3.0, 0.0)) < 1e-15); // ↓↓, q=2
    CHECK_THROWS_AS((void)qdb::extended_magnetization(qdb::SpinBosonSpace{2, 0}),
                    std::invalid_argument);
}

TEST_CASE("magnetization ignores the boson level") {
    const qdb::SpinBosonSpace space{2, 3};
    const Eigen::MatrixXcd m = qdb::magnetization(space).matrix;
    // Oracle: ½(σ^z_1 + σ^z_2) ⊗ I_boson.
    const Eigen::MatrixXcd oracle =
        0.5 * (kron_chain({oz(), eye(2), eye(3)}) + kron_chain({eye(2), oz(), eye(3)}));
    CHECK(max_abs(m - oracle) < 1e-14);
}

// ---- Moelmer-Soerensen coupling ----

TEST_CASE("ms coupling matches the pairwise xx sum") {
    const qdb::SpinBosonSpace space{3, 0};
    SUBCASE("full set {1,2,3}") {
        const Eigen::MatrixXcd h = qdb::ms_coupling({1, 2, 3}, space).matrix;
        const Eigen::MatrixXcd oracle = kron_chain({ox(), ox(), eye(2)}) +
                                        kron_chain({ox(), eye(2), ox()}) +
                                        kron_chain({eye(2), ox(), ox()});
        CHECK(max_abs(h - oracle) < 1e-14);
    }
    SUBCASE("non-adjacent pair {1,3}") {
        const Eigen::MatrixXcd h = qdb::ms_coupling({1, 3}, space).matrix;
        CHECK(max_abs(h - kron_chain({ox(), eye(2), ox()})) < 1e-14);
    }
    SUBCASE("adjacent pair {2,3}") {
        const Eigen::MatrixXcd h = qdb::ms_coupling({2, 3}, space).matrix;
        CHECK(max_abs(h - kron_chain({eye(2), ox(), ox()})) < 1e-14);
    }
}

TEST_CASE("ms coupling conserves spin parity but not magnetization") {
    const qdb::SpinBosonSpace space{2, 0};
    const Eigen::MatrixXcd h = qdb::ms_coupling({1, 2}, space).matrix;
    const Eigen::MatrixXcd parity = kron_chain({oz(), oz()});
    const Eigen::MatrixXcd magn = 0.5 * (on_qubit(oz(), 1, 2) + on_qubit(oz(), 2, 2));
    CHECK(max_abs(commutator(h, parity)) < 1e-14);
    CHECK(max_abs(commutator(h, magn)) > 0.5);
    CHECK_THROWS_AS((void)qdb::ms_coupling({1}, space), std::invalid_argument);
}

// ---- XY Hamiltonian ----

TEST_CASE("xy hamiltonian matches the explicit pauli sum") {
    const int N = 3;
    const double alpha = 1.0, J0 = 2.0, B = 0.7;
    auto oracle_qubits = [&](int n) {
        const long long dim = 1LL << n;
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
        for (int i = 1; i <= n; ++i) {
            h += B * on_qubit(oz(), i, n);
            for (int j = i + 1; j <= n; ++j) {
                const double Jij = J0 * std::pow(static_cast<double>(j - i), -alpha);
                h += (Jij / 2.0) *
                     (on_qubit(ox(), i, n) * on_qubit(ox(), j, n) +
                      on_qubit(oy(), i, n) * on_qubit(oy(), j, n));
            }
        }
        return h;
    };
    SUBCASE("qubit-only space") {
        const qdb::LinearOperator h = qdb::xy_hamiltonian(N, alpha, J0, B, {N, 0});
        CHECK(h.hermitian);
        CHECK(h.real_in_canonical_basis);
        CHECK(max_abs(h.matrix - oracle_qubits(N)) < 1e-12);
    }
    SUBCASE("boson present but untouched") {
        const qdb::LinearOperator h = qdb::xy_hamiltonian(N, alpha, J0, B, {N, 2});
        CHECK(max_abs(h.matrix - kron2(oracle_qubits(N), eye(2))) < 1e-12);
    }
    SUBCASE("bad arguments") {
        CHECK_THROWS_AS((void)qdb::xy_hamiltonian(1, alpha, J0, B, qdb::SpinBosonSpace{1, 0}),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)qdb::xy_hamiltonian(3, 0.0, J0, B, qdb::SpinBosonSpace{3, 0}),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)qdb::xy_hamiltonian(3, alpha, J0, B, qdb::SpinBosonSpace{2, 0}),
                        std::invalid_argument);
    }
}

TEST_CASE("xy hamiltonian conserves total magnetization") {
    const qdb::SpinBosonSpace space{3, 0};
    const Eigen::MatrixXcd h = qdb::xy_hamiltonian(3, 1.34, 1.0, 20.0, space).matrix;
    const Eigen::MatrixXcd m = qdb::magnetization(space).matrix;
    CHECK(max_abs(commutator(h, m)) < 1e-12);
}

// ---- Dimerized XY chain ----

TEST_CASE("dimerized chain spectrum matches the two-site analytic solution") {
    // N = 2, single bond of strength (1+t), boundary fields ±B on the two
    // sites. The one-flip block is [[2B, 2(1+t)], [2(1+t), -2B]] with
    // eigenvalues ±2√((1+t)² + B²); the aligned states have energy 0.
    for (double t : {0.5, -0.5}) {
        const double B = 0.1;
        const Eigen::MatrixXcd h = qdb::ssh_hamiltonian(2, t, B, {2, 0}).matrix;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        const double E = 2.0 * std::sqrt((1.0 + t) * (1.0 + t) + B * B);
        CAPTURE(t);
        CHECK(std::abs(es.eigenvalues()(0) + E) < 1e-12);
        CHECK(std::abs(es.eigenvalues()(1)) < 1e-12);
        CHECK(std::abs(es.eigenvalues()(2)) < 1e-12);
        CHECK(std::abs(es.eigenvalues()(3) - E) < 1e-12);
    }
}

TEST_CASE("fully dimerized four-site chain decouples into two dimers") {
    // t = 1 kills the even bond: two dimers with hop 2·2 = 4 and one boundary
    // field each, so E0 = -2√(16 + B²).
    const double B = 0.1;
    const Eigen::MatrixXcd h = qdb::ssh_hamiltonian(4, 1.0, B, {4, 0}).matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    CHECK(std::abs(es.eigenvalues()(0) + 2.0 * std::sqrt(16.0 + B * B)) < 1e-12);
}

TEST_CASE("dimerized chain matches the explicit pauli sum") {
    const int N = 4;
    const double t = 0.3, B = 0.2;
    Eigen::MatrixXcd oracle = Eigen::MatrixXcd::Zero(16, 16);
    for (int j = 1; j < N; ++j) {
        const double bond = 1.0 - std::pow(-1.0, j) * t;
        oracle += bond * (on_qubit(ox(), j, N) * on_qubit(ox(), j + 1, N) +
                          on_qubit(oy(), j, N) * on_qubit(oy(), j + 1, N));
    }
    oracle += B * (on_qubit(oz(), 1, N) - on_qubit(oz(), N, N));
    const qdb::LinearOperator h = qdb::ssh_hamiltonian(N, t, B, {N, 0});
    CHECK(h.hermitian);
    CHECK(h.real_in_canonical_basis);
    CHECK(max_abs(h.matrix - oracle) < 1e-12);
    CHECK_THROWS_AS((void)qdb::ssh_hamiltonian(4, 1.5, B, qdb::SpinBosonSpace{4, 0}),
                    std::invalid_argument);
}

TEST_CASE("chain terms sum to the dense hamiltonian") {
    const int N = 4;
    const double t = 0.3, B = 0.2;
    const qdb::SpinBosonSpace space{N, 0};
    const auto terms = qdb::ssh_terms(N, t, B);
    CHECK(terms.size() == static_cast<std::size_t>(N + 1)); // N-1 bonds + 2 fields
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(16, 16);
    for (const auto& term : terms)
        sum += qdb::embed(term.matrix, term.sites, space).matrix;
    CHECK(max_abs(sum - qdb::ssh_hamiltonian(N, t, B, space).matrix) < 1e-12);

    // Without boundary fields only the bonds remain.
    CHECK(qdb::ssh_terms(N, t, 0.0).size() == static_cast<std::size_t>(N - 1));

    // Each bond term is the plain two-site hop scaled by the bond strength.
    const auto& first = terms.front();
    CHECK(first.sites == std::vector<int>{1, 2});
    CHECK(std::abs(first.matrix(1, 2) - Cx(2.0 * (1.0 + t), 0.0)) < 1e-15);
    CHECK(std::abs(first.matrix(2, 1) - Cx(2.0 * (1.0 + t), 0.0)) < 1e-15);
}

// ---- Z rotations and the generator dispatch ----

TEST_CASE("z rotation generator is the embedded pauli z") {
    const qdb::SpinBosonSpace space{2, 0};
    const Eigen::MatrixXcd g = qdb::z_rotation_generator(2, space).matrix;
    CHECK(max_abs(g - kron_chain({eye(2), oz()})) < 1e-15);
}

TEST_CASE("generator dispatch covers every parameterized kind") {
    const qdb::SpinBosonSpace space{2, 3};
    using Kind = qdb::GeneratorSpec::Kind;

    SUBCASE("blue sideband spec") {
        qdb::GeneratorSpec spec;
        spec.kind = Kind::BlueSideband;
        spec.site = 1;
        const qdb::LinearOperator h = qdb::build_generator(spec, space);
        CHECK(max_abs(h.matrix - qdb::blue_sideband(1, space).matrix) < 1e-15);
        CHECK(h.hermitian);
        CHECK_FALSE(h.real_in_canonical_basis);
        spec.rate_unit = 2.0;
        CHECK(max_abs(qdb::build_generator(spec, space).matrix -
                      2.0 * qdb::blue_sideband(1, space).matrix) < 1e-14);
    }
    SUBCASE("ms spec") {
        qdb::GeneratorSpec spec;
        spec.kind = Kind::MSGate;
        spec.sites = {1, 2};
        const qdb::LinearOperator h = qdb::build_generator(spec, space);
        CHECK(max_abs(h.matrix - qdb::ms_coupling({1, 2}, space).matrix) < 1e-15);
        CHECK(h.real_in_canonical_basis);
        const qdb::LocalGenerator local = qdb::local_generator(spec, space);
        CHECK(local.sites == std::vector<int>{1, 2});
        CHECK(local.matrix.rows() == 4);
    }
    SUBCASE("xy spec uses its stored couplings") {
        qdb::GeneratorSpec spec;
        spec.kind = Kind::XY;
        const qdb::LinearOperator h = qdb::build_generator(spec, space);
        CHECK(max_abs(h.matrix -
                      qdb::xy_hamiltonian(2, spec.alpha, spec.J0, spec.B, space).matrix) <
              1e-12);
        const qdb::LocalGenerator local = qdb::local_generator(spec, space);
        CHECK(local.sites == std::vector<int>{1, 2});
    }
    SUBCASE("z rotation spec") {
        qdb::GeneratorSpec spec;
        spec.kind = Kind::ZRotation;
        spec.site = 2;
        spec.rate_unit = 1.5;
        const qdb::LocalGenerator local = qdb::local_generator(spec, space);
        CHECK(local.sites == std::vector<int>{2});
        CHECK(max_abs(local.matrix - 1.5 * oz()) < 1e-15);
    }
    SUBCASE("bus reset carries no matrix") {
        qdb::GeneratorSpec spec;
        spec.kind = Kind::BusReset;
        CHECK_THROWS_AS((void)qdb::local_generator(spec, space), std::invalid_argument);
        CHECK_THROWS_AS((void)qdb::build_generator(spec, space), std::invalid_argument);
    }
}
