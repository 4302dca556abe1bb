// hilbert.cpp — Spaces, states, operators, and tensor plumbing.

#include "qdb/hilbert.hpp"
#include "qdb/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace qdb {

namespace {

void check_space(const SpinBosonSpace& s) {
    if (s.n_qubits < 0) throw std::invalid_argument("SpinBosonSpace: n_qubits must be >= 0");
    if (s.fock_cutoff < 0) throw std::invalid_argument("SpinBosonSpace: fock_cutoff must be >= 0");
    if (s.n_qubits == 0 && s.fock_cutoff == 0)
        throw std::invalid_argument("SpinBosonSpace: empty space");
}

} // namespace

long long SpinBosonSpace::dim() const {
    long long n = 1;
    for (int q = 0; q < n_qubits; ++q) n *= 2;
    return n * (has_boson() ? fock_cutoff : 1);
}

std::vector<int> SpinBosonSpace::factor_dims() const {
    std::vector<int> dims(static_cast<std::size_t>(n_qubits), 2);
    if (has_boson()) dims.push_back(fock_cutoff);
    return dims;
}

int SpinBosonSpace::factor_of_site(int site) const {
    if (site == kBosonSite) {
        if (!has_boson()) throw std::invalid_argument("factor_of_site: space has no boson");
        return n_qubits;
    }
    if (site < 1 || site > n_qubits)
        throw std::invalid_argument("factor_of_site: qubit site " + std::to_string(site) +
                                    " out of range 1.." + std::to_string(n_qubits));
    return site - 1;
}

SpinBosonSpace validated(const SpinBosonSpace& space) {
    check_space(space);
    return space;
}

int default_fock_cutoff(int n_qubits, double n0) {
    if (n_qubits < 1) throw std::invalid_argument("default_fock_cutoff: n_qubits must be >= 1");
    if (n0 < 0.0) throw std::invalid_argument("default_fock_cutoff: n0 must be >= 0");
    const double r = n0 / (1.0 + n0);
    int q_tail = 1;
    double mass = r; // r^q at q = q_tail
    while (mass >= 1e-10) {
        ++q_tail;
        mass *= r;
    }
    return q_tail + n_qubits / 2 + 1;
}

LinearOperator LinearOperator::make(SpinBosonSpace space, Eigen::MatrixXcd matrix,
                                    bool hermitian, bool real_in_canonical_basis) {
    check_space(space);
    const long long n = space.dim();
    if (matrix.rows() != n || matrix.cols() != n)
        throw std::invalid_argument("LinearOperator: matrix does not match space dimension");
    if (hermitian) {
        const double dev = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
        if (dev > 1e-12)
            throw invariant_error("LinearOperator: hermitian flag violated, deviation " +
                                  std::to_string(dev));
    }
    if (real_in_canonical_basis) {
        const double dev = matrix.imag().cwiseAbs().maxCoeff();
        if (dev > 1e-12)
            throw invariant_error("LinearOperator: realness flag violated, max |Im| " +
                                  std::to_string(dev));
    }
    return LinearOperator{std::move(space), std::move(matrix), hermitian, real_in_canonical_basis};
}

PureState PureState::make(SpinBosonSpace space, Eigen::VectorXcd vector) {
    check_space(space);
    if (vector.size() != space.dim())
        throw std::invalid_argument("PureState: vector does not match space dimension");
    const double nrm = vector.norm();
    if (std::abs(nrm - 1.0) > 1e-12)
        throw invariant_error("PureState: norm deviates from 1 by " + std::to_string(nrm - 1.0));
    return PureState{std::move(space), std::move(vector)};
}

DensityMatrix DensityMatrix::make(SpinBosonSpace space, Eigen::MatrixXcd matrix) {
    check_space(space);
    const long long n = space.dim();
    if (matrix.rows() != n || matrix.cols() != n)
        throw std::invalid_argument("DensityMatrix: matrix does not match space dimension");
    const double herm_dev = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
    if (herm_dev > 1e-12)
        throw invariant_error("DensityMatrix: Hermiticity deviation " + std::to_string(herm_dev));
    const double tr_dev = std::abs(matrix.trace().real() - 1.0) + std::abs(matrix.trace().imag());
    if (tr_dev > 1e-10)
        throw invariant_error("DensityMatrix: trace deviates from 1 by " + std::to_string(tr_dev));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw invariant_error("DensityMatrix: eigenvalue check failed to converge");
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -1e-10)
        throw invariant_error("DensityMatrix: negative eigenvalue " + std::to_string(min_eig));
    return DensityMatrix{std::move(space), std::move(matrix)};
}

DensityMatrix DensityMatrix::make_unchecked(SpinBosonSpace space, Eigen::MatrixXcd matrix) {
    check_space(space);
    const long long n = space.dim();
    if (matrix.rows() != n || matrix.cols() != n)
        throw std::invalid_argument("DensityMatrix: matrix does not match space dimension");
    return DensityMatrix{std::move(space), std::move(matrix)};
}

// ------------------------------ Tensor products ------------------------------

namespace {

SpinBosonSpace combine_spaces(const SpinBosonSpace& a, const SpinBosonSpace& b) {
    if (a.has_boson())
        throw std::invalid_argument(
            "tensor_product: left operand may not carry the boson (ordering keeps it fastest)");
    return SpinBosonSpace{a.n_qubits + b.n_qubits, b.fock_cutoff};
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
    Eigen::MatrixXcd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

} // namespace

LinearOperator tensor_product(const LinearOperator& A, const LinearOperator& B) {
    SpinBosonSpace s = combine_spaces(A.space, B.space);
    return LinearOperator{s, kron(A.matrix, B.matrix), A.hermitian && B.hermitian,
                          A.real_in_canonical_basis && B.real_in_canonical_basis};
}

PureState tensor_product(const PureState& a, const PureState& b) {
    SpinBosonSpace s = combine_spaces(a.space, b.space);
    Eigen::VectorXcd v(a.vector.size() * b.vector.size());
    for (Eigen::Index i = 0; i < a.vector.size(); ++i)
        v.segment(i * b.vector.size(), b.vector.size()) = a.vector(i) * b.vector;
    return PureState{s, std::move(v)};
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
    SpinBosonSpace s = combine_spaces(a.space, b.space);
    return DensityMatrix::make_unchecked(s, kron(a.matrix, b.matrix));
}

LinearOperator embed(const Eigen::MatrixXcd& local_op, const std::vector<int>& sites,
                     const SpinBosonSpace& space, bool hermitian,
                     bool real_in_canonical_basis) {
    check_space(space);
    if (sites.empty()) throw std::invalid_argument("embed: empty site list");
    std::vector<int> targets;
    targets.reserve(sites.size());
    for (int s : sites) targets.push_back(space.factor_of_site(s));
    for (std::size_t i = 0; i < targets.size(); ++i)
        for (std::size_t j = i + 1; j < targets.size(); ++j)
            if (targets[i] == targets[j])
                throw std::invalid_argument("embed: duplicate site in target list");

    const auto dims = space.factor_dims();
    long long m = 1;
    for (int t : targets) m *= dims[static_cast<std::size_t>(t)];
    if (local_op.rows() != m || local_op.cols() != m)
        throw std::invalid_argument("embed: local operator does not match target dimensions");

    // Columns of the embedded matrix are the kernel applied to basis vectors.
    const long long n = space.dim();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
    for (long long col = 0; col < n; ++col) {
        out(col, col) = Cx(1.0, 0.0);
        kernels::apply_local_serial(out.col(col).data(), dims, local_op, targets);
    }
    return LinearOperator::make(space, std::move(out), hermitian, real_in_canonical_basis);
}

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& discard) {
    const SpinBosonSpace& s = rho.space;
    if (discard.empty()) return rho;

    std::vector<bool> drop_factor(static_cast<std::size_t>(s.n_factors()), false);
    for (int site : discard) {
        const int f = s.factor_of_site(site);
        if (drop_factor[static_cast<std::size_t>(f)])
            throw std::invalid_argument("partial_trace: duplicate site in discard list");
        drop_factor[static_cast<std::size_t>(f)] = true;
    }

    SpinBosonSpace reduced;
    reduced.n_qubits = 0;
    for (int q = 0; q < s.n_qubits; ++q)
        if (!drop_factor[static_cast<std::size_t>(q)]) ++reduced.n_qubits;
    const bool keep_boson = s.has_boson() && !drop_factor[static_cast<std::size_t>(s.n_qubits)];
    reduced.fock_cutoff = keep_boson ? s.fock_cutoff : 0;
    if (reduced.n_qubits == 0 && !keep_boson)
        throw std::invalid_argument("partial_trace: empty keep-set");

    const auto dims = s.factor_dims();
    const auto strides = kernels::factor_strides(dims);
    std::vector<std::size_t> kept, dropped;
    for (std::size_t f = 0; f < dims.size(); ++f)
        (drop_factor[f] ? dropped : kept).push_back(f);

    // Offsets of every kept-index combination and every dropped-index combination.
    auto offsets_of = [&](const std::vector<std::size_t>& factors) {
        std::vector<std::ptrdiff_t> offs{0};
        for (std::size_t f : factors) {
            std::vector<std::ptrdiff_t> next;
            next.reserve(offs.size() * static_cast<std::size_t>(dims[f]));
            for (std::ptrdiff_t base : offs)
                for (int v = 0; v < dims[f]; ++v) next.push_back(base + v * strides[f]);
            offs = std::move(next);
        }
        return offs;
    };
    const auto kept_offs = offsets_of(kept);
    const auto drop_offs = offsets_of(dropped);

    const long long n_red = reduced.dim();
    if (static_cast<long long>(kept_offs.size()) != n_red)
        throw std::logic_error("partial_trace: internal dimension bookkeeping error");

    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n_red, n_red);
    for (long long i = 0; i < n_red; ++i)
        for (long long j = 0; j < n_red; ++j) {
            Cx sum(0.0, 0.0);
            for (std::ptrdiff_t doff : drop_offs)
                sum += rho.matrix(kept_offs[static_cast<std::size_t>(i)] + doff,
                                  kept_offs[static_cast<std::size_t>(j)] + doff);
            out(i, j) = sum;
        }

    const double tr_dev = std::abs(out.trace() - rho.matrix.trace());
    if (tr_dev > 1e-12)
        throw invariant_error("partial_trace: trace not preserved, drift " + std::to_string(tr_dev));
    return DensityMatrix::make_unchecked(reduced, std::move(out));
}

// ------------------------------ Initial states ------------------------------

ThermalState thermal_state(double n0, int d) {
    if (d < 1) throw std::invalid_argument("thermal_state: fock_cutoff must be >= 1");
    if (n0 < 0.0) throw std::invalid_argument("thermal_state: n0 must be >= 0");
    const SpinBosonSpace space{0, d};
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    double tail = 0.0;
    if (n0 == 0.0) {
        rho(0, 0) = 1.0;
    } else {
        const double r = n0 / (1.0 + n0);
        double w = 1.0, sum = 0.0;
        for (int q = 0; q < d; ++q) {
            rho(q, q) = w;
            sum += w;
            w *= r;
        }
        tail = std::pow(r, d); // mass of the discarded geometric tail, (1−r)·r^d/(1−r)
        rho /= sum;
    }
    return ThermalState{DensityMatrix::make_unchecked(space, std::move(rho)), tail};
}

PureState neel_state(int n_qubits) {
    if (n_qubits < 1) throw std::invalid_argument("neel_state: n_qubits must be >= 1");
    const SpinBosonSpace space{n_qubits, 0};
    // |↓↑↓↑…⟩ with basis order {↑,↓}: odd sites contribute bit 1.
    long long index = 0;
    for (int j = 1; j <= n_qubits; ++j) index = 2 * index + (j % 2 == 1 ? 1 : 0);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(space.dim());
    v(index) = 1.0;
    return PureState{space, std::move(v)};
}

LinearOperator destruction_operator(int d) {
    if (d < 2) throw std::invalid_argument("destruction_operator: fock_cutoff must be >= 2");
    return LinearOperator::make(SpinBosonSpace{0, d}, fock_lowering(d),
                                /*hermitian=*/false, /*real=*/true);
}

// ------------------------- Small building-block matrices --------------------

Eigen::MatrixXcd pauli_x() {
    Eigen::MatrixXcd m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Eigen::MatrixXcd pauli_y() {
    Eigen::MatrixXcd m(2, 2);
    m << 0, Cx(0, -1), Cx(0, 1), 0;
    return m;
}

Eigen::MatrixXcd pauli_z() {
    Eigen::MatrixXcd m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Eigen::MatrixXcd pauli(char axis) {
    switch (axis) {
        case 'x': return pauli_x();
        case 'y': return pauli_y();
        case 'z': return pauli_z();
        default: throw std::invalid_argument("pauli: axis must be 'x', 'y' or 'z'");
    }
}

Eigen::MatrixXcd sigma_plus() {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(0, 1) = 1.0; // |↑⟩⟨↓|
    return m;
}

Eigen::MatrixXcd sigma_minus() {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(1, 0) = 1.0; // |↓⟩⟨↑|
    return m;
}

Eigen::MatrixXcd identity_matrix(int n) { return Eigen::MatrixXcd::Identity(n, n); }

Eigen::MatrixXcd fock_lowering(int d) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
    for (int q = 1; q < d; ++q) a(q - 1, q) = std::sqrt(static_cast<double>(q));
    return a;
}

} // namespace qdb
