// hamiltonians.cpp — Generator constructors.

#include "qdb/hamiltonians.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qdb {

namespace {

void require_qubits(const SpinBosonSpace& space, int n_min) {
    if (space.n_qubits < n_min)
        throw std::invalid_argument("hamiltonians: space has fewer than " +
                                    std::to_string(n_min) + " qubits");
}

// Local blue-sideband block on (qubit j, boson), qubit digit slowest:
// H = i(aσ^− − a†σ^+) ⇒ ⟨↑,l+1|H|↓,l⟩ = −i√(l+1).
Eigen::MatrixXcd sideband_local(int d, double rate) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * d, 2 * d);
    // Basis index = qubit_digit * d + boson_level, qubit digit 0 = ↑, 1 = ↓.
    for (int l = 0; l + 1 < d; ++l) {
        const double g = rate * std::sqrt(static_cast<double>(l + 1));
        h(0 * d + (l + 1), 1 * d + l) = Cx(0.0, -g); // ⟨↑,l+1|H|↓,l⟩
        h(1 * d + l, 0 * d + (l + 1)) = Cx(0.0, +g); // Hermitian partner
    }
    return h;
}

// Local XY matrix over all N qubits (boson untouched).
Eigen::MatrixXcd xy_local(int N, double alpha, double J0, double B) {
    const long long dim = 1LL << N;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    // (σ^xσ^x + σ^yσ^y)/2 is the hop |↑↓⟩↔|↓↑⟩; build directly on bit patterns
    // (bit 1 = ↓, qubit 1 = most significant).
    for (long long s = 0; s < dim; ++s) {
        double diag = 0.0;
        for (int i = 1; i <= N; ++i) {
            const int bi = static_cast<int>((s >> (N - i)) & 1);
            diag += B * (bi == 0 ? 1.0 : -1.0);
            for (int j = i + 1; j <= N; ++j) {
                const int bj = static_cast<int>((s >> (N - j)) & 1);
                if (bi != bj) {
                    const long long flipped = s ^ (1LL << (N - i)) ^ (1LL << (N - j));
                    const double Jij = J0 * std::pow(static_cast<double>(j - i), -alpha);
                    h(flipped, s) += Jij; // (J/2)·2 from the two Pauli products
                }
            }
        }
        h(s, s) += diag;
    }
    return h;
}

Eigen::MatrixXcd ssh_local(int N, double t, double B_tilde) {
    const long long dim = 1LL << N;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (long long s = 0; s < dim; ++s) {
        for (int j = 1; j < N; ++j) {
            const int bj = static_cast<int>((s >> (N - j)) & 1);
            const int bj1 = static_cast<int>((s >> (N - j - 1)) & 1);
            if (bj != bj1) {
                const long long flipped = s ^ (1LL << (N - j)) ^ (1LL << (N - j - 1));
                const double bond = 1.0 - ((j % 2 == 1) ? -1.0 : 1.0) * t;
                h(flipped, s) += 2.0 * bond; // σ^xσ^x + σ^yσ^y acts as 2·hop
            }
        }
        const int b1 = static_cast<int>((s >> (N - 1)) & 1);
        const int bN = static_cast<int>(s & 1);
        h(s, s) += B_tilde * ((b1 == 0 ? 1.0 : -1.0) - (bN == 0 ? 1.0 : -1.0));
    }
    return h;
}

} // namespace

LinearOperator blue_sideband(int j, const SpinBosonSpace& space) {
    if (!space.has_boson() || space.fock_cutoff < 2)
        throw std::invalid_argument("blue_sideband: space needs a boson with d >= 2");
    space.factor_of_site(j);
    return embed(sideband_local(space.fock_cutoff, 1.0), {j, kBosonSite}, space,
                 /*hermitian=*/true, /*real=*/false);
}

LinearOperator ms_coupling(const std::vector<int>& S, const SpinBosonSpace& space) {
    if (S.size() < 2) throw std::invalid_argument("ms_coupling: site set needs >= 2 sites");
    const auto local = local_generator(
        GeneratorSpec{GeneratorSpec::Kind::MSGate, 0, S, 0, 0, 0, 1.0}, space);
    return embed(local.matrix, local.sites, space, /*hermitian=*/true, /*real=*/true);
}

LinearOperator xy_hamiltonian(int N, double alpha, double J0, double B,
                              const SpinBosonSpace& space) {
    if (N < 2) throw std::invalid_argument("xy_hamiltonian: N must be >= 2");
    if (alpha <= 0) throw std::invalid_argument("xy_hamiltonian: alpha must be > 0");
    require_qubits(space, N);
    std::vector<int> sites;
    for (int j = 1; j <= N; ++j) sites.push_back(j);
    return embed(xy_local(N, alpha, J0, B), sites, space, /*hermitian=*/true, /*real=*/true);
}

LinearOperator ssh_hamiltonian(int N, double t, double B_tilde, const SpinBosonSpace& space) {
    if (N < 2) throw std::invalid_argument("ssh_hamiltonian: N must be >= 2");
    if (std::abs(t) > 1.0) throw std::invalid_argument("ssh_hamiltonian: |t| must be <= 1");
    require_qubits(space, N);
    std::vector<int> sites;
    for (int j = 1; j <= N; ++j) sites.push_back(j);
    return embed(ssh_local(N, t, B_tilde), sites, space, /*hermitian=*/true, /*real=*/true);
}

LinearOperator z_rotation_generator(int j, const SpinBosonSpace& space) {
    space.factor_of_site(j);
    return embed(pauli_z(), {j}, space, /*hermitian=*/true, /*real=*/true);
}

LinearOperator extended_magnetization(const SpinBosonSpace& space) {
    if (!space.has_boson())
        throw std::invalid_argument("extended_magnetization: space has no boson");
    const long long n = space.dim();
    const auto dims = space.factor_dims();
    Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(n, n);
    // Diagonal: ½Σσ^z − a†a, read off each basis index.
    const int d = space.fock_cutoff;
    for (long long idx = 0; idx < n; ++idx) {
        long long rest = idx;
        const int level = static_cast<int>(rest % d);
        rest /= d;
        double half_sum = 0.0;
        for (int q = space.n_qubits; q-- > 0;) {
            half_sum += (rest % 2 == 0) ? 0.5 : -0.5;
            rest /= 2;
        }
        z(idx, idx) = half_sum - level;
    }
    (void)dims;
    return LinearOperator::make(space, std::move(z), /*hermitian=*/true, /*real=*/true);
}

LinearOperator magnetization(const SpinBosonSpace& space) {
    require_qubits(space, 1);
    const long long n = space.dim();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    const int boson_dim = space.has_boson() ? space.fock_cutoff : 1;
    for (long long idx = 0; idx < n; ++idx) {
        long long rest = idx / boson_dim;
        double half_sum = 0.0;
        for (int q = space.n_qubits; q-- > 0;) {
            half_sum += (rest % 2 == 0) ? 0.5 : -0.5;
            rest /= 2;
        }
        m(idx, idx) = half_sum;
    }
    return LinearOperator::make(space, std::move(m), /*hermitian=*/true, /*real=*/true);
}

LocalGenerator local_generator(const GeneratorSpec& spec, const SpinBosonSpace& space) {
    switch (spec.kind) {
        case GeneratorSpec::Kind::BlueSideband: {
            if (!space.has_boson() || space.fock_cutoff < 2)
                throw std::invalid_argument("local_generator: sideband needs a boson with d >= 2");
            space.factor_of_site(spec.site);
            return LocalGenerator{sideband_local(space.fock_cutoff, spec.rate_unit),
                                  {spec.site, kBosonSite}};
        }
        case GeneratorSpec::Kind::MSGate: {
            const auto& S = spec.sites;
            if (S.size() < 2)
                throw std::invalid_argument("local_generator: MS site set needs >= 2 sites");
            for (int s : S) space.factor_of_site(s);
            const int k = static_cast<int>(S.size());
            const long long m = 1LL << k;
            Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m, m);
            for (long long b = 0; b < m; ++b)
                for (int i = 0; i < k; ++i)
                    for (int j = i + 1; j < k; ++j) {
                        const long long flipped = b ^ (1LL << (k - 1 - i)) ^ (1LL << (k - 1 - j));
                        h(flipped, b) += spec.rate_unit;
                    }
            return LocalGenerator{std::move(h), S};
        }
        case GeneratorSpec::Kind::XY: {
            require_qubits(space, 2);
            const int N = space.n_qubits;
            std::vector<int> sites;
            for (int j = 1; j <= N; ++j) sites.push_back(j);
            Eigen::MatrixXcd h = xy_local(N, spec.alpha, spec.J0, spec.B);
            if (spec.rate_unit != 1.0) h *= spec.rate_unit;
            return LocalGenerator{std::move(h), std::move(sites)};
        }
        case GeneratorSpec::Kind::ZRotation: {
            space.factor_of_site(spec.site);
            return LocalGenerator{spec.rate_unit * pauli_z(), {spec.site}};
        }
        case GeneratorSpec::Kind::BusReset:
            throw std::invalid_argument("local_generator: BusReset carries no generator matrix");
    }
    throw std::logic_error("local_generator: unhandled kind");
}

LinearOperator build_generator(const GeneratorSpec& spec, const SpinBosonSpace& space) {
    const auto local = local_generator(spec, space);
    const bool imag = spec.kind == GeneratorSpec::Kind::BlueSideband;
    return embed(local.matrix, local.sites, space, /*hermitian=*/true, /*real=*/!imag);
}

std::vector<LocalGenerator> ssh_terms(int N, double t, double B_tilde) {
    if (N < 2) throw std::invalid_argument("ssh_terms: N must be >= 2");
    std::vector<LocalGenerator> terms;
    const Eigen::MatrixXcd hop = [] {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
        m(1, 2) = 2.0; // σ^xσ^x + σ^yσ^y = 2(|↑↓⟩⟨↓↑| + h.c.) on two qubits
        m(2, 1) = 2.0;
        return m;
    }();
    for (int j = 1; j < N; ++j) {
        const double bond = 1.0 - ((j % 2 == 1) ? -1.0 : 1.0) * t;
        terms.push_back(LocalGenerator{bond * hop, {j, j + 1}});
    }
    if (B_tilde != 0.0) {
        terms.push_back(LocalGenerator{B_tilde * pauli_z(), {1}});
        terms.push_back(LocalGenerator{-B_tilde * pauli_z(), {N}});
    }
    return terms;
}

} // namespace qdb
