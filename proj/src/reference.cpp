// reference.cpp — Exact diagonalization of the dimerized chain. ground_truth
// enumerates each fixed-magnetization sector's bit patterns directly and
// diagonalizes the real symmetric block, an independent construction from the
// dense Hamiltonian builders (the test suite cross-checks the two).

#include "qdb/reference.hpp"

#include "qdb/errors.hpp"
#include "qdb/hamiltonians.hpp"
#include "qdb/kernels.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qdb {

namespace {

// Multiply each column's phase away so its first amplitude above 1e−12 is
// real positive.
void fix_phases(Eigen::MatrixXcd& vectors) {
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            const double mag = std::abs(vectors(i, c));
            if (mag > 1e-12) {
                vectors.col(c) *= std::conj(vectors(i, c)) / mag;
                break;
            }
        }
    }
}

void fix_sign(Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-12) {
            if (v(i) < 0.0) v = -v;
            break;
        }
    }
}

// Basis states (ascending) of the sector with n_down bits set.
std::vector<long long> sector_states(int N, int n_down) {
    std::vector<long long> states;
    for (long long s = 0; s < (1LL << N); ++s)
        if (__builtin_popcountll(static_cast<unsigned long long>(s)) == n_down)
            states.push_back(s);
    return states;
}

// Dimerized-chain Hamiltonian restricted to one sector, built from bit
// patterns: hop 2(1−(−1)^j t) where neighboring bits differ, boundary fields
// B̃(σ_1^z − σ_N^z) on the diagonal.
Eigen::MatrixXd ssh_sector_matrix(int N, double t, double B_tilde,
                                  const std::vector<long long>& states) {
    const int n = static_cast<int>(states.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    auto index_of = [&](long long s) {
        return static_cast<int>(
            std::lower_bound(states.begin(), states.end(), s) - states.begin());
    };
    for (int si = 0; si < n; ++si) {
        const long long s = states[static_cast<std::size_t>(si)];
        const int bit1 = static_cast<int>((s >> (N - 1)) & 1);
        const int bitN = static_cast<int>(s & 1);
        h(si, si) = B_tilde * ((bit1 == 0 ? 1.0 : -1.0) - (bitN == 0 ? 1.0 : -1.0));
        for (int j = 1; j < N; ++j) {
            const int b1 = static_cast<int>((s >> (N - j)) & 1);
            const int b2 = static_cast<int>((s >> (N - j - 1)) & 1);
            if (b1 == b2) continue;
            const long long flipped = s ^ ((1LL << (N - j)) | (1LL << (N - j - 1)));
            const double bond = 1.0 - ((j % 2 == 1) ? -1.0 : 1.0) * t;
            h(index_of(flipped), si) += 2.0 * bond;
        }
    }
    return h;
}

std::string format_double(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

} // namespace

// ---------------------------------- Spectra ----------------------------------

Spectrum exact_spectrum(const LinearOperator& H, int k) {
    if (!H.hermitian)
        throw std::invalid_argument("exact_spectrum: operator must be Hermitian");
    const Eigen::Index dim = H.matrix.rows();
    if (k < 1 || k > dim)
        throw std::invalid_argument("exact_spectrum: k must be in [1, dim]");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.matrix);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("exact_spectrum: eigendecomposition failed");
    Spectrum out;
    out.values = es.eigenvalues().head(k);
    out.vectors = es.eigenvectors().leftCols(k);
    fix_phases(out.vectors);
    return out;
}

Spectrum sector_spectrum(const LinearOperator& H, double m) {
    if (!H.hermitian)
        throw std::invalid_argument("sector_spectrum: operator must be Hermitian");
    const LinearOperator M = magnetization(H.space);
    const Eigen::Index dim = H.matrix.rows();
    // [H, M] = 0 with M diagonal means H(a,b)·(m_a − m_b) = 0 entrywise.
    for (Eigen::Index a = 0; a < dim; ++a)
        for (Eigen::Index b = 0; b < dim; ++b) {
            const double dm = M.matrix(a, a).real() - M.matrix(b, b).real();
            if (std::abs(H.matrix(a, b)) * std::abs(dm) > 1e-10)
                throw std::invalid_argument(
                    "sector_spectrum: operator does not commute with the magnetization");
        }
    std::vector<Eigen::Index> members;
    for (Eigen::Index a = 0; a < dim; ++a)
        if (std::abs(M.matrix(a, a).real() - m) < 0.25) members.push_back(a);
    if (members.empty())
        throw std::invalid_argument("sector_spectrum: empty magnetization sector");
    const Eigen::Index n = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXcd block(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            block(i, j) = H.matrix(members[static_cast<std::size_t>(i)],
                                   members[static_cast<std::size_t>(j)]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("sector_spectrum: eigendecomposition failed");
    Spectrum out;
    out.values = es.eigenvalues();
    out.vectors = Eigen::MatrixXcd::Zero(dim, n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index i = 0; i < n; ++i)
            out.vectors(members[static_cast<std::size_t>(i)], c) = es.eigenvectors()(i, c);
    fix_phases(out.vectors);
    return out;
}

// ------------------------------- Ground truth --------------------------------

GroundTruth ground_truth(int N, double t, double B_tilde) {
    if (N < 2) throw std::invalid_argument("ground_truth: N must be >= 2");
    if (N > 14)
        throw size_cap_error("ground_truth: dense diagonalization is capped at N = 14");
    double E0 = std::numeric_limits<double>::infinity();
    double E1 = std::numeric_limits<double>::infinity();
    double m0 = 0.0, m1 = 0.0;
    Eigen::VectorXd ground;
    std::vector<long long> ground_states;
    for (int n_down = 0; n_down <= N; ++n_down) {
        const std::vector<long long> states = sector_states(N, n_down);
        const Eigen::MatrixXd block = ssh_sector_matrix(N, t, B_tilde, states);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("ground_truth: sector diagonalization failed");
        const double m = 0.5 * (N - 2 * n_down);
        // Only a sector's two lowest eigenvalues can reach the global pair.
        const int take = std::min<int>(2, static_cast<int>(states.size()));
        for (int i = 0; i < take; ++i) {
            const double e = es.eigenvalues()(i);
            if (e < E0) {
                E1 = E0;
                m1 = m0;
                E0 = e;
                m0 = m;
                ground = es.eigenvectors().col(i);
                ground_states = states;
            } else if (e < E1) {
                E1 = e;
                m1 = m;
            }
        }
    }
    fix_sign(ground);

    GroundTruth gt;
    gt.n_qubits = N;
    gt.t = t;
    gt.B_tilde = B_tilde;
    gt.E0 = E0;
    gt.E1 = E1;
    gt.gap = E1 - E0;
    gt.degenerate = gt.gap < 1e-8;
    gt.sector_labels = {m0, m1};

    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(1LL << N);
    for (std::size_t i = 0; i < ground_states.size(); ++i)
        full(ground_states[i]) = ground(static_cast<Eigen::Index>(i));
    gt.psi_targ = PureState::make(SpinBosonSpace{N, 0}, std::move(full));

    const std::vector<int> dims(static_cast<std::size_t>(N), 2);
    const Eigen::MatrixXcd px = pauli_x();
    const Eigen::MatrixXcd pxx = [&] {
        Eigen::MatrixXcd k(4, 4);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c)
                    for (int d = 0; d < 2; ++d)
                        k(2 * a + c, 2 * b + d) = px(a, b) * px(c, d);
        return k;
    }();
    Eigen::VectorXd x(N);
    for (int j = 1; j <= N; ++j)
        x(j - 1) = kernels::expectation_local(gt.psi_targ.vector.data(), dims, px, {j - 1})
                       .real();
    gt.C_ref = Eigen::MatrixXd::Zero(N, N);
    for (int i = 1; i <= N; ++i)
        for (int j = i + 1; j <= N; ++j) {
            const double xx =
                kernels::expectation_local(gt.psi_targ.vector.data(), dims, pxx,
                                           {i - 1, j - 1})
                    .real();
            const double cij = xx - x(i - 1) * x(j - 1);
            gt.C_ref(i - 1, j - 1) = cij;
            gt.C_ref(j - 1, i - 1) = cij;
        }
    return gt;
}

// ------------------------------ JSON and cache -------------------------------

nlohmann::json ground_truth_to_json(const GroundTruth& gt) {
    nlohmann::json j;
    j["n_qubits"] = gt.n_qubits;
    j["t"] = gt.t;
    j["B_tilde"] = gt.B_tilde;
    j["E0"] = gt.E0;
    j["E1"] = gt.E1;
    j["gap"] = gt.gap;
    j["degenerate"] = gt.degenerate;
    j["sector_labels"] = gt.sector_labels;
    std::vector<double> psi(static_cast<std::size_t>(gt.psi_targ.vector.size()));
    for (Eigen::Index i = 0; i < gt.psi_targ.vector.size(); ++i)
        psi[static_cast<std::size_t>(i)] = gt.psi_targ.vector(i).real();
    j["psi_targ"] = psi;
    std::vector<std::vector<double>> c(static_cast<std::size_t>(gt.C_ref.rows()));
    for (Eigen::Index r = 0; r < gt.C_ref.rows(); ++r) {
        c[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(gt.C_ref.cols()));
        for (Eigen::Index col = 0; col < gt.C_ref.cols(); ++col)
            c[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] = gt.C_ref(r, col);
    }
    j["C_ref"] = c;
    return j;
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    GroundTruth gt;
    gt.n_qubits = j.at("n_qubits").get<int>();
    gt.t = j.at("t").get<double>();
    gt.B_tilde = j.at("B_tilde").get<double>();
    gt.E0 = j.at("E0").get<double>();
    gt.E1 = j.at("E1").get<double>();
    gt.gap = j.at("gap").get<double>();
    gt.degenerate = j.at("degenerate").get<bool>();
    gt.sector_labels = j.at("sector_labels").get<std::vector<double>>();
    const auto psi = j.at("psi_targ").get<std::vector<double>>();
    if (psi.size() != (1ULL << gt.n_qubits))
        throw std::invalid_argument("ground_truth_from_json: psi_targ size mismatch");
    Eigen::VectorXcd full(static_cast<Eigen::Index>(psi.size()));
    for (std::size_t i = 0; i < psi.size(); ++i)
        full(static_cast<Eigen::Index>(i)) = psi[i];
    gt.psi_targ = PureState::make(SpinBosonSpace{gt.n_qubits, 0}, std::move(full));
    const auto c = j.at("C_ref").get<std::vector<std::vector<double>>>();
    if (c.size() != static_cast<std::size_t>(gt.n_qubits))
        throw std::invalid_argument("ground_truth_from_json: C_ref shape mismatch");
    gt.C_ref = Eigen::MatrixXd::Zero(gt.n_qubits, gt.n_qubits);
    for (std::size_t r = 0; r < c.size(); ++r) {
        if (c[r].size() != static_cast<std::size_t>(gt.n_qubits))
            throw std::invalid_argument("ground_truth_from_json: C_ref shape mismatch");
        for (std::size_t col = 0; col < c[r].size(); ++col)
            gt.C_ref(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = c[r][col];
    }
    return gt;
}

std::string cache_directory() {
    if (const char* dir = std::getenv("QDBLAB_CACHE_DIR"); dir && *dir) return dir;
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
        return std::string(xdg) + "/qdblab";
    if (const char* home = std::getenv("HOME"); home && *home)
        return std::string(home) + "/.cache/qdblab";
    return "qdblab-cache";
}

std::string ground_truth_cache_path(int N, double t, double B_tilde) {
    return cache_directory() + "/ground-truth-N" + std::to_string(N) + "-t" +
           format_double(t) + "-B" + format_double(B_tilde) + ".json";
}

GroundTruth ground_truth_cached(int N, double t, double B_tilde) {
    const std::string path = ground_truth_cache_path(N, t, B_tilde);
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        nlohmann::json j;
        in >> j;
        GroundTruth gt = ground_truth_from_json(j);
        if (gt.n_qubits == N && gt.t == t && gt.B_tilde == B_tilde) return gt;
    }
    GroundTruth gt = ground_truth(N, t, B_tilde);
    std::filesystem::create_directories(cache_directory());
    std::ofstream out(path);
    out << ground_truth_to_json(gt).dump(2) << "\n";
    return gt;
}

} // namespace qdb
