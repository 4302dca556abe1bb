// analysis.cpp — Metrics and audits. Everything here is a pure function of
// states produced elsewhere; the only numerics beyond linear algebra are the
// Schmidt SVDs and the iterated-commutator closure.

#include "qdb/analysis.hpp"

#include "qdb/errors.hpp"
#include "qdb/hamiltonians.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace qdb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

// ------------------------------ Scalar metrics -------------------------------

double f_err(const Eigen::MatrixXd& C, const Eigen::MatrixXd& C_ref) {
    if (C.rows() != C_ref.rows() || C.cols() != C_ref.cols() || C.rows() != C.cols())
        throw std::invalid_argument("f_err: correlation matrices must be square and equal");
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < C.rows(); ++i)
        for (Eigen::Index j = i + 1; j < C.cols(); ++j) {
            num += std::abs(C_ref(i, j) - C(i, j));
            den += std::abs(C_ref(i, j));
        }
    if (den == 0.0)
        throw std::invalid_argument("f_err: reference correlations vanish");
    return num / den;
}

double relative_excitation_energy(double energy, const GroundTruth& gt) {
    if (gt.degenerate || !(gt.gap > 0.0))
        throw std::invalid_argument(
            "relative_excitation_energy: undefined for a degenerate gap");
    const double epsilon = (energy - gt.E0) / gt.gap;
    if (epsilon < -1e-10)
        throw invariant_error("relative_excitation_energy: energy below the ground energy");
    return epsilon;
}

double fidelity(const DensityMatrix& rho, const PureState& psi_targ) {
    if (!(rho.space == psi_targ.space))
        throw std::invalid_argument("fidelity: state spaces differ");
    const Cx value = psi_targ.vector.dot(rho.matrix * psi_targ.vector);
    if (std::abs(value.imag()) >= 1e-10)
        throw invariant_error("fidelity: imaginary residue exceeds 1e-10");
    if (value.real() < -1e-10 || value.real() > 1.0 + 1e-10)
        throw invariant_error("fidelity: value outside [0, 1]");
    return value.real();
}

double fidelity_lower_bound(double energy, double E0, double E1) {
    if (!(E1 - E0 >= 1e-8))
        throw std::invalid_argument("fidelity_lower_bound: degenerate gap");
    return (E1 - energy) / (E1 - E0);
}

double purity_lower_bound(double fidelity_bound) {
    if (fidelity_bound < 0.0 || fidelity_bound > 1.0)
        throw std::invalid_argument("purity_lower_bound: bound must lie in [0, 1]");
    return fidelity_bound * fidelity_bound;
}

// ------------------------------ Schmidt profile ------------------------------

PureState project_boson(const PureState& composite, int level, double* probability) {
    const SpinBosonSpace& space = composite.space;
    if (!space.has_boson())
        throw std::invalid_argument("project_boson: state has no boson factor");
    if (level < 0 || level >= space.fock_cutoff)
        throw std::invalid_argument("project_boson: Fock level out of range");
    const int d = space.fock_cutoff;
    const long long S = 1LL << space.n_qubits;
    Eigen::VectorXcd v(S);
    for (long long s = 0; s < S; ++s) v(s) = composite.vector(s * d + level);
    const double p = v.squaredNorm();
    if (probability) *probability = p;
    if (p <= 1e-12)
        throw invariant_error("project_boson: zero-probability Fock outcome");
    v /= std::sqrt(p);
    return PureState::make(SpinBosonSpace{space.n_qubits, 0}, std::move(v));
}

SchmidtProfile schmidt_profile(const PureState& psi, int l) {
    const SpinBosonSpace& space = psi.space;
    if (space.has_boson())
        throw std::invalid_argument(
            "schmidt_profile: project the boson out first (project_boson)");
    const int N = space.n_qubits;
    if (N < 2) throw std::invalid_argument("schmidt_profile: need at least two qubits");
    if (l < 1) throw std::invalid_argument("schmidt_profile: box width must be >= 1");
    const long long half_width = 1LL << std::min(l - 1, 30);
    SchmidtProfile profile;
    for (int n = 1; n < N; ++n) {
        const long long rows = 1LL << (N - n); // right block (fast digits)
        const long long cols = 1LL << n;       // left block (slow digits)
        Eigen::Map<const Eigen::MatrixXcd> M(psi.vector.data(), rows, cols);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
        int rank = 0;
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > 1e-10) ++rank;
        const long long Ln = (n / 2 + 1) * half_width;
        const long long Rn = ((N - n) / 2 + 1) * half_width;
        const long long generic = 1LL << std::min(n, N - n);
        const long long structured = std::min(2 * std::min(Ln, Rn), generic);
        profile.ranks.push_back(rank);
        profile.structured_bounds.push_back(static_cast<int>(structured));
        profile.generic_bounds.push_back(static_cast<int>(generic));
        profile.max_rank = std::max(profile.max_rank, rank);
        profile.within_structured = profile.within_structured && rank <= structured;
        profile.within_generic = profile.within_generic && rank <= generic;
    }
    return profile;
}

// ------------------------------ Symmetry audit -------------------------------

namespace {

// Πσ^z over the qubit register (diagonal, boson untouched).
Eigen::MatrixXcd parity_matrix(const SpinBosonSpace& space) {
    const long long dim = space.dim();
    const int d = space.has_boson() ? space.fock_cutoff : 1;
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(dim, dim);
    for (long long i = 0; i < dim; ++i) {
        const long long s = i / d;
        P(i, i) = (__builtin_popcountll(static_cast<unsigned long long>(s)) % 2 == 0)
                      ? 1.0
                      : -1.0;
    }
    return P;
}

std::vector<GeneratorSpec> family_generators(AnsatzFamily family,
                                             const SpinBosonSpace& space) {
    const int N = space.n_qubits;
    std::vector<GeneratorSpec> specs;
    switch (family) {
    case AnsatzFamily::QdbMps:
    case AnsatzFamily::Modular:
        if (!space.has_boson() || space.fock_cutoff < 2)
            throw std::invalid_argument("symmetry_audit: sideband family needs a bus");
        for (int j = 1; j <= N; ++j)
            specs.push_back({GeneratorSpec::Kind::BlueSideband, j});
        break;
    case AnsatzFamily::CsdMps:
        for (int j = 1; j < N; ++j)
            specs.push_back({GeneratorSpec::Kind::MSGate, 0, {j, j + 1}});
        for (int j = 1; j <= N; ++j)
            specs.push_back({GeneratorSpec::Kind::ZRotation, j});
        break;
    case AnsatzFamily::Csa:
        specs.push_back({GeneratorSpec::Kind::XY});
        for (int j = 1; j <= N; ++j)
            specs.push_back({GeneratorSpec::Kind::ZRotation, j});
        break;
    }
    return specs;
}

} // namespace

SymmetryAudit symmetry_audit(AnsatzFamily family, const SpinBosonSpace& space, int n_draws,
                             unsigned long long seed) {
    validated(space);
    if (space.n_qubits < 2)
        throw std::invalid_argument("symmetry_audit: need at least two qubits");
    if (n_draws < 1) throw std::invalid_argument("symmetry_audit: need at least one draw");

    SymmetryAudit audit;
    audit.family = family;
    audit.n_draws = n_draws;
    audit.realness_applicable =
        family == AnsatzFamily::QdbMps || family == AnsatzFamily::Modular;

    Eigen::MatrixXcd charge;
    switch (family) {
    case AnsatzFamily::QdbMps:
    case AnsatzFamily::Modular:
        charge = extended_magnetization(space).matrix;
        break;
    case AnsatzFamily::CsdMps:
        charge = parity_matrix(space);
        break;
    case AnsatzFamily::Csa:
        charge = magnetization(space).matrix;
        break;
    }

    const std::vector<GeneratorSpec> specs = family_generators(family, space);
    std::vector<GeneratorAction> actions;
    actions.reserve(specs.size());
    for (const GeneratorSpec& spec : specs) {
        const LinearOperator H = build_generator(spec, space);
        audit.max_charge_commutator = std::max(
            audit.max_charge_commutator, max_abs(H.matrix * charge - charge * H.matrix));
        actions.emplace_back(H);
    }

    const long long dim = space.dim();
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(dim, dim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    for (int draw = 0; draw < n_draws; ++draw) {
        Eigen::MatrixXcd U = eye;
        for (const GeneratorAction& action : actions) U = action.unitary(angle(rng)) * U;
        audit.max_imag_unitary =
            std::max(audit.max_imag_unitary, U.imag().cwiseAbs().maxCoeff());
        audit.max_orthogonality_defect =
            std::max(audit.max_orthogonality_defect, max_abs(U * U.transpose() - eye));
        audit.max_det_deviation =
            std::max(audit.max_det_deviation, std::abs(U.determinant() - Cx(1.0, 0.0)));
    }

    audit.charge_conserved = audit.max_charge_commutator < 1e-10;
    audit.real_orthogonal_special = audit.max_imag_unitary < 1e-10 &&
                                    audit.max_orthogonality_defect < 1e-9 &&
                                    audit.max_det_deviation < 1e-9;
    audit.pass = audit.charge_conserved &&
                 (!audit.realness_applicable || audit.real_orthogonal_special);
    return audit;
}

// ------------------------------- Lie closure ---------------------------------

LinearOperator effective_hop(int j, int k, const SpinBosonSpace& space) {
    Eigen::MatrixXcd local = Eigen::MatrixXcd::Zero(4, 4);
    local(2, 1) = 1.0;  // σ_j^− σ_k^+ : |↓↑⟩⟨↑↓|
    local(1, 2) = -1.0; // −σ_j^+ σ_k^−
    return embed(local, {j, k}, space, /*hermitian=*/false,
                 /*real_in_canonical_basis=*/true);
}

int lie_closure_dimension(const std::vector<LinearOperator>& generators, double m,
                          const SpinBosonSpace& space, double rank_tol, int max_rounds) {
    if (generators.empty()) return 0;
    const LinearOperator Q =
        space.has_boson() ? extended_magnetization(space) : magnetization(space);
    const long long dim = space.dim();
    std::vector<long long> members;
    for (long long i = 0; i < dim; ++i)
        if (std::abs(Q.matrix(i, i).real() - m) < 0.25) members.push_back(i);
    if (members.empty())
        throw std::invalid_argument("lie_closure_dimension: empty charge sector");
    const long long n = static_cast<long long>(members.size());

    std::vector<Eigen::MatrixXcd> algebra;   // normalized elements
    std::vector<Eigen::VectorXd> basis;      // orthonormal real vectorizations
    auto vectorize = [&](const Eigen::MatrixXcd& A) {
        Eigen::VectorXd v(2 * n * n);
        for (long long c = 0; c < n; ++c)
            for (long long r = 0; r < n; ++r) {
                v(c * n + r) = A(r, c).real();
                v(n * n + c * n + r) = A(r, c).imag();
            }
        return v;
    };
    auto try_add = [&](const Eigen::MatrixXcd& C) {
        const double norm = C.norm();
        if (norm < 1e-14) return false;
        Eigen::VectorXd v = vectorize(C) / norm;
        for (int pass = 0; pass < 2; ++pass)
            for (const Eigen::VectorXd& b : basis) v -= b.dot(v) * b;
        if (v.norm() <= rank_tol) return false;
        basis.push_back(v / v.norm());
        algebra.push_back(C / norm);
        return true;
    };

    for (const LinearOperator& G : generators) {
        if (!(G.space == space))
            throw std::invalid_argument("lie_closure_dimension: generator space mismatch");
        if (max_abs(G.matrix + G.matrix.adjoint()) > 1e-12)
            throw std::invalid_argument(
                "lie_closure_dimension: generators must be anti-Hermitian");
        // Sector preservation: no matrix element may connect in to out.
        std::vector<char> inside(static_cast<std::size_t>(dim), 0);
        for (long long i : members) inside[static_cast<std::size_t>(i)] = 1;
        for (long long a = 0; a < dim; ++a)
            for (long long b = 0; b < dim; ++b)
                if (inside[static_cast<std::size_t>(a)] !=
                        inside[static_cast<std::size_t>(b)] &&
                    std::abs(G.matrix(a, b)) > 1e-12)
                    throw std::invalid_argument(
                        "lie_closure_dimension: generator leaks out of the sector");
        Eigen::MatrixXcd sub(n, n);
        for (long long r = 0; r < n; ++r)
            for (long long c = 0; c < n; ++c)
                sub(r, c) = G.matrix(members[static_cast<std::size_t>(r)],
                                     members[static_cast<std::size_t>(c)]);
        try_add(sub);
    }

    std::size_t processed = 0; // pairs (i, j) with j < i already commutated
    for (int round = 0; round < max_rounds; ++round) {
        const std::size_t frontier = algebra.size();
        bool grew = false;
        for (std::size_t i = processed; i < frontier; ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const Eigen::MatrixXcd C =
                    algebra[i] * algebra[j] - algebra[j] * algebra[i];
                grew = try_add(C) || grew;
            }
        processed = frontier;
        if (!grew && algebra.size() == frontier) return static_cast<int>(algebra.size());
        if (static_cast<long long>(algebra.size()) >= 2 * n * n)
            return static_cast<int>(algebra.size());
    }
    throw std::runtime_error(
        "lie_closure_dimension: closure did not converge within the iteration cap");
}

// -------------------------- Thermal-error decomposition ----------------------

ThermalErrorDecomposition thermal_error_decomposition(const ParametrizedCircuit& circuit,
                                                      const std::vector<double>& theta,
                                                      const GroundTruth& gt, double n0) {
    const SpinBosonSpace& space = circuit.space;
    if (!space.has_boson() || space.fock_cutoff < 2)
        throw std::invalid_argument("thermal_error_decomposition: circuit needs a bus");
    if (space.n_qubits != gt.n_qubits)
        throw std::invalid_argument("thermal_error_decomposition: ground-truth size mismatch");
    if (n0 < 0.0)
        throw std::invalid_argument("thermal_error_decomposition: n0 must be >= 0");
    const int N = space.n_qubits;
    const int d = space.fock_cutoff;
    const PureState psi_in = neel_state(N);
    const std::vector<LocalGenerator> terms = ssh_terms(N, gt.t, gt.B_tilde);
    const CompiledCircuit compiled(circuit);

    auto epsilon_for = [&](const DensityMatrix& bus) {
        const TrajectoryEnsemble ens = evolve_ensemble(compiled, theta, psi_in, bus);
        return relative_excitation_energy(ensemble_energy(ens, terms), gt);
    };

    ThermalErrorDecomposition out;
    for (int q = 0; q <= 1; ++q) {
        Eigen::MatrixXcd pure = Eigen::MatrixXcd::Zero(d, d);
        pure(q, q) = 1.0;
        out.epsilon_q.push_back(
            epsilon_for(DensityMatrix::make_unchecked(SpinBosonSpace{0, d}, pure)));
    }
    const double r = n0 / (1.0 + n0);
    out.p_q = {1.0 - r, (1.0 - r) * r};
    out.epsilon_thermal = epsilon_for(thermal_state(n0, d).rho);
    const double combined =
        out.epsilon_q[0] * out.p_q[0] + out.epsilon_q[1] * out.p_q[1];
    out.residual = std::abs(out.epsilon_thermal - combined);
    out.fitted_constant = n0 > 0.0 ? out.residual / (n0 * n0) : 0.0;
    return out;
}

// --------------------------- Disentanglement witness -------------------------

double von_neumann_entropy(const DensityMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.matrix);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("von_neumann_entropy: eigendecomposition failed");
    double S = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double p = es.eigenvalues()(i);
        if (p > 1e-14) S -= p * std::log(p);
    }
    return S;
}

double boson_qubit_mutual_information(const DensityMatrix& composite) {
    const SpinBosonSpace& space = composite.space;
    if (!space.has_boson() || space.n_qubits < 1)
        throw std::invalid_argument(
            "boson_qubit_mutual_information: need qubits and a boson");
    if (space.dim() > 4096) return kNaN;
    const DensityMatrix rho_q = partial_trace(composite, {kBosonSite});
    std::vector<int> qubit_sites(static_cast<std::size_t>(space.n_qubits));
    for (int j = 1; j <= space.n_qubits; ++j) qubit_sites[static_cast<std::size_t>(j - 1)] = j;
    const DensityMatrix rho_b = partial_trace(composite, qubit_sites);
    const double info = von_neumann_entropy(rho_q) + von_neumann_entropy(rho_b) -
                        von_neumann_entropy(composite);
    if (info < -1e-10)
        throw invariant_error("boson_qubit_mutual_information: negative mutual information");
    return std::max(info, 0.0); // clip eigenvalue noise
}

// ------------------------------- Metrics bundle ------------------------------

MetricsBundle compute_metrics(const TrajectoryEnsemble& ensemble, const GroundTruth& gt) {
    const int N = ensemble.space.n_qubits;
    if (N != gt.n_qubits)
        throw std::invalid_argument("compute_metrics: ground-truth size mismatch");
    MetricsBundle out;
    out.energy = ensemble_energy(ensemble, ssh_terms(N, gt.t, gt.B_tilde));
    out.degenerate_gap = gt.degenerate;
    out.fidelity = ensemble_fidelity(ensemble, gt.psi_targ);
    out.purity = ensemble_purity(ensemble);
    const std::vector<double> values =
        ensemble_observables(ensemble, correlation_observables(N));
    out.f_err = f_err(correlation_matrix(values, N), gt.C_ref);
    if (gt.degenerate) {
        out.epsilon = kNaN;
        out.fidelity_lower_bound = kNaN;
        out.purity_lower_bound = kNaN;
    } else {
        out.epsilon = relative_excitation_energy(out.energy, gt);
        out.fidelity_lower_bound = fidelity_lower_bound(out.energy, gt.E0, gt.E1);
        out.purity_lower_bound =
            purity_lower_bound(std::clamp(out.fidelity_lower_bound, 0.0, 1.0));
    }
    if (ensemble.space.has_boson() && ensemble.space.dim() <= 4096)
        out.boson_qubit_mutual_information =
            boson_qubit_mutual_information(composite_density(ensemble));
    else
        out.boson_qubit_mutual_information = kNaN;
    return out;
}

nlohmann::json metrics_to_json(const MetricsBundle& metrics) {
    nlohmann::json j;
    j["energy"] = metrics.energy;
    j["epsilon"] = metrics.epsilon;
    j["fidelity"] = metrics.fidelity;
    j["purity"] = metrics.purity;
    j["f_err"] = metrics.f_err;
    j["fidelity_lower_bound"] = metrics.fidelity_lower_bound;
    j["purity_lower_bound"] = metrics.purity_lower_bound;
    j["boson_qubit_mutual_information"] = metrics.boson_qubit_mutual_information;
    j["degenerate_gap"] = metrics.degenerate_gap;
    return j;
}

} // namespace qdb
