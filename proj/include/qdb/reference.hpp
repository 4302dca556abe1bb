// reference.hpp — Exact-diagonalization ground truth for the dimerized-chain
// target: spectrum, gap, ground state, and reference correlators, plus a JSON
// cache keyed by (N, t, B̃). Dense per-sector ED caps N at 14 (dim 16384);
// every experiment this laboratory reproduces uses N ≤ 12.

#pragma once

#include "qdb/hilbert.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace qdb {

// ---------------------------------- Spectra ----------------------------------

// Eigenpairs of a Hermitian operator, values ascending; vectors are
// orthonormal columns, each with its phase fixed so the first nonzero
// amplitude is real positive (reproducible fidelities).
struct Spectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
};

// The k lowest eigenpairs of H (1 ≤ k ≤ dim).
Spectrum exact_spectrum(const LinearOperator& H, int k);

// Spectrum restricted to the magnetization-m eigensector. Verifies [H, M] = 0
// first (throws otherwise); vectors come back embedded in the full space. The
// union over all sectors reproduces exact_spectrum.
Spectrum sector_spectrum(const LinearOperator& H, double m);

// ------------------------------- Ground truth --------------------------------

struct GroundTruth {
    int n_qubits = 0;
    double t = 0.5;
    double B_tilde = 0.1;
    double E0 = 0.0;         // global ground energy
    double E1 = 0.0;         // global first-excited energy
    double gap = 0.0;        // E1 − E0
    bool degenerate = false; // gap < 1e−8: ε and the fidelity bound are undefined
    // Magnetization sector of the E0 and E1 eigenpairs.
    std::vector<double> sector_labels;
    PureState psi_targ;      // ground state; real amplitudes, phase-fixed
    Eigen::MatrixXd C_ref;   // C_ij = ⟨σ_i^xσ_j^x⟩ − ⟨σ_i^x⟩⟨σ_j^x⟩, symmetric
};

// Ground truth by independent per-magnetization-sector diagonalization
// (block sizes C(N, n_down) instead of 2^N). 2 ≤ N ≤ 14.
GroundTruth ground_truth(int N, double t, double B_tilde);

// Cache-backed variant: reads the JSON record keyed by (N, t, B̃) under
// cache_directory(), or computes and writes it. Identical inputs persist
// byte-identical files.
GroundTruth ground_truth_cached(int N, double t, double B_tilde);

// QDBLAB_CACHE_DIR if set, else XDG_CACHE_HOME/qdblab, else ~/.cache/qdblab.
std::string cache_directory();
std::string ground_truth_cache_path(int N, double t, double B_tilde);

nlohmann::json ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

} // namespace qdb
