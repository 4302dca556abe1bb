// circuits.cpp — Ansatz builders, insertion schedule, validation, serialization.

#include "qdb/circuits.hpp"

#include "qdb/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace qdb {

namespace {

// ------------------------------ Box assembly ---------------------------------

struct BoxDesc {
    BoxKind kind;
    std::vector<CircuitGate> ops;
};

GeneratorSpec sideband_spec(int site) {
    GeneratorSpec g;
    g.kind = GeneratorSpec::Kind::BlueSideband;
    g.site = site;
    return g;
}

GeneratorSpec ms_spec(std::vector<int> sites) {
    GeneratorSpec g;
    g.kind = GeneratorSpec::Kind::MSGate;
    g.sites = std::move(sites);
    return g;
}

GeneratorSpec z_spec(int site) {
    GeneratorSpec g;
    g.kind = GeneratorSpec::Kind::ZRotation;
    g.site = site;
    return g;
}

GeneratorSpec xy_spec() {
    GeneratorSpec g;
    g.kind = GeneratorSpec::Kind::XY;
    return g;
}

GeneratorSpec reset_spec() {
    GeneratorSpec g;
    g.kind = GeneratorSpec::Kind::BusReset;
    return g;
}

std::vector<int> compute_retirement(const std::vector<CircuitGate>& gates, int n_qubits) {
    std::vector<int> last(n_qubits, -1);
    for (int g = 0; g < static_cast<int>(gates.size()); ++g)
        for (int q : gate_qubits(gates[g].generator, n_qubits)) last[q - 1] = g;
    return last;
}

ParametrizedCircuit assemble(const SpinBosonSpace& space, AnsatzTag tag, int n_params,
                             const std::vector<BoxDesc>& boxes) {
    ParametrizedCircuit c;
    c.space = validated(space);
    c.tag = std::move(tag);
    c.n_params = n_params;
    for (const auto& box : boxes) {
        const int first = static_cast<int>(c.gates.size());
        c.gates.insert(c.gates.end(), box.ops.begin(), box.ops.end());
        c.box_layout.push_back({box.kind, first, static_cast<int>(c.gates.size())});
    }
    c.retirement_schedule = compute_retirement(c.gates, space.n_qubits);
    validate_circuit(c);
    return c;
}

// Shared chain-geometry facts: bulk boxes sit at p = 2..N−l (span p..p+l−1) and
// alternate two slot-sharing kinds; the left/right edge spans are fixed.
struct ChainGeometry {
    int n_bulk;   // number of bulk boxes (may be 0 for N = l+1)
    int n_kinds;  // 1 if a single bulk box, else 2 (0 with no bulk)
};

ChainGeometry chain_geometry(const char* who, int N, int l) {
    if (l < 2) throw std::invalid_argument(std::string(who) + ": box size l must be >= 2");
    if (N < 4) throw std::invalid_argument(std::string(who) + ": N must be >= 4");
    if (l > N - 1) throw std::invalid_argument(std::string(who) + ": box size l must be <= N - 1");
    const int n_bulk = std::max(0, N - l - 1);
    return {n_bulk, std::min(2, n_bulk)};
}

void check_space_for_chain(const char* who, int N, const SpinBosonSpace& space,
                           bool needs_boson) {
    if (space.n_qubits != N)
        throw std::invalid_argument(std::string(who) + ": space qubit count differs from N");
    if (needs_boson && (!space.has_boson() || space.fock_cutoff < 2))
        throw std::invalid_argument(std::string(who) + ": space needs a boson with d >= 2");
}

std::vector<BoxDesc> qdb_mps_boxes(int N, int l, int Np) {
    const auto geo = chain_geometry("build_qdb_mps_ansatz", N, l);
    const int base_ops = 2 * l + 1;
    const int np_min = 2 + geo.n_kinds * base_ops + 2;
    if (Np < np_min)
        throw std::invalid_argument("build_qdb_mps_ansatz: Np below the minimum set size " +
                                    std::to_string(np_min));
    if (geo.n_bulk == 0 && Np != np_min)
        throw std::invalid_argument(
            "build_qdb_mps_ansatz: no bulk boxes at this N, l; Np is fixed to " +
            std::to_string(np_min));

    // Base slot vectors (kind 0 then kind 1), right-edge slots, then insertions
    // appended one at a time alternating between the kinds — every slot index
    // is stable under extension.
    std::vector<std::vector<int>> kind_slots(std::max(1, geo.n_kinds));
    int next = 2; // slots 0, 1 = left edge
    for (int k = 0; k < geo.n_kinds; ++k)
        for (int i = 0; i < base_ops; ++i) kind_slots[k].push_back(next++);
    const int re0 = next;
    for (int ins = 0; ins < Np - np_min; ++ins)
        kind_slots[ins % geo.n_kinds].push_back(np_min + ins);

    std::vector<BoxDesc> boxes;
    boxes.push_back({BoxKind::LeftEdge,
                     {{sideband_spec(1), 0, +1}, {sideband_spec(2), 1, +1}}});
    for (int p = 2; p <= N - l; ++p) {
        const int kind = (p - 2) % geo.n_kinds;
        BoxDesc box{kind == 0 ? BoxKind::BulkOdd : BoxKind::BulkEven, {}};
        for (int i = 0; i < static_cast<int>(kind_slots[kind].size()); ++i) {
            const int site = p + l - 1 - (i % l); // newest qubit first, then cycle
            box.ops.push_back({sideband_spec(site), kind_slots[kind][i], +1});
        }
        boxes.push_back(std::move(box));
    }
    boxes.push_back({BoxKind::RightEdge,
                     {{sideband_spec(N), re0, +1}, {sideband_spec(N - 1), re0 + 1, +1}}});
    return boxes;
}

// One MS+rotation layer over the span [lo, hi]: MS on the span, then σ^z on
// each qubit newest→oldest. Consumes hi−lo+2 consecutive slots.
void append_csd_layer(BoxDesc& box, int lo, int hi, const std::vector<int>& slots,
                      int slot_base) {
    std::vector<int> span;
    for (int q = lo; q <= hi; ++q) span.push_back(q);
    box.ops.push_back({ms_spec(span), slots[slot_base], +1});
    for (int q = hi; q >= lo; --q)
        box.ops.push_back({z_spec(q), slots[slot_base + 1 + (hi - q)], +1});
}

std::vector<BoxDesc> csd_mps_boxes(int N, int l, int Np) {
    const auto geo = chain_geometry("build_csd_mps_ansatz", N, l);
    const int layer = l + 1;      // bulk layer width in ops = slots
    const int np_min = 3 + geo.n_kinds * layer + 3;
    if (Np < np_min)
        throw std::invalid_argument("build_csd_mps_ansatz: Np below the minimum set size " +
                                    std::to_string(np_min));
    if (geo.n_bulk == 0 && Np != np_min)
        throw std::invalid_argument(
            "build_csd_mps_ansatz: no bulk boxes at this N, l; Np is fixed to " +
            std::to_string(np_min));
    if ((Np - np_min) % layer != 0)
        throw std::invalid_argument(
            "build_csd_mps_ansatz: slots are added in whole layers; Np - " +
            std::to_string(np_min) + " must be a multiple of " + std::to_string(layer));

    std::vector<std::vector<int>> kind_slots(std::max(1, geo.n_kinds));
    int next = 3; // slots 0..2 = left edge layer
    for (int k = 0; k < geo.n_kinds; ++k)
        for (int i = 0; i < layer; ++i) kind_slots[k].push_back(next++);
    const int re0 = next;
    next += 3;
    const int n_extra = (Np - np_min) / layer;
    for (int ins = 0; ins < n_extra; ++ins)
        for (int i = 0; i < layer; ++i) kind_slots[ins % geo.n_kinds].push_back(next++);

    std::vector<BoxDesc> boxes;
    BoxDesc le{BoxKind::LeftEdge, {}};
    append_csd_layer(le, 1, 2, {0, 1, 2}, 0);
    boxes.push_back(std::move(le));
    for (int p = 2; p <= N - l; ++p) {
        const int kind = (p - 2) % geo.n_kinds;
        BoxDesc box{kind == 0 ? BoxKind::BulkOdd : BoxKind::BulkEven, {}};
        const auto& slots = kind_slots[kind];
        for (int layer_i = 0; layer_i * layer < static_cast<int>(slots.size()); ++layer_i)
            append_csd_layer(box, p, p + l - 1, slots, layer_i * layer);
        boxes.push_back(std::move(box));
    }
    BoxDesc re{BoxKind::RightEdge, {}};
    append_csd_layer(re, N - 1, N, {re0, re0 + 1, re0 + 2}, 0);
    boxes.push_back(std::move(re));
    return boxes;
}

// Within-layer rotation slot and sign for qubit j (1-based); returns false to
// skip the site (the self-paired middle site under charge parity).
bool csa_rotation_slot(int N, const CsaOptions& o, int j, int& slot, int& sign) {
    sign = +1;
    if (!o.cp && !o.bulk_ti) {
        slot = j - 1;
        return true;
    }
    if (o.cp && !o.bulk_ti) {
        const int mirror = N + 1 - j;
        if (j == mirror) return false; // θ = −θ forces zero
        slot = std::min(j, mirror) - 1;
        sign = (j < mirror) ? +1 : -1;
        return true;
    }
    const int e = o.edge_width;
    if (o.cp) { // cp && bulk_ti, N even
        if (j <= e) { slot = j - 1; return true; }
        if (j > N - e) { slot = N - j; sign = -1; return true; }
        slot = e;
        sign = (j % 2 == 1) ? +1 : -1; // pairing forces θ_even = −θ_odd
        return true;
    }
    // bulk_ti only: own slots at both edges, two interior slots (odd/even site)
    if (j <= e) { slot = j - 1; return true; }
    if (j > N - e) { slot = e + 2 + (j - (N - e)) - 1; return true; }
    slot = e + ((j % 2 == 1) ? 0 : 1);
    return true;
}

int csa_rotation_width(int N, const CsaOptions& o) {
    if (!o.cp && !o.bulk_ti) return N;
    if (o.cp && !o.bulk_ti) return N / 2;
    if (o.cp) return o.edge_width + 1;
    return 2 * o.edge_width + 2;
}

void check_csa_options(int N, const CsaOptions& o) {
    if (N < 2) throw std::invalid_argument("build_csa_ansatz: N must be >= 2");
    if (N > 12) throw size_cap_error("build_csa_ansatz: full-state ansatz capped at N = 12");
    if (o.edge_width < 0)
        throw std::invalid_argument("build_csa_ansatz: edge_width must be >= 0");
    if (o.bulk_ti && 2 * o.edge_width + 2 > N)
        throw std::invalid_argument(
            "build_csa_ansatz: edge_width leaves no interior sites to repeat");
    if (o.cp && o.bulk_ti && N % 2 != 0)
        throw std::invalid_argument(
            "build_csa_ansatz: charge parity with bulk repetition requires even N");
}

// ------------------------- Validation helpers --------------------------------

bool is_chain_family(AnsatzFamily f) {
    return f == AnsatzFamily::QdbMps || f == AnsatzFamily::CsdMps || f == AnsatzFamily::Modular;
}

void fail(const std::string& message) { throw invariant_error("validate_circuit: " + message); }

} // namespace

// ------------------------------ String names ---------------------------------

std::string to_string(AnsatzFamily family) {
    switch (family) {
        case AnsatzFamily::QdbMps: return "qdb-mps";
        case AnsatzFamily::CsdMps: return "csd-mps";
        case AnsatzFamily::Csa: return "csa";
        case AnsatzFamily::Modular: return "modular";
    }
    throw std::logic_error("to_string: unhandled ansatz family");
}

AnsatzFamily ansatz_family_from_string(const std::string& name) {
    if (name == "qdb-mps") return AnsatzFamily::QdbMps;
    if (name == "csd-mps") return AnsatzFamily::CsdMps;
    if (name == "csa") return AnsatzFamily::Csa;
    if (name == "modular") return AnsatzFamily::Modular;
    throw std::invalid_argument("ansatz_family_from_string: unknown family '" + name + "'");
}

std::string to_string(BoxKind kind) {
    switch (kind) {
        case BoxKind::LeftEdge: return "left-edge";
        case BoxKind::BulkOdd: return "bulk-odd";
        case BoxKind::BulkEven: return "bulk-even";
        case BoxKind::RightEdge: return "right-edge";
        case BoxKind::Interface: return "interface";
    }
    throw std::logic_error("to_string: unhandled box kind");
}

namespace {

BoxKind box_kind_from_string(const std::string& name) {
    for (BoxKind k : {BoxKind::LeftEdge, BoxKind::BulkOdd, BoxKind::BulkEven,
                      BoxKind::RightEdge, BoxKind::Interface})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("circuit_from_json: unknown box kind '" + name + "'");
}

std::string to_string(GeneratorSpec::Kind kind) {
    switch (kind) {
        case GeneratorSpec::Kind::BlueSideband: return "blue-sideband";
        case GeneratorSpec::Kind::MSGate: return "ms";
        case GeneratorSpec::Kind::XY: return "xy";
        case GeneratorSpec::Kind::ZRotation: return "z-rotation";
        case GeneratorSpec::Kind::BusReset: return "bus-reset";
    }
    throw std::logic_error("to_string: unhandled generator kind");
}

GeneratorSpec::Kind generator_kind_from_string(const std::string& name) {
    for (auto k : {GeneratorSpec::Kind::BlueSideband, GeneratorSpec::Kind::MSGate,
                   GeneratorSpec::Kind::XY, GeneratorSpec::Kind::ZRotation,
                   GeneratorSpec::Kind::BusReset})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("circuit_from_json: unknown generator kind '" + name + "'");
}

} // namespace

// --------------------------------- Builders ----------------------------------

ParametrizedCircuit build_qdb_mps_ansatz(int N, int l, int Np, const SpinBosonSpace& space) {
    check_space_for_chain("build_qdb_mps_ansatz", N, space, /*needs_boson=*/true);
    return assemble(space, AnsatzTag{AnsatzFamily::QdbMps, N, l, {}, {}}, Np,
                    qdb_mps_boxes(N, l, Np));
}

ParametrizedCircuit build_csd_mps_ansatz(int N, int l, int Np, const SpinBosonSpace& space) {
    check_space_for_chain("build_csd_mps_ansatz", N, space, /*needs_boson=*/false);
    return assemble(space, AnsatzTag{AnsatzFamily::CsdMps, N, l, {}, {}}, Np,
                    csd_mps_boxes(N, l, Np));
}

ParametrizedCircuit build_csa_ansatz(int N, int n_layers, const SpinBosonSpace& space,
                                     const CsaOptions& options) {
    check_csa_options(N, options);
    if (n_layers < 1) throw std::invalid_argument("build_csa_ansatz: n_layers must be >= 1");
    if (space.n_qubits != N)
        throw std::invalid_argument("build_csa_ansatz: space qubit count differs from N");

    const int width = csa_layer_width(N, options);
    std::vector<BoxDesc> boxes;
    for (int layer = 0; layer < n_layers; ++layer) {
        const int base = layer * width;
        BoxDesc box{layer % 2 == 0 ? BoxKind::BulkOdd : BoxKind::BulkEven, {}};
        box.ops.push_back({xy_spec(), base, +1});
        for (int j = 1; j <= N; ++j) {
            int slot = 0, sign = +1;
            if (csa_rotation_slot(N, options, j, slot, sign))
                box.ops.push_back({z_spec(j), base + 1 + slot, sign});
        }
        boxes.push_back(std::move(box));
    }
    return assemble(space, AnsatzTag{AnsatzFamily::Csa, N, 2, options, {}},
                    n_layers * width, boxes);
}

ParametrizedCircuit build_modular_ansatz(const ModularLayout& layout, int l, int Np,
                                         const SpinBosonSpace& space) {
    if (layout.n_traps < 1)
        throw std::invalid_argument("build_modular_ansatz: n_traps must be >= 1");
    if (layout.ions_per_trap < 1)
        throw std::invalid_argument("build_modular_ansatz: ions_per_trap must be >= 1");
    if (layout.carried_qubits != l - 1)
        throw std::invalid_argument("build_modular_ansatz: carried_qubits must equal l - 1");
    if (layout.carried_qubits >= layout.ions_per_trap)
        throw std::invalid_argument(
            "build_modular_ansatz: carried_qubits must be < ions_per_trap");
    if (layout.interface_ops < 1)
        throw std::invalid_argument("build_modular_ansatz: interface_ops must be >= 1");

    const int P = layout.ions_per_trap;
    const int N = layout.n_traps * P;
    if (layout.n_traps == 1) return build_qdb_mps_ansatz(N, l, Np, space);
    check_space_for_chain("build_modular_ansatz", N, space, /*needs_boson=*/true);

    const auto chain = qdb_mps_boxes(N, l, Np);
    // Trap owning a box: the first trap whose span covers the box's last qubit.
    auto trap_of = [&](int box_index) {
        if (box_index == 0) return 1;
        if (box_index == static_cast<int>(chain.size()) - 1) return layout.n_traps;
        const int p = box_index + 1; // bulk boxes sit at p = 2.. in list order
        return (p + l - 2) / P + 1;  // ceil((p + l − 1)/P)
    };

    const int m = layout.interface_ops;
    std::vector<BoxDesc> boxes;
    int next_box = 0;
    for (int trap = 1; trap <= layout.n_traps; ++trap) {
        while (next_box < static_cast<int>(chain.size()) && trap_of(next_box) == trap)
            boxes.push_back(chain[next_box++]);
        if (trap == layout.n_traps) break;
        // Variational interface on the carried qubits (newest first): U_I,
        // bus hand-off, then U_I† on the fresh bus. One slot vector shared by
        // every interface.
        BoxDesc box{BoxKind::Interface, {}};
        std::vector<int> carried;
        for (int q = trap * P; q > trap * P - (l - 1); --q) carried.push_back(q);
        for (int i = 0; i < m; ++i)
            box.ops.push_back({sideband_spec(carried[i % carried.size()]), Np + i, +1});
        box.ops.push_back({reset_spec(), kNoSlot, +1});
        for (int i = m - 1; i >= 0; --i)
            box.ops.push_back({sideband_spec(carried[i % carried.size()]), Np + i, -1});
        boxes.push_back(std::move(box));
    }
    return assemble(space, AnsatzTag{AnsatzFamily::Modular, N, l, {}, layout}, Np + m, boxes);
}

ParametrizedCircuit build_ansatz(AnsatzFamily family, int N, int l, int Np,
                                 const SpinBosonSpace& space, const CsaOptions& csa,
                                 const ModularLayout& layout) {
    switch (family) {
        case AnsatzFamily::QdbMps: return build_qdb_mps_ansatz(N, l, Np, space);
        case AnsatzFamily::CsdMps: return build_csd_mps_ansatz(N, l, Np, space);
        case AnsatzFamily::Csa: {
            const int width = csa_layer_width(N, csa);
            if (Np % width != 0)
                throw std::invalid_argument("build_ansatz: csa Np must be a multiple of the layer width " +
                                            std::to_string(width));
            return build_csa_ansatz(N, Np / width, space, csa);
        }
        case AnsatzFamily::Modular: {
            ModularLayout fixed = layout;
            if (fixed.ions_per_trap == 0 && fixed.n_traps >= 1 && N % fixed.n_traps == 0)
                fixed.ions_per_trap = N / fixed.n_traps;
            return build_modular_ansatz(fixed, l, Np, space);
        }
    }
    throw std::logic_error("build_ansatz: unhandled family");
}

ParametrizedCircuit extend_parameters(const ParametrizedCircuit& circuit, int new_Np) {
    if (new_Np < circuit.n_params)
        throw std::invalid_argument("extend_parameters: shrinking not supported");
    if (new_Np == circuit.n_params) return circuit;
    const auto& t = circuit.tag;
    switch (t.family) {
        case AnsatzFamily::QdbMps:
            return build_qdb_mps_ansatz(t.n_qubits, t.box_size, new_Np, circuit.space);
        case AnsatzFamily::CsdMps:
            return build_csd_mps_ansatz(t.n_qubits, t.box_size, new_Np, circuit.space);
        case AnsatzFamily::Csa: {
            const int width = csa_layer_width(t.n_qubits, t.csa);
            if (new_Np % width != 0)
                throw std::invalid_argument(
                    "extend_parameters: csa Np must be a multiple of the layer width " +
                    std::to_string(width));
            return build_csa_ansatz(t.n_qubits, new_Np / width, circuit.space, t.csa);
        }
        case AnsatzFamily::Modular:
            throw std::invalid_argument(
                "extend_parameters: interface slots sit at the end of a multi-trap "
                "circuit and would be renumbered; rebuild at the new Np instead");
    }
    throw std::logic_error("extend_parameters: unhandled family");
}

// ----------------------------- Introspection ---------------------------------

int min_parameters(AnsatzFamily family, int N, int l, const CsaOptions& options) {
    switch (family) {
        case AnsatzFamily::QdbMps:
        case AnsatzFamily::Modular: {
            const auto geo = chain_geometry("min_parameters", N, l);
            return 2 + geo.n_kinds * (2 * l + 1) + 2;
        }
        case AnsatzFamily::CsdMps: {
            const auto geo = chain_geometry("min_parameters", N, l);
            return 3 + geo.n_kinds * (l + 1) + 3;
        }
        case AnsatzFamily::Csa:
            check_csa_options(N, options);
            return csa_layer_width(N, options);
    }
    throw std::logic_error("min_parameters: unhandled family");
}

int csa_layer_width(int N, const CsaOptions& options) {
    check_csa_options(N, options);
    return 1 + csa_rotation_width(N, options);
}

std::vector<int> gate_qubits(const GeneratorSpec& spec, int n_qubits) {
    switch (spec.kind) {
        case GeneratorSpec::Kind::BlueSideband:
        case GeneratorSpec::Kind::ZRotation:
            return {spec.site};
        case GeneratorSpec::Kind::MSGate: {
            std::vector<int> sites = spec.sites;
            std::sort(sites.begin(), sites.end());
            return sites;
        }
        case GeneratorSpec::Kind::XY: {
            std::vector<int> sites(n_qubits);
            for (int j = 1; j <= n_qubits; ++j) sites[j - 1] = j;
            return sites;
        }
        case GeneratorSpec::Kind::BusReset:
            return {};
    }
    throw std::logic_error("gate_qubits: unhandled generator kind");
}

// -------------------------------- Validation ---------------------------------

void validate_circuit(const ParametrizedCircuit& c) {
    const int N = c.space.n_qubits;
    if (c.gates.empty()) fail("empty gate list");
    if (c.n_params < 1) fail("circuit declares no parameters");

    // Slot bounds, full coverage, sign domain, bus availability.
    std::vector<int> references(c.n_params, 0);
    for (const auto& gate : c.gates) {
        const bool reset = gate.generator.kind == GeneratorSpec::Kind::BusReset;
        if (reset) {
            if (gate.param_slot != kNoSlot) fail("bus hand-off carries a parameter slot");
        } else {
            if (gate.param_slot < 0 || gate.param_slot >= c.n_params)
                fail("gate slot out of range");
            ++references[gate.param_slot];
        }
        if (gate.sign != 1 && gate.sign != -1) fail("gate sign must be +1 or -1");
        const bool uses_bus = reset || gate.generator.kind == GeneratorSpec::Kind::BlueSideband;
        if (uses_bus && (!c.space.has_boson() || c.space.fock_cutoff < 2))
            fail("bus gate in a circuit without a boson");
        for (int q : gate_qubits(gate.generator, N))
            if (q < 1 || q > N) fail("gate acts outside the qubit register");
    }
    for (int slot = 0; slot < c.n_params; ++slot)
        if (references[slot] == 0)
            fail("slot " + std::to_string(slot) + " is never referenced");

    // Boxes partition the gate list in order.
    if (c.box_layout.empty()) fail("no box layout");
    int cursor = 0;
    for (const auto& box : c.box_layout) {
        if (box.first_gate != cursor || box.end_gate <= box.first_gate)
            fail("boxes do not partition the gate list");
        cursor = box.end_gate;
    }
    if (cursor != static_cast<int>(c.gates.size())) fail("boxes do not cover the gate list");

    // Slot-sharing discipline across boxes.
    auto box_slots = [&](const CircuitBox& box) {
        std::vector<int> slots;
        for (int g = box.first_gate; g < box.end_gate; ++g)
            if (c.gates[g].param_slot != kNoSlot) slots.push_back(c.gates[g].param_slot);
        return slots;
    };
    if (is_chain_family(c.tag.family)) {
        std::vector<int> first_odd, first_even;
        std::set<int> odd_set, even_set, other;
        for (const auto& box : c.box_layout) {
            auto slots = box_slots(box);
            if (box.kind == BoxKind::BulkOdd) {
                if (first_odd.empty()) first_odd = slots;
                else if (slots != first_odd) fail("bulk boxes of equal kind must share one slot vector");
                odd_set.insert(slots.begin(), slots.end());
            } else if (box.kind == BoxKind::BulkEven) {
                if (first_even.empty()) first_even = slots;
                else if (slots != first_even) fail("bulk boxes of equal kind must share one slot vector");
                even_set.insert(slots.begin(), slots.end());
            } else {
                other.insert(slots.begin(), slots.end());
            }
        }
        for (int s : odd_set)
            if (even_set.count(s) || other.count(s)) fail("slots shared across box kinds");
        for (int s : even_set)
            if (other.count(s)) fail("slots shared across box kinds");
    } else {
        // Within one layer a slot may repeat (paired rotations); layers stay disjoint.
        std::set<int> seen;
        for (const auto& box : c.box_layout) {
            const auto slots = box_slots(box);
            const std::set<int> unique(slots.begin(), slots.end());
            for (int s : unique)
                if (!seen.insert(s).second) fail("layers must not share slots");
        }
    }

    // Boundary rule (chain circuits only — full-chain layers overlap by design):
    // consecutive boxes never hand over on the same qubit.
    if (is_chain_family(c.tag.family)) {
        for (size_t b = 0; b + 1 < c.box_layout.size(); ++b) {
            const auto& a = c.box_layout[b];
            const auto& d = c.box_layout[b + 1];
            if (a.kind == BoxKind::Interface || d.kind == BoxKind::Interface) continue;
            const auto last = gate_qubits(c.gates[a.end_gate - 1].generator, N);
            const auto first = gate_qubits(c.gates[d.first_gate].generator, N);
            for (int q : last)
                if (std::find(first.begin(), first.end(), q) != first.end())
                    fail("boxes " + std::to_string(b) + "," + std::to_string(b + 1) +
                         " hand over on qubit " + std::to_string(q));
        }
    }

    // Interface boxes: [m sideband ops, hand-off, same m ops mirrored with sign −1];
    // hand-offs appear nowhere else.
    for (size_t b = 0; b < c.box_layout.size(); ++b) {
        const auto& box = c.box_layout[b];
        const int len = box.end_gate - box.first_gate;
        const bool iface = box.kind == BoxKind::Interface;
        for (int g = box.first_gate; g < box.end_gate; ++g)
            if (c.gates[g].generator.kind == GeneratorSpec::Kind::BusReset && !iface)
                fail("bus hand-off outside an interface box");
        if (!iface) continue;
        if (len % 2 == 0) fail("interface box has even length");
        const int m = len / 2;
        const int mid = box.first_gate + m;
        if (c.gates[mid].generator.kind != GeneratorSpec::Kind::BusReset)
            fail("interface box lacks a central bus hand-off");
        for (int i = 0; i < m; ++i) {
            const auto& fwd = c.gates[box.first_gate + i];
            const auto& bwd = c.gates[box.end_gate - 1 - i];
            if (fwd.generator.kind != GeneratorSpec::Kind::BlueSideband ||
                bwd.generator.kind != GeneratorSpec::Kind::BlueSideband)
                fail("interface ops must be sideband operations");
            if (!(fwd.generator == bwd.generator) || fwd.param_slot != bwd.param_slot ||
                fwd.sign != +1 || bwd.sign != -1)
                fail("interface halves must mirror each other with negated sign");
        }
    }

    // Retirement schedule is exactly the last-touch index per qubit.
    if (compute_retirement(c.gates, N) != c.retirement_schedule)
        fail("retirement schedule inconsistent with gate supports");
}

// ------------------------------ Dense unitary --------------------------------

Eigen::MatrixXcd dense_unitary(const ParametrizedCircuit& circuit,
                               const std::vector<double>& theta) {
    if (static_cast<int>(theta.size()) != circuit.n_params)
        throw std::invalid_argument("dense_unitary: theta size differs from n_params");
    const long long dim = circuit.space.dim();
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(dim, dim);
    for (const auto& gate : circuit.gates) {
        if (gate.generator.kind == GeneratorSpec::Kind::BusReset)
            throw std::invalid_argument("dense_unitary: bus hand-off is not a unitary gate");
        const auto H = build_generator(gate.generator, circuit.space);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.matrix);
        const double angle = gate.sign * theta[gate.param_slot];
        const Eigen::VectorXcd phases =
            (Cx(0.0, -angle) * es.eigenvalues().cast<Cx>().array()).exp().matrix();
        U = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * U;
    }
    return U;
}

// ---------------------------- Serialization ----------------------------------

nlohmann::json circuit_to_json(const ParametrizedCircuit& c) {
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& gate : c.gates) {
        gates.push_back({{"kind", to_string(gate.generator.kind)},
                         {"site", gate.generator.site},
                         {"sites", gate.generator.sites},
                         {"alpha", gate.generator.alpha},
                         {"J0", gate.generator.J0},
                         {"B", gate.generator.B},
                         {"rate_unit", gate.generator.rate_unit},
                         {"slot", gate.param_slot},
                         {"sign", gate.sign}});
    }
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& box : c.box_layout)
        boxes.push_back({{"kind", to_string(box.kind)},
                         {"first_gate", box.first_gate},
                         {"end_gate", box.end_gate}});
    return {{"space", {{"n_qubits", c.space.n_qubits}, {"fock_cutoff", c.space.fock_cutoff}}},
            {"family", to_string(c.tag.family)},
            {"tag",
             {{"n_qubits", c.tag.n_qubits},
              {"box_size", c.tag.box_size},
              {"csa",
               {{"cp", c.tag.csa.cp},
                {"bulk_ti", c.tag.csa.bulk_ti},
                {"edge_width", c.tag.csa.edge_width}}},
              {"layout",
               {{"n_traps", c.tag.layout.n_traps},
                {"ions_per_trap", c.tag.layout.ions_per_trap},
                {"carried_qubits", c.tag.layout.carried_qubits},
                {"interface_ops", c.tag.layout.interface_ops}}}}},
            {"n_params", c.n_params},
            {"gates", gates},
            {"boxes", boxes},
            {"retirement", c.retirement_schedule}};
}

ParametrizedCircuit circuit_from_json(const nlohmann::json& j) {
    ParametrizedCircuit c;
    c.space = validated(SpinBosonSpace{j.at("space").at("n_qubits").get<int>(),
                                       j.at("space").at("fock_cutoff").get<int>()});
    const auto& tag = j.at("tag");
    c.tag.family = ansatz_family_from_string(j.at("family").get<std::string>());
    c.tag.n_qubits = tag.at("n_qubits").get<int>();
    c.tag.box_size = tag.at("box_size").get<int>();
    const auto& csa = tag.at("csa");
    c.tag.csa = CsaOptions{csa.at("cp").get<bool>(), csa.at("bulk_ti").get<bool>(),
                           csa.at("edge_width").get<int>()};
    const auto& layout = tag.at("layout");
    c.tag.layout = ModularLayout{layout.at("n_traps").get<int>(),
                                 layout.at("ions_per_trap").get<int>(),
                                 layout.at("carried_qubits").get<int>(),
                                 layout.at("interface_ops").get<int>()};
    c.n_params = j.at("n_params").get<int>();
    for (const auto& g : j.at("gates")) {
        CircuitGate gate;
        gate.generator.kind = generator_kind_from_string(g.at("kind").get<std::string>());
        gate.generator.site = g.at("site").get<int>();
        gate.generator.sites = g.at("sites").get<std::vector<int>>();
        gate.generator.alpha = g.at("alpha").get<double>();
        gate.generator.J0 = g.at("J0").get<double>();
        gate.generator.B = g.at("B").get<double>();
        gate.generator.rate_unit = g.at("rate_unit").get<double>();
        gate.param_slot = g.at("slot").get<int>();
        gate.sign = g.at("sign").get<int>();
        c.gates.push_back(std::move(gate));
    }
    for (const auto& b : j.at("boxes"))
        c.box_layout.push_back({box_kind_from_string(b.at("kind").get<std::string>()),
                                b.at("first_gate").get<int>(), b.at("end_gate").get<int>()});
    c.retirement_schedule = j.at("retirement").get<std::vector<int>>();
    validate_circuit(c);
    return c;
}

} // namespace qdb
