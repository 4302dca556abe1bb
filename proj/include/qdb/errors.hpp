// errors.hpp — Error taxonomy shared by all layers; maps onto the CLI exit codes.

#pragma once

#include <stdexcept>
#include <string>

namespace qdb {

// A mathematical invariant failed at runtime (non-Hermitian density matrix,
// trace drift, negative eigenvalue, streaming/full disagreement...). CLI exit 3.
struct invariant_error : std::runtime_error {
    explicit invariant_error(const std::string& what) : std::runtime_error(what) {}
};

// Request exceeds the documented desk-scale caps (ED N > 14, CSA N > 12). CLI exit 4.
struct size_cap_error : std::runtime_error {
    explicit size_cap_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qdb
