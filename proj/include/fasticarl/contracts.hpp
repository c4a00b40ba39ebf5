#ifndef FASTICARL_CONTRACTS_HPP
#define FASTICARL_CONTRACTS_HPP

#include <stdexcept>
#include <string>

namespace fasticarl {

// Thrown when a caller violates a documented precondition.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

inline void check_contract(bool ok, const std::string& what) {
    if (!ok) throw ContractViolation(what);
}

} // namespace fasticarl

#endif
