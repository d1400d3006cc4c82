#include "hydra/error.hpp"

namespace hydra {

ParseError::ParseError(const std::string& what, std::size_t line)
    : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
        return kExitConfig;
    }
    if (dynamic_cast<const DataError*>(&e) != nullptr) {
        return kExitData;
    }
    if (dynamic_cast<const BackendError*>(&e) != nullptr) {
        return kExitBackend;
    }
    return kExitFailure;
}

}  // namespace hydra
