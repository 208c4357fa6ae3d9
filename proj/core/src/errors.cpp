#include "csifb/errors.hpp"

namespace csifb {

SchemaError::SchemaError(const std::string& field, const std::string& what)
    : std::runtime_error("schema error in field '" + field + "': " + what), field_(field) {}

}  // namespace csifb
