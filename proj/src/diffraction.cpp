#include "dhm/diffraction.hpp"

#include <string>

namespace dhm {

std::string_view to_string(Method method) { return method == Method::Asm ? "asm" : "bldsf"; }

Method method_from_string(std::string_view name) {
  if (name == "asm") return Method::Asm;
  if (name == "bldsf") return Method::BlDsf;
  throw InvalidArgument("unknown method '" + std::string(name) + "' (expected asm or bldsf)");
}

}  // namespace dhm
