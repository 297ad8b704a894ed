#include "bmix/exec.hpp"

#include <omp.h>

#include <string>

#include "bmix/error.hpp"

namespace bmix {

Exec parse_exec(std::string_view text) {
  if (text == "serial") return Exec::serial;
  if (text == "parallel") return Exec::parallel;
  throw ParseError("unknown execution policy '" + std::string(text) +
                   "' (expected serial|parallel)");
}

std::string_view to_string(Exec e) { return e == Exec::serial ? "serial" : "parallel"; }

int parallel_threads() { return omp_get_max_threads(); }

}  // namespace bmix
