#pragma once

#include <cstdint>
#include <exception>
#include <string_view>

namespace bmix {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path; `parallel` distributes independent work items over OpenMP threads.
/// Every kernel writes per-item results to fixed slots and reduces them in
/// index order, so both policies produce bit-identical output.
enum class Exec { serial, parallel };

Exec parse_exec(std::string_view text);
std::string_view to_string(Exec e);

/// Number of OpenMP threads the parallel policy would use.
int parallel_threads();

/// Runs body(i) for i in [0, count). Exceptions thrown by body are captured
/// and the first one (lowest index) is rethrown after the loop.
template <class Body>
void for_each_index(Exec exec, std::int64_t count, Body&& body) {
  std::exception_ptr first_error;
  std::int64_t first_index = count;
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
#pragma omp critical(bmix_for_each_index)
        {
          if (i < first_index) {
            first_index = i;
            first_error = std::current_exception();
          }
        }
      }
    }
  } else {
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
        first_error = std::current_exception();
        break;
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace bmix
