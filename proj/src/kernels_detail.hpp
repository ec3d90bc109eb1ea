#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ohdqn::kernels::detail {

inline void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(want) +
                                " values, got " + std::to_string(got));
  }
}

}  // namespace ohdqn::kernels::detail
