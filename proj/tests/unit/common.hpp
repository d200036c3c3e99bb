#pragma once

#include <doctest.h>

#include <functional>

#include "ebwave/errors.hpp"
#include "ebwave/scaling_basis.hpp"

namespace ebw::test {

inline const ScalingBasis& db8() {
  static const ScalingBasis b = ScalingBasis::build("db8", 12);
  return b;
}

inline ErrorKind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an ebw::Error");
  return ErrorKind::IoError;
}

}  // namespace ebw::test
