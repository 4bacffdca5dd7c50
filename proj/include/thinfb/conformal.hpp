#pragma once
// The holomorphic square map z = w^2/2 between the upper half plane
// {zeta >= 0} and the slit plane: (zeta, y) -> (t, s) = ((zeta^2-y^2)/2,
// zeta y). It straightens the slit {t <= 0, s = 0} onto the line {zeta = 0}
// and carries U to the linear function zeta/sqrt(2).

#include <complex>

#include "thinfb/core.hpp"

namespace thinfb {

struct SlitPlanePoint {
  double t = 0, s = 0;
};
struct HalfPlanePoint {
  double zeta = 0, y = 0;
};

inline SlitPlanePoint conformal_pull(double zeta, double y) {
  return {0.5 * (zeta * zeta - y * y), zeta * y};
}

/// Branch with zeta >= 0; the slit maps to {zeta = 0}.
inline HalfPlanePoint conformal_push(double t, double s) {
  std::complex<double> w = std::sqrt(2.0 * std::complex<double>(t, s));
  return {w.real(), w.imag()};
}

}  // namespace thinfb
