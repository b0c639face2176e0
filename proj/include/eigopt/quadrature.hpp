#pragma once

#include <array>

namespace eigopt {

// Symmetric quadrature rules on the reference triangle, given in barycentric
// coordinates (l0, l1, l2) with weights summing to 1. Scale by |T| to
// integrate over a physical element.
struct QuadPoint {
  double l0, l1, l2;
  double w;
};

// Midpoint rule on edges, exact for quadratics.
inline constexpr std::array<QuadPoint, 3> tri_quad_degree2() {
  return {{{0.5, 0.5, 0.0, 1.0 / 3.0},
           {0.0, 0.5, 0.5, 1.0 / 3.0},
           {0.5, 0.0, 0.5, 1.0 / 3.0}}};
}

// Four-point rule, exact for cubics.
inline constexpr std::array<QuadPoint, 4> tri_quad_degree3() {
  constexpr double a = 0.6, b = 0.2;
  return {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, -27.0 / 48.0},
           {a, b, b, 25.0 / 48.0},
           {b, a, b, 25.0 / 48.0},
           {b, b, a, 25.0 / 48.0}}};
}

// Six-point rule (Dunavant), exact for quartics. All weights positive.
inline constexpr std::array<QuadPoint, 6> tri_quad_degree4() {
  constexpr double a = 0.445948490915965;
  constexpr double b = 0.091576213509771;
  constexpr double wa = 0.223381589678011;
  constexpr double wb = 0.109951743655322;
  return {{{a, a, 1.0 - 2.0 * a, wa},
           {a, 1.0 - 2.0 * a, a, wa},
           {1.0 - 2.0 * a, a, a, wa},
           {b, b, 1.0 - 2.0 * b, wb},
           {b, 1.0 - 2.0 * b, b, wb},
           {1.0 - 2.0 * b, b, b, wb}}};
}

}  // namespace eigopt
