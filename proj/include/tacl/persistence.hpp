#pragma once

#include <vector>

#include "tacl/field.hpp"

namespace tacl {

// Birth/death of one topological feature of the superlevel filtration
// {x | f(x) >= alpha} as alpha decreases. Structures are born at high
// values and die at low values, so birth_value >= death_value.
struct PersistencePair {
  int dim = 0;  // 0 = component, 1 = hole
  double birth_value = 0.0;
  double death_value = 0.0;
  PixelCoord birth_pixel;  // pixel whose addition created the class
  PixelCoord death_pixel;  // pixel whose addition merged/filled it
  bool essential = false;  // the one component that never dies

  double persistence() const { return birth_value - death_value; }
  friend bool operator==(const PersistencePair&,
                         const PersistencePair&) = default;
};

struct PersistenceDiagram {
  std::vector<PersistencePair> pairs;

  std::size_t count(int dim) const {
    std::size_t n = 0;
    for (const auto& p : pairs)
      if (p.dim == dim) ++n;
    return n;
  }
};

// Soft critical-point map: 1 at selected critical pixels before smoothing,
// decaying away from them after; same dimensions as the source field.
struct CriticalPointMap {
  ScalarField2D field;
};

struct BettiNumbers {
  int beta0 = 0;
  int beta1 = 0;
  friend bool operator==(const BettiNumbers&, const BettiNumbers&) = default;
};

// Persistent homology of the superlevel filtration. Dim-0 pairs come from a
// union-find pass over pixels sorted by decreasing value (4-connectivity,
// elder rule); dim-1 pairs from the dual sublevel pass on the complement
// (8-connectivity, virtual outer region), with birth/death swapped.
// Ties in pixel values are broken by row-major index.
PersistenceDiagram superlevel_diagram(const ScalarField2D& field);

// Birth and death pixels of every non-essential pair with
// persistence >= epsilon, plus the essential birth pixel. Deduplicated,
// row-major order.
std::vector<PixelCoord> critical_pixels(const PersistenceDiagram& diagram,
                                        double epsilon);

// CP = Gaussian(PH(field)): indicator of critical pixels, smoothed.
CriticalPointMap critical_point_map(const ScalarField2D& field, double epsilon,
                                    double sigma);

// beta0 = 4-connected foreground components; beta1 = 8-connected background
// components that do not reach the image border (the mask is embedded in an
// infinite background).
BettiNumbers betti_numbers(const BinaryMask2D& mask);

}  // namespace tacl
