#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tacl/field.hpp"
#include "tacl/persistence.hpp"

namespace tacl {

// Query/key matrices for spatial topology-attention. k stacks the C slices'
// critical-point maps; q replicates the center slice's map across all C
// channels. Both are C x N, row-major, N = height * width.
struct QueryKeyPack {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> q;
  std::vector<double> k;

  int pixel_count() const { return height * width; }
};

// Row-stochastic N x N attention map; row n holds the weights that pixel n
// places on every source pixel m.
class SimilarityMap {
 public:
  SimilarityMap() = default;
  SimilarityMap(int n, std::vector<double> values);

  int n() const { return n_; }
  double at(int row_n, int col_m) const {
    return values_[static_cast<std::size_t>(row_n) * n_ + col_m];
  }
  const std::vector<double>& values() const { return values_; }

 private:
  int n_ = 0;
  std::vector<double> values_;
};

// Per-patch attention memory across training epochs plus the learned
// residual weight.
struct AttentionState {
  double attention_weight = 0.0;
  double beta = 0.5;
  std::optional<ScalarField2D> o_prev;
};

QueryKeyPack build_query_key(const std::vector<CriticalPointMap>& cp_maps,
                             std::size_t center_index);

// SM_nm = softmax over m of the channel dot product <q_m, k_n>, computed
// with max subtraction.
SimilarityMap similarity(const QueryKeyPack& pack);

// o_n = sum_m p_center[m] * SM_nm.
ScalarField2D attend(const ScalarField2D& p_center, const SimilarityMap& sm);

// P-hat = clamp(attention_weight * o + p_center, 0, 1).
ScalarField2D sta_combine(const ScalarField2D& p_center, const ScalarField2D& o,
                          double attention_weight);

// Exponential moving average across epochs:
// o_T = beta * o_{T-1} + (1 - beta) * o_T. Stores the blend back into the
// state as the new o_prev.
ScalarField2D ita_update(AttentionState& state, const ScalarField2D& o_curr);

// Applies a patch-level pipeline over a non-overlapping tiling (with flush
// tiles at the right/bottom borders) and stitches the results, averaging
// pixels covered by more than one tile.
using PatchProcess =
    std::function<SliceStack(const SliceStack& tile, std::size_t tile_index)>;
SliceStack tile_and_stitch(const SliceStack& stack, int patch,
                           const PatchProcess& process);

// Tile origins along one axis: 0, patch, 2*patch, ... plus a final origin
// flush with the end when the extent is not divisible.
std::vector<int> tile_origins(int extent, int patch);

}  // namespace tacl
