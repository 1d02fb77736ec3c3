#include "tacl/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tacl/errors.hpp"

namespace tacl {

SimilarityMap::SimilarityMap(int n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (n < 1) throw ShapeError("similarity map needs n >= 1");
  if (values_.size() != static_cast<std::size_t>(n) * n) {
    throw ShapeError("similarity map buffer is not n*n");
  }
}

QueryKeyPack build_query_key(const std::vector<CriticalPointMap>& cp_maps,
                             std::size_t center_index) {
  if (cp_maps.empty()) throw ShapeError("build_query_key: no CP maps");
  if (center_index >= cp_maps.size()) {
    throw ShapeError("build_query_key: center index out of range");
  }
  const ScalarField2D& center = cp_maps[center_index].field;
  QueryKeyPack pack;
  pack.channels = static_cast<int>(cp_maps.size());
  pack.height = center.height();
  pack.width = center.width();
  const std::size_t n = center.size();
  pack.q.resize(cp_maps.size() * n);
  pack.k.resize(cp_maps.size() * n);
  for (std::size_t c = 0; c < cp_maps.size(); ++c) {
    const ScalarField2D& slice = cp_maps[c].field;
    if (!slice.same_shape(center)) {
      throw ShapeError("build_query_key: CP map dimensions differ");
    }
    for (std::size_t i = 0; i < n; ++i) {
      pack.k[c * n + i] = slice[i];
      pack.q[c * n + i] = center[i];
    }
  }
  return pack;
}

SimilarityMap similarity(const QueryKeyPack& pack) {
  const int n = pack.pixel_count();
  const int channels = pack.channels;
  if (n < 1 || channels < 1 ||
      pack.q.size() != static_cast<std::size_t>(channels) * n ||
      pack.k.size() != pack.q.size()) {
    throw ShapeError("similarity: malformed query/key pack");
  }

  std::vector<double> sm(static_cast<std::size_t>(n) * n);
  std::vector<double> scores(n);
  for (int row = 0; row < n; ++row) {
    // scores over m for fixed n: r_s(q_m, k_row) = sum_c q[c,m] * k[c,row]
    for (int m = 0; m < n; ++m) {
      double s = 0.0;
      for (int c = 0; c < channels; ++c) {
        s += pack.q[static_cast<std::size_t>(c) * n + m] *
             pack.k[static_cast<std::size_t>(c) * n + row];
      }
      scores[m] = s;
    }
    double hi = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (int m = 0; m < n; ++m) {
      scores[m] = std::exp(scores[m] - hi);
      sum += scores[m];
    }
    double* out = sm.data() + static_cast<std::size_t>(row) * n;
    for (int m = 0; m < n; ++m) out[m] = scores[m] / sum;
  }
  return SimilarityMap(n, std::move(sm));
}

ScalarField2D attend(const ScalarField2D& p_center, const SimilarityMap& sm) {
  const int n = sm.n();
  if (static_cast<std::size_t>(n) != p_center.size()) {
    throw ShapeError("attend: similarity map size does not match field");
  }
  std::vector<double> out(p_center.size());
  const double lo = p_center.min_value();
  const double hi = p_center.max_value();
  for (int row = 0; row < n; ++row) {
    double acc = 0.0;
    for (int m = 0; m < n; ++m) {
      acc += p_center[m] * sm.at(row, m);
    }
    // convex combination; clip float drift so the result stays a field
    out[row] = std::clamp(acc, lo, hi);
  }
  return ScalarField2D(p_center.width(), p_center.height(), std::move(out));
}

ScalarField2D sta_combine(const ScalarField2D& p_center, const ScalarField2D& o,
                          double attention_weight) {
  if (!p_center.same_shape(o)) {
    throw ShapeError("sta_combine: dimensions differ");
  }
  std::vector<double> out(p_center.size());
  for (std::size_t i = 0; i < p_center.size(); ++i) {
    out[i] = std::clamp(attention_weight * o[i] + p_center[i], 0.0, 1.0);
  }
  return ScalarField2D(p_center.width(), p_center.height(), std::move(out));
}

ScalarField2D ita_update(AttentionState& state, const ScalarField2D& o_curr) {
  if (state.beta < 0.0 || state.beta > 1.0) {
    throw ParameterError("ita_update: beta must be in [0,1]");
  }
  if (!state.o_prev.has_value()) {
    state.o_prev = o_curr;
    return o_curr;
  }
  if (!state.o_prev->same_shape(o_curr)) {
    throw ShapeError("ita_update: dimensions differ from stored state");
  }
  const double beta = state.beta;
  std::vector<double> out(o_curr.size());
  for (std::size_t i = 0; i < o_curr.size(); ++i) {
    out[i] = beta * (*state.o_prev)[i] + (1.0 - beta) * o_curr[i];
  }
  ScalarField2D blended(o_curr.width(), o_curr.height(), std::move(out));
  state.o_prev = blended;
  return blended;
}

std::vector<int> tile_origins(int extent, int patch) {
  std::vector<int> starts;
  for (int x = 0; x + patch <= extent; x += patch) starts.push_back(x);
  if (starts.back() + patch < extent) starts.push_back(extent - patch);
  return starts;
}

SliceStack tile_and_stitch(const SliceStack& stack, int patch,
                           const PatchProcess& process) {
  const int h = stack.height(), w = stack.width();
  if (patch < 3) throw ParameterError("tile_and_stitch: patch must be >= 3");
  if (patch > h || patch > w) {
    throw ParameterError("tile_and_stitch: patch larger than image");
  }
  const std::size_t l = stack.slice_count();
  const std::vector<int> row0 = tile_origins(h, patch);
  const std::vector<int> col0 = tile_origins(w, patch);

  std::vector<std::vector<double>> sum(l, std::vector<double>(stack.slice(0).size(), 0.0));
  std::vector<double> hits(stack.slice(0).size(), 0.0);

  std::size_t tile_index = 0;
  for (int r0 : row0) {
    for (int c0 : col0) {
      std::vector<ScalarField2D> tile_slices;
      tile_slices.reserve(l);
      for (std::size_t s = 0; s < l; ++s) {
        std::vector<double> vals(static_cast<std::size_t>(patch) * patch);
        for (int r = 0; r < patch; ++r) {
          for (int c = 0; c < patch; ++c) {
            vals[static_cast<std::size_t>(r) * patch + c] =
                stack.slice(s).at(r0 + r, c0 + c);
          }
        }
        tile_slices.emplace_back(patch, patch, std::move(vals));
      }
      SliceStack processed = process(SliceStack(std::move(tile_slices)), tile_index);
      if (processed.slice_count() != l || processed.height() != patch ||
          processed.width() != patch) {
        throw ShapeError("tile_and_stitch: process changed tile shape");
      }
      for (std::size_t s = 0; s < l; ++s) {
        for (int r = 0; r < patch; ++r) {
          for (int c = 0; c < patch; ++c) {
            sum[s][stack.slice(0).index(r0 + r, c0 + c)] +=
                processed.slice(s).at(r, c);
          }
        }
      }
      for (int r = 0; r < patch; ++r) {
        for (int c = 0; c < patch; ++c) {
          hits[stack.slice(0).index(r0 + r, c0 + c)] += 1.0;
        }
      }
      ++tile_index;
    }
  }

  std::vector<ScalarField2D> out;
  out.reserve(l);
  for (std::size_t s = 0; s < l; ++s) {
    std::vector<double> vals(sum[s].size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = sum[s][i] / hits[i];
    out.emplace_back(w, h, std::move(vals));
  }
  return SliceStack(std::move(out));
}

}  // namespace tacl
