#include "tacl/persistence.hpp"

#include <algorithm>
#include <cstdint>
#include <set>

#include "tacl/errors.hpp"
#include "tacl/union_find.hpp"

namespace tacl {

namespace {

constexpr std::uint32_t kAbsent = 0xffffffffu;

struct Neighborhood {
  int count = 0;
  std::uint32_t idx[8];
};

Neighborhood neighbors4(std::uint32_t p, int w, int h) {
  Neighborhood nb;
  int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
  if (r > 0) nb.idx[nb.count++] = p - w;
  if (r < h - 1) nb.idx[nb.count++] = p + w;
  if (c > 0) nb.idx[nb.count++] = p - 1;
  if (c < w - 1) nb.idx[nb.count++] = p + 1;
  return nb;
}

Neighborhood neighbors8(std::uint32_t p, int w, int h) {
  Neighborhood nb;
  int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      int rr = r + dr, cc = c + dc;
      if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
      nb.idx[nb.count++] = static_cast<std::uint32_t>(rr) * w + cc;
    }
  }
  return nb;
}

// One elder-rule union-find sweep. Pixels are added in the given order;
// `rank` maps pixel -> position in that order (smaller = elder). Every merge
// of two already-born components emits (young birth pixel, merge pixel).
// The component born at the merge pixel itself is the trivial instant-death
// class and is not emitted.
struct MergeEvent {
  std::uint32_t birth_px;
  std::uint32_t death_px;
};

template <typename NeighborFn>
std::vector<MergeEvent> filtration_sweep(const std::vector<std::uint32_t>& order,
                                         const std::vector<std::uint32_t>& rank,
                                         int w, int h, NeighborFn neighbors,
                                         bool with_outer) {
  const std::size_t n = order.size();
  const std::uint32_t outer = static_cast<std::uint32_t>(n);
  UnionFind uf(with_outer ? n + 1 : n);
  std::vector<std::uint32_t> birth(with_outer ? n + 1 : n, kAbsent);
  std::vector<std::uint8_t> present(with_outer ? n + 1 : n, 0);
  if (with_outer) {
    birth[outer] = outer;  // rank of outer is treated as -infinity
    present[outer] = 1;
  }
  auto older = [&](std::uint32_t px_a, std::uint32_t px_b) {
    if (px_a == outer) return true;
    if (px_b == outer) return false;
    return rank[px_a] < rank[px_b];
  };

  std::vector<MergeEvent> events;
  for (std::uint32_t p : order) {
    present[p] = 1;
    birth[p] = p;
    Neighborhood nb = neighbors(p, w, h);
    bool border = with_outer && (p / w == 0 || p / w == std::uint32_t(h - 1) ||
                                 p % w == 0 || p % w == std::uint32_t(w - 1));
    for (int i = 0; i < nb.count + (border ? 1 : 0); ++i) {
      std::uint32_t q = (i < nb.count) ? nb.idx[i] : outer;
      if (!present[q]) continue;
      std::uint32_t ra = uf.find(p);
      std::uint32_t rb = uf.find(q);
      if (ra == rb) continue;
      std::uint32_t elder = older(birth[ra], birth[rb]) ? ra : rb;
      std::uint32_t young = (elder == ra) ? rb : ra;
      if (birth[young] != p) {
        events.push_back({birth[young], p});
      }
      uf.attach(young, elder);
    }
  }
  return events;
}

}  // namespace

PersistenceDiagram superlevel_diagram(const ScalarField2D& field) {
  const int w = field.width(), h = field.height();
  const std::size_t n = field.size();

  // Total order: value descending, ties by ascending row-major index.
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              if (field[a] != field[b]) return field[a] > field[b];
              return a < b;
            });
  std::vector<std::uint32_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = static_cast<std::uint32_t>(i);

  PersistenceDiagram diagram;

  for (const MergeEvent& e :
       filtration_sweep(order, rank, w, h, neighbors4, false)) {
    PersistencePair pair;
    pair.dim = 0;
    pair.birth_value = field[e.birth_px];
    pair.birth_pixel = field.coord(e.birth_px);
    pair.death_value = field[e.death_px];
    pair.death_pixel = field.coord(e.death_px);
    diagram.pairs.push_back(pair);
  }

  PersistencePair essential;
  essential.dim = 0;
  essential.essential = true;
  essential.birth_value = field[order.front()];
  essential.birth_pixel = field.coord(order.front());
  essential.death_value = field[order.back()];  // global minimum
  essential.death_pixel = field.coord(order.back());
  diagram.pairs.push_back(essential);

  // Dual pass: sublevel filtration of the complement in exactly the reversed
  // total order, 8-connectivity, with the unbounded outer region present from
  // the start. A complement component born at value b that merges into the
  // outside at value d is a hole alive for thresholds d < alpha <= b of the
  // complement sweep, i.e. a dim-1 class with birth d and death b upstairs.
  std::vector<std::uint32_t> dual_order(order.rbegin(), order.rend());
  std::vector<std::uint32_t> dual_rank(n);
  for (std::size_t i = 0; i < n; ++i)
    dual_rank[dual_order[i]] = static_cast<std::uint32_t>(i);

  for (const MergeEvent& e :
       filtration_sweep(dual_order, dual_rank, w, h, neighbors8, true)) {
    PersistencePair pair;
    pair.dim = 1;
    pair.birth_value = field[e.death_px];
    pair.birth_pixel = field.coord(e.death_px);
    pair.death_value = field[e.birth_px];
    pair.death_pixel = field.coord(e.birth_px);
    diagram.pairs.push_back(pair);
  }
  return diagram;
}

std::vector<PixelCoord> critical_pixels(const PersistenceDiagram& diagram,
                                        double epsilon) {
  if (epsilon < 0.0) throw ParameterError("epsilon must be >= 0");
  std::set<std::pair<int, int>> seen;
  for (const auto& pair : diagram.pairs) {
    if (pair.essential) {
      seen.insert({pair.birth_pixel.row, pair.birth_pixel.col});
    } else if (pair.persistence() >= epsilon) {
      seen.insert({pair.birth_pixel.row, pair.birth_pixel.col});
      seen.insert({pair.death_pixel.row, pair.death_pixel.col});
    }
  }
  std::vector<PixelCoord> out;
  out.reserve(seen.size());
  for (const auto& [r, c] : seen) out.push_back({r, c});
  return out;
}

CriticalPointMap critical_point_map(const ScalarField2D& field, double epsilon,
                                    double sigma) {
  PersistenceDiagram diagram = superlevel_diagram(field);
  ScalarField2D indicator(field.width(), field.height(), 0.0);
  for (const PixelCoord& p : critical_pixels(diagram, epsilon)) {
    indicator.set(p.row, p.col, 1.0);
  }
  return CriticalPointMap{gaussian_smooth(indicator, sigma)};
}

BettiNumbers betti_numbers(const BinaryMask2D& mask) {
  const int w = mask.width(), h = mask.height();
  const std::size_t n = mask.size();

  UnionFind fg(n);
  for (std::uint32_t p = 0; p < n; ++p) {
    if (!mask[p]) continue;
    int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
    if (r > 0 && mask[p - w]) fg.attach(fg.find(p), fg.find(p - w));
    if (c > 0 && mask[p - 1]) fg.attach(fg.find(p), fg.find(p - 1));
  }
  int beta0 = 0;
  for (std::uint32_t p = 0; p < n; ++p) {
    if (mask[p] && fg.find(p) == p) ++beta0;
  }

  // Background components under 8-connectivity; any component reaching the
  // image border belongs to the unbounded outside and is not a hole.
  const std::uint32_t outer = static_cast<std::uint32_t>(n);
  UnionFind bg(n + 1);
  for (std::uint32_t p = 0; p < n; ++p) {
    if (mask[p]) continue;
    int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
    if (r == 0 || r == h - 1 || c == 0 || c == w - 1) {
      bg.attach(bg.find(p), bg.find(outer));
    }
    Neighborhood nb = neighbors8(p, w, h);
    for (int i = 0; i < nb.count; ++i) {
      std::uint32_t q = nb.idx[i];
      if (q < p && !mask[q]) bg.attach(bg.find(p), bg.find(q));
    }
  }
  int beta1 = 0;
  std::uint32_t outer_root = bg.find(outer);
  for (std::uint32_t p = 0; p < n; ++p) {
    if (!mask[p] && bg.find(p) == p && p != outer_root) ++beta1;
  }
  return {beta0, beta1};
}

}  // namespace tacl
