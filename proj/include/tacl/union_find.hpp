#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace tacl {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];  // path halving
      x = parent_[x];
    }
    return x;
  }

  // Caller decides which root survives (elder rule needs that control).
  void attach(std::uint32_t child_root, std::uint32_t new_root) {
    parent_[child_root] = new_root;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace tacl
