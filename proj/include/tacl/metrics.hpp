#pragma once

#include <cstdint>
#include <vector>

#include "tacl/field.hpp"

namespace tacl {

// Instance labels per pixel; 0 marks boundary/ignored pixels.
class LabelMap2D {
 public:
  LabelMap2D() = default;
  LabelMap2D(int width, int height, std::vector<int> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }

  int at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }
  int operator[](std::size_t idx) const { return labels_[idx]; }
  const std::vector<int>& labels() const { return labels_; }

  int max_label() const;

  // Remap labels to the contiguous set {0..K} in first-encounter row-major
  // order, keeping 0 fixed.
  LabelMap2D canonicalized() const;

  bool same_shape(const LabelMap2D& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  friend bool operator==(const LabelMap2D&, const LabelMap2D&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<int> labels_;
};

// 4-connected components of the background (non-membrane) pixels, labeled
// 1..K in first-encounter row-major order; membrane pixels get label 0.
LabelMap2D label_regions(const BinaryMask2D& mask);

// 2|A and B| / (|A|+|B|); 1 when both masks are empty.
double dice(const BinaryMask2D& a, const BinaryMask2D& b);

// F-score form of the Rand index over the contingency table of pred/gt
// co-occurrence, with sums of squares (ordered pixel pairs including
// self-pairs). Pixels with gt label 0 are excluded.
double adapted_rand_index(const LabelMap2D& pred, const LabelMap2D& gt);

// VOI = H(pred|gt) + H(gt|pred), natural log. Pixels with gt label 0 are
// excluded.
double variation_of_information(const LabelMap2D& pred, const LabelMap2D& gt);

// Mean absolute beta1 difference over seeded random patch positions;
// include_beta0 adds the beta0 difference as well.
double betti_error(const BinaryMask2D& pred, const BinaryMask2D& gt, int patch,
                   int samples, std::uint64_t seed, bool include_beta0 = false);

}  // namespace tacl
