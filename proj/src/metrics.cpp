#include "tacl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>

#include "tacl/errors.hpp"
#include "tacl/persistence.hpp"
#include "tacl/rng.hpp"

namespace tacl {

LabelMap2D::LabelMap2D(int width, int height, std::vector<int> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width < 1 || height < 1) throw ShapeError("label map must be at least 1x1");
  if (labels_.size() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("label buffer length does not match dimensions");
  }
  for (int v : labels_) {
    if (v < 0) throw ParameterError("labels must be non-negative");
  }
}

int LabelMap2D::max_label() const {
  return *std::max_element(labels_.begin(), labels_.end());
}

LabelMap2D LabelMap2D::canonicalized() const {
  std::unordered_map<int, int> remap{{0, 0}};
  int next = 1;
  std::vector<int> out(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels_[i], next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return LabelMap2D(width_, height_, std::move(out));
}

LabelMap2D label_regions(const BinaryMask2D& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> labels(mask.size(), 0);
  std::vector<std::uint32_t> stack;
  int next = 0;
  for (std::uint32_t start = 0; start < mask.size(); ++start) {
    if (mask[start] || labels[start] != 0) continue;
    ++next;
    labels[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      std::uint32_t p = stack.back();
      stack.pop_back();
      int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
      const std::uint32_t nb[4] = {p - std::uint32_t(w), p + std::uint32_t(w),
                                   p - 1, p + 1};
      const bool ok[4] = {r > 0, r < h - 1, c > 0, c < w - 1};
      for (int i = 0; i < 4; ++i) {
        if (ok[i] && !mask[nb[i]] && labels[nb[i]] == 0) {
          labels[nb[i]] = next;
          stack.push_back(nb[i]);
        }
      }
    }
  }
  return LabelMap2D(w, h, std::move(labels));
}

double dice(const BinaryMask2D& a, const BinaryMask2D& b) {
  if (!a.same_shape(b)) throw ShapeError("dice: mask dimensions differ");
  std::size_t inter = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    total += (a[i] ? 1 : 0) + (b[i] ? 1 : 0);
  }
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

namespace {

// Contingency counts over pixels with gt label != 0.
struct Contingency {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pred_sum;
  std::map<int, double> gt_sum;
  double total = 0.0;
};

Contingency build_contingency(const LabelMap2D& pred, const LabelMap2D& gt) {
  if (!pred.same_shape(gt)) throw ShapeError("label map dimensions differ");
  Contingency t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] == 0) continue;
    t.joint[{pred[i], gt[i]}] += 1.0;
    t.pred_sum[pred[i]] += 1.0;
    t.gt_sum[gt[i]] += 1.0;
    t.total += 1.0;
  }
  if (t.total == 0.0) {
    throw ParameterError("no pixels left after excluding gt label 0");
  }
  return t;
}

}  // namespace

double adapted_rand_index(const LabelMap2D& pred, const LabelMap2D& gt) {
  Contingency t = build_contingency(pred, gt);
  double sum_joint2 = 0.0, sum_pred2 = 0.0, sum_gt2 = 0.0;
  for (const auto& [k, v] : t.joint) sum_joint2 += v * v;
  for (const auto& [k, v] : t.pred_sum) sum_pred2 += v * v;
  for (const auto& [k, v] : t.gt_sum) sum_gt2 += v * v;
  double precision = sum_joint2 / sum_pred2;
  double recall = sum_joint2 / sum_gt2;
  return 2.0 * precision * recall / (precision + recall);
}

double variation_of_information(const LabelMap2D& pred, const LabelMap2D& gt) {
  Contingency t = build_contingency(pred, gt);
  double h_joint = 0.0, h_pred = 0.0, h_gt = 0.0;
  for (const auto& [k, v] : t.joint) {
    double p = v / t.total;
    h_joint -= p * std::log(p);
  }
  for (const auto& [k, v] : t.pred_sum) {
    double p = v / t.total;
    h_pred -= p * std::log(p);
  }
  for (const auto& [k, v] : t.gt_sum) {
    double p = v / t.total;
    h_gt -= p * std::log(p);
  }
  // H(pred|gt) + H(gt|pred) = 2 H(pred,gt) - H(pred) - H(gt)
  double voi = 2.0 * h_joint - h_pred - h_gt;
  return std::max(voi, 0.0);
}

double betti_error(const BinaryMask2D& pred, const BinaryMask2D& gt, int patch,
                   int samples, std::uint64_t seed, bool include_beta0) {
  if (!pred.same_shape(gt)) throw ShapeError("betti_error: dimensions differ");
  if (patch < 1 || patch > pred.width() || patch > pred.height()) {
    throw ParameterError("betti_error: patch must fit inside the masks");
  }
  if (samples < 1) throw ParameterError("betti_error: samples must be >= 1");

  Rng rng(seed);
  const int row_span = pred.height() - patch + 1;
  const int col_span = pred.width() - patch + 1;
  double total = 0.0;
  for (int s = 0; s < samples; ++s) {
    int r0 = static_cast<int>(rng.below(row_span));
    int c0 = static_cast<int>(rng.below(col_span));
    BinaryMask2D pp(patch, patch), gp(patch, patch);
    for (int r = 0; r < patch; ++r) {
      for (int c = 0; c < patch; ++c) {
        pp.set(r, c, pred.at(r0 + r, c0 + c));
        gp.set(r, c, gt.at(r0 + r, c0 + c));
      }
    }
    BettiNumbers bp = betti_numbers(pp);
    BettiNumbers bg = betti_numbers(gp);
    total += std::abs(bp.beta1 - bg.beta1);
    if (include_beta0) total += std::abs(bp.beta0 - bg.beta0);
  }
  return total / samples;
}

}  // namespace tacl
