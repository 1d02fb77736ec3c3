#include "tacl/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tacl/errors.hpp"

namespace tacl {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw ShapeError("field dimensions must be at least 1x1, got " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
}

void check_value(double v) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw ParameterError("field values must be finite and within [0,1], got " +
                         std::to_string(v));
  }
}

}  // namespace

ScalarField2D::ScalarField2D(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  check_value(fill);
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

ScalarField2D::ScalarField2D(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("value buffer length does not match dimensions");
  }
  for (double v : values_) check_value(v);
}

void ScalarField2D::set(int row, int col, double v) {
  check_value(v);
  values_[index(row, col)] = v;
}

void ScalarField2D::set(std::size_t idx, double v) {
  check_value(v);
  values_[idx] = v;
}

double ScalarField2D::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

double ScalarField2D::min_value() const {
  return *std::min_element(values_.begin(), values_.end());
}

BinaryMask2D::BinaryMask2D(int width, int height, bool fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryMask2D::count_true() const {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

SliceStack::SliceStack(std::vector<ScalarField2D> slices)
    : slices_(std::move(slices)) {
  std::size_t l = slices_.size();
  if (l != 1 && l != 3 && l != 5) {
    throw ShapeError("slice count must be 1, 3 or 5, got " +
                     std::to_string(l));
  }
  for (const auto& s : slices_) {
    if (!s.same_shape(slices_[0])) {
      throw ShapeError("all slices in a stack must share dimensions");
    }
  }
}

BinaryMask2D threshold(const ScalarField2D& field, double level) {
  if (level < 0.0 || level > 1.0 || !std::isfinite(level)) {
    throw ParameterError("threshold level must be in [0,1]");
  }
  BinaryMask2D mask(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) {
    mask.set(i, field[i] >= level);
  }
  return mask;
}

ScalarField2D gaussian_smooth(const ScalarField2D& field, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("gaussian sigma must be positive");
  }
  const int w = field.width();
  const int h = field.height();
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));

  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[i + radius] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  // Separable passes; the product of the normalized 1D kernels equals the
  // normalized 2D kernel on the square support.
  std::vector<double> tmp(field.size(), 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int cc = c + i;
        if (cc < 0 || cc >= w) continue;  // zero padding
        acc += kernel[i + radius] * field.at(r, cc);
      }
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  std::vector<double> out(field.size(), 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int rr = r + i;
        if (rr < 0 || rr >= h) continue;
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(rr) * w + c];
      }
      out[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }

  const double in_max = field.max_value();
  const double out_max = *std::max_element(out.begin(), out.end());
  if (in_max > 0.0 && out_max > 0.0) {
    const double scale = in_max / out_max;
    for (double& v : out) v = std::min(v * scale, in_max);
  }
  return ScalarField2D(w, h, std::move(out));
}

}  // namespace tacl
