#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tacl {

struct PixelCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// 2D grid of finite values in [0,1], row-major. Image slices, likelihood
// maps and critical-point maps all use this representation.
class ScalarField2D {
 public:
  ScalarField2D() = default;
  ScalarField2D(int width, int height, double fill = 0.0);
  ScalarField2D(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(int row, int col) const { return values_[index(row, col)]; }
  void set(int row, int col, double v);
  void set(std::size_t idx, double v);

  double operator[](std::size_t idx) const { return values_[idx]; }
  std::span<const double> values() const { return values_; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  PixelCoord coord(std::size_t idx) const {
    return {static_cast<int>(idx) / width_, static_cast<int>(idx) % width_};
  }

  double max_value() const;
  double min_value() const;

  bool same_shape(const ScalarField2D& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  friend bool operator==(const ScalarField2D&, const ScalarField2D&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

class BinaryMask2D {
 public:
  BinaryMask2D() = default;
  BinaryMask2D(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int row, int col) const { return bits_[index(row, col)] != 0; }
  bool operator[](std::size_t idx) const { return bits_[idx] != 0; }
  void set(int row, int col, bool v) { bits_[index(row, col)] = v ? 1 : 0; }
  void set(std::size_t idx, bool v) { bits_[idx] = v ? 1 : 0; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  std::size_t count_true() const;

  bool same_shape(const BinaryMask2D& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  friend bool operator==(const BinaryMask2D&, const BinaryMask2D&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Model input window: 1, 3 or 5 consecutive slices of identical shape.
class SliceStack {
 public:
  SliceStack() = default;
  explicit SliceStack(std::vector<ScalarField2D> slices);

  std::size_t slice_count() const { return slices_.size(); }
  int width() const { return slices_.empty() ? 0 : slices_[0].width(); }
  int height() const { return slices_.empty() ? 0 : slices_[0].height(); }

  const ScalarField2D& slice(std::size_t i) const { return slices_[i]; }
  ScalarField2D& slice(std::size_t i) { return slices_[i]; }
  const std::vector<ScalarField2D>& slices() const { return slices_; }

  std::size_t center_index() const { return slices_.size() / 2; }

  friend bool operator==(const SliceStack&, const SliceStack&) = default;

 private:
  std::vector<ScalarField2D> slices_;
};

// bit(p) = field(p) >= level.
BinaryMask2D threshold(const ScalarField2D& field, double level);

// Truncated (radius ceil(3*sigma)), normalized Gaussian convolution with
// zero padding, rescaled so the output maximum equals the input maximum.
ScalarField2D gaussian_smooth(const ScalarField2D& field, double sigma);

}  // namespace tacl
