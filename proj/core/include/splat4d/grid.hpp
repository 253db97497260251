// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace splat4d {

// Dense row-major H x W x C array. Pixel (y, x) stores its channels
// contiguously, so flat index = (y * width + x) * channels + c.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels, T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    assert(height >= 0 && width >= 0 && channels >= 1);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x, int c = 0) {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  const T& at(int y, int x, int c = 0) const {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using Image = Grid<double>;
using Mask = Grid<std::uint8_t>;

}  // namespace splat4d
