// Copyright 2026-present the lider authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Two-layer linear recursive-model index over sorted hashkey arrays.
//
// A hashkey becomes an RMI key in two steps: the bit string is read as an
// unsigned integer, then min-max normalized into [0, L_array - 1] using the
// smallest and largest integer seen at build time. The root regression
// routes each key to one of W leaf regressions, and the chosen leaf predicts
// the array location.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lider/common.hpp"
#include "lider/hashkey.hpp"

namespace lider {

namespace detail {

/// Value of a multi-word unsigned integer as a double.
inline double words_to_double(std::span<const std::uint64_t> words) {
  double v = 0.0;
  for (std::uint64_t w : words) v = v * 0x1.0p64 + static_cast<double>(w);
  return v;
}

/// Exact a - b for equal-width unsigned integers with a >= b, as a double.
inline double difference_to_double(std::span<const std::uint64_t> a,
                                   std::span<const std::uint64_t> b) {
  if (a.size() == 1) return static_cast<double>(a[0] - b[0]);
  std::vector<std::uint64_t> diff(a.size());
  std::uint64_t borrow = 0;
  for (std::size_t i = a.size(); i-- > 0;) {
    std::uint64_t x = a[i];
    std::uint64_t y = b[i];
    std::uint64_t d = x - y - borrow;
    borrow = (x < y || (x == y && borrow)) ? 1 : 0;
    diff[i] = d;
  }
  return words_to_double(diff);
}

}  // namespace detail

/// Integer value of a hashkey read as a binary number.
inline double decimal_value(const HashkeyView &key) {
  const std::size_t pad = key.words.size() * 64 - key.length;
  return std::ldexp(detail::words_to_double(key.words), -static_cast<int>(pad));
}

/// Hashkey -> RMI key. With normalization on, maps [x_min, x_max] linearly
/// onto [a, b] = [0, L_array - 1] and clamps anything outside; with it off,
/// returns the raw integer value of the key.
class KeyRescaler {
 public:
  KeyRescaler() = default;

  KeyRescaler(Hashkey x_min, Hashkey x_max, double a, double b, bool normalize = true)
      : x_min_(std::move(x_min)), x_max_(std::move(x_max)), a_(a), b_(b), normalize_(normalize) {
    if (x_min_.length() != x_max_.length() || compare(x_min_, x_max_) > 0) {
      throw InvalidArgument("rescaler requires x_min <= x_max of equal length");
    }
  }

  /// Fits on a sorted array: x_min/x_max are its first and last keys.
  static KeyRescaler fit(const SortedHashkeyArray &array, bool normalize = true) {
    if (array.size() == 0) throw InvalidArgument("cannot fit a rescaler on an empty array");
    auto copy = [](const HashkeyView &v) {
      return Hashkey(std::vector<std::uint64_t>(v.words.begin(), v.words.end()), v.length);
    };
    return KeyRescaler(copy(array.key(0)), copy(array.key(array.size() - 1)), 0.0,
                       static_cast<double>(array.size() - 1), normalize);
  }

  const Hashkey &x_min() const { return x_min_; }
  const Hashkey &x_max() const { return x_max_; }
  double a() const { return a_; }
  double b() const { return b_; }
  bool normalizes() const { return normalize_; }

  double operator()(const HashkeyView &key) const {
    if (key.length != x_min_.length()) {
      throw InvalidArgument("key length " + std::to_string(key.length) +
                            " does not match rescaler length " + std::to_string(x_min_.length()));
    }
    if (!normalize_) return decimal_value(key);
    if (compare(key, x_min_) <= 0) return a_;
    if (compare(key, x_max_) >= 0) return compare(x_min_, x_max_) == 0 ? a_ : b_;
    const double num = detail::difference_to_double(key.words, x_min_.words());
    const double den = detail::difference_to_double(x_max_.words(), x_min_.words());
    return num / den * (b_ - a_) + a_;
  }

  friend bool operator==(const KeyRescaler &, const KeyRescaler &) = default;

 private:
  Hashkey x_min_;
  Hashkey x_max_;
  double a_ = 0.0;
  double b_ = 0.0;
  bool normalize_ = true;
};

struct LinearModel {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }

  friend bool operator==(const LinearModel &, const LinearModel &) = default;
};

/// Closed-form least squares. One point, or all keys equal, gives a
/// constant model at the mean location.
inline LinearModel fit_linear(std::span<const std::pair<double, double>> points) {
  if (points.empty()) throw InvalidArgument("cannot fit a linear model to no points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  LinearModel m;
  if (sxx > 0.0 && std::isfinite(sxx)) {
    m.slope = sxy / sxx;
    m.intercept = my - m.slope * mx;
  } else {
    m.intercept = my;
  }
  if (!std::isfinite(m.slope) || !std::isfinite(m.intercept)) {
    throw Error("linear fit produced non-finite parameters");
  }
  return m;
}

class RmiModel {
 public:
  RmiModel() = default;
  RmiModel(LinearModel root, std::vector<LinearModel> leaves, std::size_t length,
           KeyRescaler rescaler = {})
      : rescaler_(std::move(rescaler)), root_(root), leaves_(std::move(leaves)), length_(length) {
    if (leaves_.empty()) throw InvalidArgument("RMI width must be >= 1");
    if (length_ == 0) throw InvalidArgument("RMI must index at least one location");
    for (const auto &m : leaves_) {
      if (!std::isfinite(m.slope) || !std::isfinite(m.intercept)) {
        throw InvalidArgument("RMI leaf parameters must be finite");
      }
    }
  }

  const KeyRescaler &rescaler() const { return rescaler_; }
  void set_rescaler(KeyRescaler r) { rescaler_ = std::move(r); }
  const LinearModel &root() const { return root_; }
  const std::vector<LinearModel> &leaves() const { return leaves_; }
  std::size_t width() const { return leaves_.size(); }
  std::size_t length() const { return length_; }

  /// Leaf chosen by the root's clamped prediction.
  std::size_t leaf_for(double key) const {
    const double top = static_cast<double>(length_ - 1);
    const double p = std::clamp(root_(key), 0.0, top);
    const double slot = p * static_cast<double>(leaves_.size()) / static_cast<double>(length_);
    return std::min(static_cast<std::size_t>(slot), leaves_.size() - 1);
  }

  /// Location in [0, L_array - 1], rounded half away from zero.
  std::size_t predict(double key) const {
    if (!std::isfinite(key)) throw InvalidArgument("RMI key must be finite");
    const double top = static_cast<double>(length_ - 1);
    double p = leaves_[leaf_for(key)](key);
    if (!(p > 0.0)) return 0;  // also catches NaN from overflow
    if (p >= top) return length_ - 1;
    return static_cast<std::size_t>(std::llround(p));
  }

  std::size_t predict_key(const HashkeyView &key) const { return predict(rescaler_(key)); }

  friend bool operator==(const RmiModel &, const RmiModel &) = default;

 private:
  KeyRescaler rescaler_;
  LinearModel root_;
  std::vector<LinearModel> leaves_;
  std::size_t length_ = 0;
};

/// Trains the root on every pair, routes each pair by the root's own
/// prediction, and fits one leaf per route. Empty leaves copy the root.
inline RmiModel train_rmi(std::span<const std::pair<double, std::size_t>> pairs,
                          std::size_t width, std::size_t length) {
  if (pairs.empty()) throw InvalidArgument("cannot train an RMI on no pairs");
  if (width == 0) throw InvalidArgument("RMI width must be >= 1");
  if (length == 0) throw InvalidArgument("RMI must index at least one location");
  std::vector<std::pair<double, double>> points;
  points.reserve(pairs.size());
  for (auto [key, loc] : pairs) {
    if (!std::isfinite(key)) throw InvalidArgument("RMI training key must be finite");
    points.emplace_back(key, static_cast<double>(loc));
  }
  const LinearModel root = fit_linear(points);
  RmiModel routing(root, std::vector<LinearModel>(width, root), length);
  std::vector<std::vector<std::pair<double, double>>> buckets(width);
  for (const auto &pt : points) buckets[routing.leaf_for(pt.first)].push_back(pt);
  std::vector<LinearModel> leaves(width, root);
  for (std::size_t w = 0; w < width; ++w) {
    if (!buckets[w].empty()) leaves[w] = fit_linear(buckets[w]);
  }
  return RmiModel(root, std::move(leaves), length);
}

struct PredictionAudit {
  std::size_t out_of_range = 0;  // predicted exactly 0 or L_array - 1
  std::size_t large_error = 0;   // |predicted - true| > threshold
  std::size_t overlap = 0;

  friend bool operator==(const PredictionAudit &, const PredictionAudit &) = default;
};

inline PredictionAudit prediction_audit(const RmiModel &model,
                                        std::span<const std::pair<double, std::size_t>> truth,
                                        std::size_t threshold = 100) {
  if (truth.empty()) throw InvalidArgument("audit needs at least one prediction");
  PredictionAudit a;
  const std::size_t last = model.length() - 1;
  for (auto [key, loc] : truth) {
    const std::size_t p = model.predict(key);
    const bool oor = p == 0 || p == last;
    const std::size_t err = p > loc ? p - loc : loc - p;
    const bool le = err > threshold;
    a.out_of_range += oor;
    a.large_error += le;
    a.overlap += oor && le;
  }
  return a;
}

}  // namespace lider
