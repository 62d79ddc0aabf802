#pragma once
// Independent reference implementations shared by the unit and acceptance
// tests. They are deliberately naive and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "castfruits/embedding.hpp"

namespace oracle {

inline std::vector<float> random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double norm = 0.0;
  for (auto& x : v) {
    x = n(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

inline double cos_naive(std::span<const float> a, std::span<const float> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Textbook DBSCAN by connected components of the core graph. Border points
// join the adjacent cluster holding the smallest core index. Labels are
// numbered by each cluster's smallest core index; -1 is noise.
inline std::vector<int> dbscan(const std::vector<std::vector<float>>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) near[i][j] = (i == j) || 1.0 - cos_naive(pts[i], pts[j]) <= eps;
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i)
    core[i] = std::count(near[i].begin(), near[i].end(), true) >= min_pts;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && near[i][j]) {
        auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  // Root is the smallest index in each component.
  std::map<std::size_t, int> label_of_root;
  for (std::size_t i = 0; i < n; ++i)
    if (core[i] && !label_of_root.count(find(i))) label_of_root.emplace(find(i), 0);
  int next = 0;
  for (auto& [root, label] : label_of_root) label = next++;

  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      labels[i] = label_of_root[find(i)];
      continue;
    }
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && near[i][j]) best = std::min(best, find(j));
    if (best < n) labels[i] = label_of_root[best];
  }
  return labels;
}

// Same partition and same noise set, up to relabeling.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [x, fresh_x] = ab.emplace(a[i], b[i]);
    auto [y, fresh_y] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

struct Operating {
  double threshold;
  double fmr;
  double fnmr;
};

// Scans every observed score and +inf; returns the smallest threshold whose
// FMR (scores >= t) does not exceed the target.
inline Operating fnmr_at_fmr(const std::vector<double>& genuine, const std::vector<double>& impostor, double target) {
  std::vector<double> cands(genuine);
  cands.insert(cands.end(), impostor.begin(), impostor.end());
  cands.push_back(std::numeric_limits<double>::infinity());
  Operating best{std::numeric_limits<double>::infinity(), 0.0, 1.0};
  bool found = false;
  for (double t : cands) {
    std::size_t fa = 0, fr = 0;
    for (double s : impostor) fa += s >= t;
    for (double s : genuine) fr += s < t;
    const double f = double(fa) / double(impostor.size());
    if (f <= target && (!found || t < best.threshold)) {
      best = {t, f, double(fr) / double(genuine.size())};
      found = true;
    }
  }
  return best;
}

}  // namespace oracle
