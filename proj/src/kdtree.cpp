#include "synthloc/locdb/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace synthloc {

namespace {

struct Candidate {
  double dist2;
  std::uint32_t id;
  bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && id < o.id); }
};

double sq_dist(const float* a, const float* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

std::vector<Neighbor> finish(std::vector<Candidate> c) {
  std::sort(c.begin(), c.end());
  std::vector<Neighbor> out;
  out.reserve(c.size());
  for (const auto& x : c) out.push_back({x.id, std::sqrt(x.dist2)});
  return out;
}

}  // namespace

KdTree::KdTree(std::span<const float> rows, std::size_t dim, std::size_t leaf_size)
    : data_(rows.begin(), rows.end()), dim_(dim), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (dim == 0 || rows.size() % dim != 0) throw std::invalid_argument("KdTree: rows not a multiple of dim");
  order_.resize(size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!order_.empty()) build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  nodes_[index].begin = begin;
  nodes_[index].end = end;
  if (end - begin <= leaf_size_) return index;

  // Split on the dimension of largest spread at the median.
  std::uint32_t best_dim = 0;
  float best_spread = -1.0f;
  for (std::uint32_t d = 0; d < dim_; ++d) {
    float lo = data_[order_[begin] * dim_ + d], hi = lo;
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      const float v = data_[order_[i] * dim_ + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0f) return index;  // all rows identical

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const float va = data_[a * dim_ + best_dim], vb = data_[b * dim_ + best_dim];
                     return va < vb || (va == vb && a < b);
                   });
  const float split = data_[order_[mid] * dim_ + best_dim];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  nodes_[index].split_dim = best_dim;
  nodes_[index].split_value = split;
  return index;
}

double KdTree::squared_distance(std::span<const float> query, std::uint32_t id) const {
  return sq_dist(query.data(), data_.data() + id * dim_, dim_);
}

std::vector<Neighbor> KdTree::knn(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim_) throw std::invalid_argument("KdTree::knn: query dimension mismatch");
  k = std::min(k, size());
  if (k == 0) return {};

  // Max-heap of the best k under (dist2, id) ordering.
  std::priority_queue<Candidate> best;
  auto consider = [&](std::uint32_t id) {
    const Candidate c{squared_distance(query, id), id};
    if (best.size() < k) {
      best.push(c);
    } else if (c < best.top()) {
      best.pop();
      best.push(c);
    }
  };

  // Depth-first with the lower bound accumulated per split (exact pruning:
  // a subtree is skipped only when its bound is strictly worse than the k-th best).
  struct Frame {
    std::int32_t node;
    double bound;
  };
  std::vector<Frame> stack{{0, 0.0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (best.size() == k && f.bound > best.top().dist2) continue;
    const Node& n = nodes_[f.node];
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) consider(order_[i]);
      continue;
    }
    const double diff = static_cast<double>(query[n.split_dim]) - n.split_value;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    stack.push_back({far, std::max(f.bound, diff * diff)});
    stack.push_back({near, f.bound});
  }

  std::vector<Candidate> out;
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  return finish(std::move(out));
}

std::vector<Neighbor> KdTree::radius_search(std::span<const float> query, double radius) const {
  if (query.size() != dim_) throw std::invalid_argument("KdTree::radius_search: query dimension mismatch");
  std::vector<Candidate> found;
  if (empty()) return {};
  const double r2 = radius * radius;
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d2 = squared_distance(query, order_[i]);
        if (d2 <= r2) found.push_back({d2, order_[i]});
      }
      continue;
    }
    const double diff = static_cast<double>(query[n.split_dim]) - n.split_value;
    if (diff < 0.0 || diff * diff <= r2) stack.push_back(n.left);
    if (diff >= 0.0 || diff * diff <= r2) stack.push_back(n.right);
  }
  return finish(std::move(found));
}

std::vector<Neighbor> linear_knn(std::span<const float> rows, std::size_t dim, std::span<const float> query,
                                 std::size_t k) {
  std::vector<Candidate> all;
  const std::size_t n = rows.size() / dim;
  all.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) all.push_back({sq_dist(query.data(), rows.data() + i * dim, dim), i});
  k = std::min(k, n);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return finish(std::move(all));
}

}  // namespace synthloc
