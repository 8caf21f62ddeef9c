#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace synthloc {

struct Neighbor {
  std::uint32_t id;
  double distance;  // Euclidean

  bool operator==(const Neighbor&) const = default;
};

// Exact k-nearest-neighbour search over fixed-dimension float rows.
// Results are ordered by (distance, id), so equidistant rows come back
// lowest id first, matching a stable linear scan.
class KdTree {
 public:
  KdTree() = default;
  // `rows` is row-major, rows.size() == count * dim. The data is copied.
  KdTree(std::span<const float> rows, std::size_t dim, std::size_t leaf_size = 8);

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return size() == 0; }

  // Returns min(k, size()) neighbours; k == 0 yields an empty result.
  std::vector<Neighbor> knn(std::span<const float> query, std::size_t k) const;
  // All rows within `radius` (inclusive), ordered by (distance, id).
  std::vector<Neighbor> radius_search(std::span<const float> query, double radius) const;

  std::span<const float> row(std::size_t id) const { return {data_.data() + id * dim_, dim_}; }

 private:
  struct Node {
    // Leaf when left < 0: rows order_[begin, end).
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t split_dim = 0;
    float split_value = 0.0f;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  double squared_distance(std::span<const float> query, std::uint32_t id) const;

  std::vector<float> data_;
  std::size_t dim_ = 0;
  std::size_t leaf_size_ = 8;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// Reference implementation used to cross-check the tree.
std::vector<Neighbor> linear_knn(std::span<const float> rows, std::size_t dim, std::span<const float> query,
                                 std::size_t k);

}  // namespace synthloc
