#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

namespace brw {

// A lattice point in Z^d. Dimension is bounded by 5 so sites live on the stack.
using Site = Eigen::Array<int, Eigen::Dynamic, 1, 0, 5, 1>;

inline constexpr int kMaxDimension = 5;

Site origin_site(int dim);

inline bool same_site(const Site& a, const Site& b) {
  return a.size() == b.size() && (a == b).all();
}

std::string site_to_string(const Site& s, char sep = ',');

// Finite box {-L..L}^d with a fixed mixed-radix site enumeration.
// Axis 0 varies fastest; the origin always maps to (size()-1)/2.
class LatticeBox {
 public:
  LatticeBox(int dim, int half_width);

  int dim() const { return dim_; }
  int half_width() const { return half_width_; }
  int side() const { return 2 * half_width_ + 1; }
  Eigen::Index size() const { return size_; }

  bool contains(const Site& x) const;
  Eigen::Index index_of(const Site& x) const;       // throws if x outside the box
  Eigen::Index index_if_inside(const Site& x) const;  // -1 if outside
  Site point_of(Eigen::Index i) const;
  Eigen::Index origin_index() const { return (size_ - 1) / 2; }

 private:
  int dim_;
  int half_width_;
  Eigen::Index size_;
};

}  // namespace brw
