#include "brw/lattice.hpp"

#include <stdexcept>

namespace brw {

Site origin_site(int dim) {
  Site s(dim);
  s.setZero();
  return s;
}

std::string site_to_string(const Site& s, char sep) {
  std::string out;
  for (int k = 0; k < s.size(); ++k) {
    if (k > 0) out.push_back(sep);
    out += std::to_string(s[k]);
  }
  return out;
}

LatticeBox::LatticeBox(int dim, int half_width) : dim_(dim), half_width_(half_width) {
  if (dim < 1 || dim > kMaxDimension)
    throw std::invalid_argument("LatticeBox: dimension must be in 1.." + std::to_string(kMaxDimension));
  if (half_width < 1) throw std::invalid_argument("LatticeBox: half_width must be >= 1");
  size_ = 1;
  for (int k = 0; k < dim; ++k) {
    size_ *= side();
    if (size_ > (Eigen::Index(1) << 40))
      throw std::invalid_argument("LatticeBox: box too large to enumerate");
  }
}

bool LatticeBox::contains(const Site& x) const {
  return x.size() == dim_ && (x.abs() <= half_width_).all();
}

Eigen::Index LatticeBox::index_of(const Site& x) const {
  const Eigen::Index i = index_if_inside(x);
  if (i < 0) throw std::out_of_range("LatticeBox: site outside the box");
  return i;
}

Eigen::Index LatticeBox::index_if_inside(const Site& x) const {
  if (!contains(x)) return -1;
  Eigen::Index i = 0;
  Eigen::Index stride = 1;
  for (int k = 0; k < dim_; ++k) {
    i += stride * Eigen::Index(x[k] + half_width_);
    stride *= side();
  }
  return i;
}

Site LatticeBox::point_of(Eigen::Index i) const {
  if (i < 0 || i >= size_) throw std::out_of_range("LatticeBox: index out of range");
  Site x(dim_);
  for (int k = 0; k < dim_; ++k) {
    x[k] = int(i % side()) - half_width_;
    i /= side();
  }
  return x;
}

}  // namespace brw
