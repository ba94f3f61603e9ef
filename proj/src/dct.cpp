#include "warpco/dct.hpp"

#include <cmath>
#include <map>

#include "warpco/error.hpp"

namespace warpco {

namespace {

void require_block_size(int size) {
  if (size != 8 && size != 16)
    throw ConfigError("unsupported block size " + std::to_string(size) +
                      " (must be 8 or 16)");
}

std::vector<double> make_basis(int n) {
  const double pi = 3.14159265358979323846264338327950288;
  std::vector<double> t(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i)
      t[k * n + i] = scale * std::cos(pi * (2 * i + 1) * k / (2.0 * n));
  }
  return t;
}

}  // namespace

Block2D::Block2D(int block_size) : size(block_size) {
  require_block_size(block_size);
}

const std::vector<double>& dct_basis(int size) {
  require_block_size(size);
  static const std::vector<double> t8 = make_basis(8);
  static const std::vector<double> t16 = make_basis(16);
  return size == 8 ? t8 : t16;
}

// Separable transform: C = T B T^T (forward), B = T^T C T (inverse).
Block2D dct2_forward(const Block2D& block) {
  require_block_size(block.size);
  const int n = block.size;
  const std::vector<double>& t = dct_basis(n);
  Block2D tmp(n), out(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += t[k * n + i] * block.at(i, j);
      tmp.at(k, j) = acc;
    }
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += tmp.at(k, j) * t[l * n + j];
      out.at(k, l) = acc;
    }
  return out;
}

Block2D dct2_inverse(const Block2D& coeffs) {
  require_block_size(coeffs.size);
  const int n = coeffs.size;
  const std::vector<double>& t = dct_basis(n);
  Block2D tmp(n), out(n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += t[k * n + i] * coeffs.at(k, l);
      tmp.at(i, l) = acc;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < n; ++l) acc += tmp.at(i, l) * t[l * n + j];
      out.at(i, j) = acc;
    }
  return out;
}

namespace {

ScanOrder make_zigzag(int n) {
  ScanOrder scan;
  scan.size = n;
  scan.order.reserve(static_cast<std::size_t>(n) * n);
  int r = 0, c = 0;
  for (int k = 0; k < n * n; ++k) {
    scan.order.push_back(r * n + c);
    if ((r + c) % 2 == 0) {  // moving up-right
      if (c == n - 1)
        ++r;
      else if (r == 0)
        ++c;
      else {
        --r;
        ++c;
      }
    } else {  // moving down-left
      if (r == n - 1)
        ++c;
      else if (c == 0)
        ++r;
      else {
        ++r;
        --c;
      }
    }
  }
  return scan;
}

}  // namespace

const ScanOrder& zigzag_order(int size) {
  require_block_size(size);
  static const ScanOrder z8 = make_zigzag(8);
  static const ScanOrder z16 = make_zigzag(16);
  return size == 8 ? z8 : z16;
}

}  // namespace warpco
