#ifndef WARPCO_DCT_HPP_
#define WARPCO_DCT_HPP_

#include <array>
#include <vector>

namespace warpco {

// Square sample block, size 8 or 16, row-major in the first size*size slots.
struct Block2D {
  int size = 8;
  std::array<double, 16 * 16> samples{};

  explicit Block2D(int block_size = 8);

  double& at(int row, int col) { return samples[row * size + col]; }
  double at(int row, int col) const { return samples[row * size + col]; }
  int sample_count() const { return size * size; }
};

// Orthonormal 2D DCT-II; inverse is the exact transpose pair.
Block2D dct2_forward(const Block2D& block);
Block2D dct2_inverse(const Block2D& coeffs);

// Row-major basis matrix T (size x size) with T * T^T = I; exposed so tests
// can check orthonormality directly.
const std::vector<double>& dct_basis(int size);

// Coefficient scan: order[k] is the row-major index of the k-th coefficient,
// low to high frequency, starting at DC.
struct ScanOrder {
  int size = 0;
  std::vector<int> order;
};

const ScanOrder& zigzag_order(int size);

}  // namespace warpco

#endif  // WARPCO_DCT_HPP_
