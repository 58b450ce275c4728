#include "csgmm/patches.hpp"

#include <stdexcept>

namespace csgmm::patches {

namespace {

std::vector<int> make_origins(int dim, int patch_side, int stride) {
  std::vector<int> origins;
  for (int o = 0; o + patch_side <= dim; o += stride) origins.push_back(o);
  const int last = dim - patch_side;
  if (origins.back() != last) origins.push_back(last);  // clamped final patch
  return origins;
}

}  // namespace

PatchGrid build_grid(int h, int w, int patch_side, int stride) {
  if (patch_side < 1 || patch_side > std::min(h, w))
    throw std::invalid_argument("build_grid: patch larger than image");
  if (stride < 1) throw std::invalid_argument("build_grid: stride must be >= 1");
  PatchGrid grid;
  grid.image_height = h;
  grid.image_width = w;
  grid.patch_side = patch_side;
  grid.stride = stride;
  grid.origin_rows = make_origins(h, patch_side, stride);
  grid.origin_cols = make_origins(w, patch_side, stride);
  grid.overlap_counts = Eigen::VectorXd::Zero(h * w);
  for (int orow : grid.origin_rows)
    for (int ocol : grid.origin_cols)
      for (int r = 0; r < patch_side; ++r)
        for (int c = 0; c < patch_side; ++c)
          grid.overlap_counts[(orow + r) * w + ocol + c] += 1.0;
  return grid;
}

Eigen::MatrixXd extract(const PatchGrid& grid, const Eigen::VectorXd& x) {
  if (x.size() != grid.pixel_count())
    throw std::invalid_argument("extract: image length mismatch");
  Eigen::MatrixXd out(grid.patch_dim(), grid.patch_count());
  const int w = grid.image_width;
  const int side = grid.patch_side;
  int col = 0;
  for (int orow : grid.origin_rows)
    for (int ocol : grid.origin_cols) {
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
          out(r * side + c, col) = x[(orow + r) * w + ocol + c];
      ++col;
    }
  return out;
}

Eigen::VectorXd aggregate(const PatchGrid& grid, const Eigen::MatrixXd& p) {
  if (p.rows() != grid.patch_dim() || p.cols() != grid.patch_count())
    throw std::invalid_argument("aggregate: patch set does not match grid");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.pixel_count());
  const int w = grid.image_width;
  const int side = grid.patch_side;
  int col = 0;
  // Sequential fixed-order reduction keeps results bit-reproducible.
  for (int orow : grid.origin_rows)
    for (int ocol : grid.origin_cols) {
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
          out[(orow + r) * w + ocol + c] += p(r * side + c, col);
      ++col;
    }
  return out;
}

}  // namespace csgmm::patches
