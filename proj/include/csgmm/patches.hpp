#ifndef CSGMM_PATCHES_HPP
#define CSGMM_PATCHES_HPP

#include <Eigen/Dense>
#include <vector>

namespace csgmm::patches {

// Geometry of overlapping patches on an H x W image. The last patch origin
// along each dimension is clamped so the patch fits, which guarantees full
// pixel coverage without synthetic padding.
struct PatchGrid {
  int image_height = 0;
  int image_width = 0;
  int patch_side = 0;
  int stride = 0;
  std::vector<int> origin_rows;  // per-dimension patch origins, ascending
  std::vector<int> origin_cols;
  Eigen::VectorXd overlap_counts;  // length H*W, diagonal of sum_i Ri^T Ri

  int patch_count() const {
    return static_cast<int>(origin_rows.size() * origin_cols.size());
  }
  int patch_dim() const { return patch_side * patch_side; }
  int pixel_count() const { return image_height * image_width; }
};

PatchGrid build_grid(int h, int w, int patch_side, int stride);

// Column i of the result is the vectorized (row-major) patch at origin i,
// patches enumerated row-major over (origin_rows x origin_cols).
Eigen::MatrixXd extract(const PatchGrid& grid, const Eigen::VectorXd& x);

// Exact adjoint of extract: scatter-adds each patch into its footprint.
// No averaging; callers divide by overlap_counts when recomposing.
Eigen::VectorXd aggregate(const PatchGrid& grid, const Eigen::MatrixXd& p);

}  // namespace csgmm::patches

#endif
