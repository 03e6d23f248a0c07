#pragma once

#include <vector>

#include <Eigen/Core>

#include "dse/types.hpp"

namespace dse::patchgrid {

// Crop geometry. The canonical constants are (base_side=336, patch_side=14,
// concat_group=4); toy configurations shrink the pixel sides.
struct CropConfig {
    int cx = 1;
    int cy = 1;
    int base_side = 336;
    int patch_side = 14;
    int concat_group = 4;

    void validate() const;
    bool operator==(const CropConfig&) const = default;
};

struct PatchLayout {
    int grid_per_subimage;    // base_side / patch_side
    int patches_per_subimage; // grid^2
    int total_subimages;      // cx*cy + 1, the +1 is the global crop
    int total_patches;        // total_subimages * patches_per_subimage
    int latent_embeddings;    // total_patches / concat_group
};

PatchLayout layout(const CropConfig& config);

// Bilinear resampling with half-pixel centers; quantization rounds
// half to even. Deterministic for identical inputs.
PixelGrid resize(const PixelGrid& image, int target_height, int target_width);

// One flattened patch per row, values scaled to [0,1].
// Row count = layout(config).total_patches; row length =
// patch_side^2 * channels. Ordering: sub-images row-major, patches
// row-major within each sub-image, the global crop's patches last.
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
crop_and_patch(const PixelGrid& image, const CropConfig& config);

}  // namespace dse::patchgrid
