#include "dse/patchgrid.hpp"

#include <algorithm>
#include <cmath>

namespace dse::patchgrid {

void CropConfig::validate() const {
    if (cx < 1 || cy < 1) throw ConfigError("CropConfig: cx and cy must be >= 1");
    if (base_side < 1 || patch_side < 1)
        throw ConfigError("CropConfig: sides must be >= 1");
    if (base_side % patch_side != 0)
        throw ConfigError("CropConfig: base_side must be divisible by patch_side");
    const int grid = base_side / patch_side;
    if (concat_group < 1 || (grid * grid) % concat_group != 0)
        throw ConfigError("CropConfig: concat_group must divide (base_side/patch_side)^2");
}

PatchLayout layout(const CropConfig& config) {
    config.validate();
    PatchLayout l;
    l.grid_per_subimage = config.base_side / config.patch_side;
    l.patches_per_subimage = l.grid_per_subimage * l.grid_per_subimage;
    l.total_subimages = config.cx * config.cy + 1;
    l.total_patches = l.total_subimages * l.patches_per_subimage;
    l.latent_embeddings = l.total_patches / config.concat_group;
    return l;
}

namespace {

std::uint8_t quantize(double v) {
    // round half to even, clamped to [0,255]
    const double r = std::nearbyint(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

PixelGrid resize(const PixelGrid& image, int target_height, int target_width) {
    if (target_height < 1 || target_width < 1)
        throw ConfigError("resize: target dims must be >= 1");
    if (target_height == image.height && target_width == image.width) return image;

    PixelGrid out(target_height, target_width, image.channels);
    const double sy = static_cast<double>(image.height) / target_height;
    const double sx = static_cast<double>(image.width) / target_width;
    for (int y = 0; y < target_height; ++y) {
        const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                        static_cast<double>(image.height - 1));
        const int y0 = static_cast<int>(src_y);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double fy = src_y - y0;
        for (int x = 0; x < target_width; ++x) {
            const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                            static_cast<double>(image.width - 1));
            const int x0 = static_cast<int>(src_x);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double fx = src_x - x0;
            for (int c = 0; c < image.channels; ++c) {
                const double top = (1 - fx) * image.at(y0, x0, c) + fx * image.at(y0, x1, c);
                const double bot = (1 - fx) * image.at(y1, x0, c) + fx * image.at(y1, x1, c);
                out.at(y, x, c) = quantize((1 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

namespace {

// Appends the patches of one base_side x base_side sub-image, row-major.
void emit_patches(const PixelGrid& sub, const CropConfig& cfg,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                Eigen::RowMajor>& out,
                  int& row) {
    const int grid = cfg.base_side / cfg.patch_side;
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            int col = 0;
            for (int y = 0; y < cfg.patch_side; ++y)
                for (int x = 0; x < cfg.patch_side; ++x)
                    for (int c = 0; c < sub.channels; ++c)
                        out(row, col++) =
                            sub.at(py * cfg.patch_side + y, px * cfg.patch_side + x, c) /
                            Scalar{255};
            ++row;
        }
}

PixelGrid crop_region(const PixelGrid& img, int y0, int x0, int side) {
    PixelGrid out(side, side, img.channels);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

}  // namespace

Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
crop_and_patch(const PixelGrid& image, const CropConfig& config) {
    const PatchLayout l = layout(config);
    const int patch_len = config.patch_side * config.patch_side * image.channels;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
        l.total_patches, patch_len);

    const PixelGrid local =
        resize(image, config.cy * config.base_side, config.cx * config.base_side);
    int row = 0;
    for (int sy = 0; sy < config.cy; ++sy)
        for (int sx = 0; sx < config.cx; ++sx) {
            const PixelGrid sub = crop_region(local, sy * config.base_side,
                                              sx * config.base_side, config.base_side);
            emit_patches(sub, config, out, row);
        }

    const PixelGrid global = resize(image, config.base_side, config.base_side);
    emit_patches(global, config, out, row);
    return out;
}

}  // namespace dse::patchgrid
