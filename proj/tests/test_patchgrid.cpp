#include <doctest.h>

#include "dse/patchgrid.hpp"

using namespace dse;
using patchgrid::CropConfig;

TEST_CASE("layout at canonical constants") {
    SUBCASE("(4,4)") {
        const auto l = patchgrid::layout({4, 4, 336, 14, 4});
        CHECK(l.grid_per_subimage == 24);
        CHECK(l.patches_per_subimage == 576);
        CHECK(l.total_subimages == 17);
        CHECK(l.total_patches == 9792);
        CHECK(l.latent_embeddings == 2448);
    }
    SUBCASE("(1,1)") {
        const auto l = patchgrid::layout({1, 1, 336, 14, 4});
        CHECK(l.total_patches == 1152);
        CHECK(l.latent_embeddings == 288);
    }
}

TEST_CASE("layout at a hand-computed toy config") {
    // (2*3+1) sub-images of (64/8)^2 = 64 patches each
    const auto l = patchgrid::layout({2, 3, 64, 8, 4});
    CHECK(l.patches_per_subimage == 64);
    CHECK(l.total_patches == 448);
    CHECK(l.latent_embeddings == 112);
}

TEST_CASE("layout rejects invalid configs") {
    CHECK_THROWS_AS(patchgrid::layout({1, 1, 336, 13, 4}), ConfigError);
    CHECK_THROWS_AS(patchgrid::layout({0, 1, 336, 14, 4}), ConfigError);
    CHECK_THROWS_AS(patchgrid::layout({1, 1, 16, 8, 3}), ConfigError);
}

TEST_CASE("resize identity and constant preservation") {
    PixelGrid img(64, 64, 1, 0);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) img.at(y, x) = static_cast<std::uint8_t>(y ^ x);
    CHECK(patchgrid::resize(img, 64, 64) == img);

    PixelGrid constant(100, 100, 1, 42);
    const auto small = patchgrid::resize(constant, 50, 50);
    for (auto v : small.data) CHECK(v == 42);
}

TEST_CASE("checkerboard downsample averages to 128 (half-to-even)") {
    PixelGrid board(2, 2, 1, 0);
    board.at(0, 0) = 255;
    board.at(1, 1) = 255;
    const auto px = patchgrid::resize(board, 1, 1);
    CHECK(px.at(0, 0) == 128);  // 127.5 rounds half to even
}

TEST_CASE("crop_and_patch shape matches layout for assorted configs") {
    PixelGrid img(50, 70, 1, 9);
    for (const CropConfig cfg : {CropConfig{1, 1, 64, 8, 4}, CropConfig{2, 3, 64, 8, 4},
                                 CropConfig{3, 2, 32, 8, 2}, CropConfig{2, 2, 48, 16, 3}}) {
        const auto patches = patchgrid::crop_and_patch(img, cfg);
        const auto l = patchgrid::layout(cfg);
        CHECK(patches.rows() == l.total_patches);
        CHECK(patches.cols() == cfg.patch_side * cfg.patch_side);
    }
}

TEST_CASE("constant image yields identical patch vectors") {
    PixelGrid img(90, 90, 1, 200);
    const auto patches = patchgrid::crop_and_patch(img, {2, 2, 64, 8, 4});
    for (Eigen::Index i = 1; i < patches.rows(); ++i)
        CHECK(patches.row(i) == patches.row(0));
    CHECK(patches(0, 0) == doctest::Approx(200.0 / 255));
}

TEST_CASE("toy (1,1) config yields 64 local + 64 global patch vectors") {
    PixelGrid img(64, 64, 1, 0);
    const auto patches = patchgrid::crop_and_patch(img, {1, 1, 64, 8, 4});
    CHECK(patches.rows() == 128);
}

TEST_CASE("single white pixel lights exactly the covering patches") {
    // 128x128 image with (2,2)/base 64: local resize is the identity, so
    // only local sub-image 0 patch 0 and the global crop's patch 0 see ink.
    PixelGrid img(128, 128, 1, 0);
    img.at(0, 0) = 255;
    const CropConfig cfg{2, 2, 64, 8, 4};
    const auto patches = patchgrid::crop_and_patch(img, cfg);
    const int global_first = 4 * 64;  // global crop appended last
    for (Eigen::Index i = 0; i < patches.rows(); ++i) {
        const bool expected_nonzero = (i == 0 || i == global_first);
        CHECK((patches.row(i).cwiseAbs().sum() > 0) == expected_nonzero);
    }
}

TEST_CASE("total patch count grows strictly with cx*cy") {
    int prev = 0;
    for (int c = 1; c <= 4; ++c) {
        const auto l = patchgrid::layout({c, c, 336, 14, 4});
        CHECK(l.total_patches > prev);
        prev = l.total_patches;
    }
}

TEST_CASE("patch vector length always patch_side^2 * channels") {
    PixelGrid rgb(40, 40, 3, 7);
    const auto patches = patchgrid::crop_and_patch(rgb, {1, 1, 32, 8, 4});
    CHECK(patches.cols() == 8 * 8 * 3);
}
