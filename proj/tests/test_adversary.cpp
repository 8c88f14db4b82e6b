#include <doctest.h>

#include "oracles.hpp"
#include "vmfguard/adversary.hpp"

using namespace vmfguard;

namespace {

const ReferenceModel& trained_model() {
    static const ReferenceModel model = train_reference(generate_synthetic(7, 4, 25, 32, 32), TrainOptions{});
    return model;
}

}  // namespace

TEST_CASE("corner placements") {
    CHECK(corner_placements(224, 224, 22, 4) == std::vector<PixelCoord>{{0, 0}, {0, 202}, {202, 0}, {202, 202}});
    CHECK(corner_placements(10, 12, 3, 1) == std::vector<PixelCoord>{{0, 0}});
    CHECK(corner_placements(10, 12, 3, 2) == std::vector<PixelCoord>{{0, 0}, {0, 9}});
    CHECK(corner_placements(8, 8, 2, 4) == std::vector<PixelCoord>{{0, 0}, {0, 6}, {6, 0}, {6, 6}});
    CHECK_THROWS_AS(corner_placements(8, 8, 2, 5), std::invalid_argument);
    CHECK_THROWS_AS(corner_placements(8, 8, 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(corner_placements(8, 8, 5, 1), std::invalid_argument);
}

TEST_CASE("corner patches never overlap") {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const int h = 2 + rng.index(60), w = 2 + rng.index(60);
        const int side = 1 + rng.index(std::min(h, w) / 2);
        const auto places = corner_placements(h, w, side, 4);
        const Mask mask = build_mask(h, w, side, places);
        CHECK(mask.popcount() == static_cast<std::size_t>(4 * side * side));
    }
}

TEST_CASE("build_mask") {
    const Mask one = build_mask(4, 4, 2, {{0, 0}});
    CHECK(one.popcount() == 4);
    CHECK(one.at(0, 0));
    CHECK(one.at(1, 1));
    CHECK_FALSE(one.at(2, 0));

    const Mask corners = build_mask(3, 3, 1, corner_placements(3, 3, 1, 4));
    CHECK(corners.popcount() == 4);
    CHECK(corners.at(0, 0));
    CHECK(corners.at(0, 2));
    CHECK(corners.at(2, 0));
    CHECK(corners.at(2, 2));
    CHECK_FALSE(corners.at(1, 1));

    CHECK(build_mask(8, 8, 2, corner_placements(8, 8, 2, 4)).popcount() == 16);
    CHECK_THROWS_AS(build_mask(4, 4, 2, {{3, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(build_mask(4, 4, 2, {{0, -1}}), std::invalid_argument);
}

TEST_CASE("apply_patch selects per pixel") {
    Rng rng(2);
    const Image x = oracle::random_image(rng, 6, 6, 3);
    const Image d = oracle::random_image(rng, 6, 6, 3);
    CHECK(apply_patch(x, d, Mask{6, 6, std::vector<std::uint8_t>(36, 0)}) == x);
    CHECK(apply_patch(x, d, Mask{6, 6, std::vector<std::uint8_t>(36, 1)}) == d);

    Mask half{6, 6, std::vector<std::uint8_t>(36, 0)};
    for (int i = 0; i < 36; i += 2) half.data[i] = 1;
    const Image mixed = apply_patch(x, d, half);
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
            const double q = half.at(r, c) ? 1.0 : 0.0;
            for (int ch = 0; ch < 3; ++ch) CHECK(mixed.at(r, c, ch) == (1 - q) * x.at(r, c, ch) + q * d.at(r, c, ch));
        }
    }
    CHECK_THROWS_AS(apply_patch(x, Image(6, 5, 3, 0.0), half), std::invalid_argument);
}

TEST_CASE("attack config validation") {
    AttackConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.patch_side(32, 32) == 3);
    cfg.area_fraction = 0.1;
    CHECK(cfg.patch_side(32, 32) == 10);
    cfg.area_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = AttackConfig{};
    cfg.step = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = AttackConfig{};
    cfg.target_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero model leaves the patch at zero and fails") {
    const ReferenceModel zero(4, 8, 8, 3, 4);
    const Image img(8, 8, 3, 0.5);
    AttackConfig cfg;
    cfg.area_fraction = 0.1;
    cfg.max_iters = 20;
    cfg.target_class = 1;  // argmax of all-zero logits is class 0
    const auto res = train_lavan_corners(img, zero, cfg);
    CHECK_FALSE(res.success);
    for (double v : res.delta.data()) CHECK(v == 0.0);
    CHECK(res.trace.size() == 21);
}

TEST_CASE("attack on the reference model") {
    const auto& model = trained_model();
    const auto data = generate_synthetic(7, 4, 25, 32, 32);
    AttackConfig cfg;
    cfg.area_fraction = 0.1;
    int flipped = 0, tried = 0;
    for (std::size_t i = 0; i < data.items.size(); i += 7) {
        const auto& it = data.items[i];
        cfg.target_class = (it.label + 1) % 4;
        const auto res = train_lavan_corners(it.image, model, cfg);
        ++tried;
        flipped += model.predict(res.adversarial) == cfg.target_class;

        // Initial ascent on the target probability.
        REQUIRE(res.trace.size() >= 4);
        for (int k = 1; k < 4; ++k) CHECK(res.trace[k].target_prob > res.trace[k - 1].target_prob);

        // Support confinement.
        const Mask mask = build_mask(32, 32, res.patch.side, res.patch.placements);
        for (int r = 0; r < 32; ++r) {
            for (int c = 0; c < 32; ++c) {
                if (mask.at(r, c)) continue;
                for (int ch = 0; ch < 3; ++ch) CHECK(res.adversarial.at(r, c, ch) == it.image.at(r, c, ch));
            }
        }
        CHECK(res.success == (res.trace.back().target_prob >= cfg.target_prob));
        REQUIRE(res.patch.contents.size() == 1);
        CHECK(res.patch.contents[0].at(2, 3, 1) == res.delta.at(2, 3, 1));
    }
    CHECK(flipped * 10 >= tried * 8);
}

TEST_CASE("attack is deterministic and the sign switch matters") {
    const auto& model = trained_model();
    const auto img = generate_synthetic(7, 4, 1, 32, 32).items[0].image;
    AttackConfig cfg;
    cfg.area_fraction = 0.05;
    cfg.max_iters = 40;
    cfg.target_class = 2;
    const auto a = train_lavan_corners(img, model, cfg);
    const auto b = train_lavan_corners(img, model, cfg);
    CHECK(encode_ppm(a.adversarial) == encode_ppm(b.adversarial));
    CHECK(a.delta == b.delta);

    AttackConfig literal = cfg;
    literal.literal_sign = true;
    const auto c = train_lavan_corners(img, model, literal);
    CHECK(c.trace.back().target_prob <= c.trace.front().target_prob);
    CHECK(a.trace.back().target_prob > a.trace.front().target_prob);

    AttackConfig pinned = cfg;
    pinned.pin_source = true;
    const auto p = train_lavan_corners(img, model, pinned);
    CHECK(p.source_class == a.source_class);
}

TEST_CASE("attacking toward the current prediction is rejected") {
    const auto& model = trained_model();
    const auto item = generate_synthetic(7, 4, 1, 32, 32).items[1];
    AttackConfig cfg;
    cfg.target_class = model.predict(item.image);
    CHECK_THROWS_AS(train_lavan_corners(item.image, model, cfg), std::invalid_argument);
    cfg.target_class = 9;
    CHECK_THROWS_AS(train_lavan_corners(item.image, model, cfg), std::invalid_argument);
}

TEST_CASE("multi-patch attacks use one mask with independent contents") {
    const auto& model = trained_model();
    const auto item = generate_synthetic(7, 4, 1, 32, 32).items[3];
    AttackConfig cfg;
    cfg.patches = 4;
    cfg.area_fraction = 0.01;
    cfg.max_iters = 30;
    cfg.target_class = (item.label + 2) % 4;
    const auto res = train_lavan_corners(item.image, model, cfg);
    CHECK(res.patch.side == 3);
    CHECK(res.patch.placements == corner_placements(32, 32, 3, 4));
    CHECK(res.patch.contents.size() == 4);
    CHECK(res.patch.contents[0] != res.patch.contents[3]);
}
