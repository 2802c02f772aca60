#include <doctest.h>

#include "wswm/encoder.hpp"

using namespace wswm;

TEST_SUITE_BEGIN("encoder");

TEST_CASE("shape arithmetic follows the strided stack") {
    EncoderConfig cfg;
    cfg.out_dim = 961;
    cfg.in_h = 64;
    cfg.in_w = 64;
    cfg.in_c = 1;
    auto [th, tw] = cfg.tail_shape();
    CHECK(th == 4);
    CHECK(tw == 4);
    CHECK(cfg.flat_dim() == 4 * 4 * 512);
}

TEST_CASE("published encoder budget is reproduced exactly") {
    // conv stack 64/128/256/512 on 64x64x1 plus the projection to 961
    EncoderConfig cfg;
    cfg.out_dim = 961;
    cfg.in_h = 64;
    cfg.in_w = 64;
    cfg.in_c = 1;
    Encoder enc(cfg, 0);
    CHECK(enc.param_count() == 9423297);
}

TEST_CASE("encode is deterministic and matches config dimensions") {
    EncoderConfig cfg;
    cfg.conv_channels = {8, 16};
    cfg.out_dim = 33;
    cfg.in_h = 16;
    cfg.in_w = 12;
    cfg.in_c = 1;
    Encoder enc(cfg, 5);
    Rng rng(1);
    Mat frames(3, 16 * 12);
    for (Eigen::Index i = 0; i < frames.size(); ++i) frames.data()[i] = rng.uniform();
    Mat z1 = enc.encode(frames);
    Mat z2 = enc.encode(frames);
    CHECK(z1.rows() == 3);
    CHECK(z1.cols() == 33);
    CHECK(z1 == z2);

    Mat wrong(2, 15 * 12);
    wrong.setZero();
    CHECK_THROWS_AS(enc.encode(wrong), DimensionError);
}

TEST_CASE("init is reproducible from the seed and differs across seeds") {
    EncoderConfig cfg;
    cfg.conv_channels = {4, 8};
    cfg.out_dim = 10;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.in_c = 2;
    Encoder a(cfg, 7), b(cfg, 7), c(cfg, 8);
    std::vector<Param*> pa, pb, pc;
    a.collect(pa);
    b.collect(pb);
    c.collect(pc);
    REQUIRE(pa.size() == pb.size());
    bool all_equal = true, any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->value != pb[i]->value) all_equal = false;
        if (pa[i]->value != pc[i]->value) any_diff = true;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("hwc/chw reorder round-trips") {
    Rng rng(2);
    const int h = 3, w = 4, c = 2;
    Mat frames(2, h * w * c);
    for (Eigen::Index i = 0; i < frames.size(); ++i) frames.data()[i] = rng.uniform();
    Mat chw = hwc_to_chw(frames, h, w, c);
    // spot-check the mapping
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                CHECK(chw(0, (ch * h + y) * w + x) == frames(0, (y * w + x) * c + ch));
}

TEST_SUITE_END();
