#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wswm/rng.hpp"
#include "wswm/synthdata.hpp"

using namespace wswm;

namespace {

std::string temp_path(const char* tag) {
    return (std::filesystem::temp_directory_path() / (std::string("wswm_test_") + tag)).string();
}

// Momentum and kinetic energy straight from a truth block entry.
std::pair<double, double> mom_ke(const VideoDataset& ds, std::int64_t seq, int step) {
    double m1 = ds.radii[seq * 2] * ds.radii[seq * 2];
    double m2 = ds.radii[seq * 2 + 1] * ds.radii[seq * 2 + 1];
    const double* vel = &ds.velocities[(static_cast<std::size_t>(seq) * ds.t + step) * 4];
    double mom = m1 * vel[0] + m2 * vel[2];
    double ke = 0.5 * m1 * vel[0] * vel[0] + 0.5 * m2 * vel[2] * vel[2];
    return {mom, ke};
}

}  // namespace

TEST_SUITE_BEGIN("synthdata");

TEST_CASE("wall reflection mirrors position and flips velocity") {
    double p = 11.0, v = 3.0;
    reflect_position(p, v, 10.0);  // crossed the high wall by 1
    CHECK(p == 9.0);
    CHECK(v == -3.0);
    p = -2.5;
    v = -1.0;
    reflect_position(p, v, 10.0);
    CHECK(p == 2.5);
    CHECK(v == 1.0);
    p = 5.0;
    v = 0.25;
    reflect_position(p, v, 10.0);  // inside: untouched
    CHECK(p == 5.0);
    CHECK(v == 0.25);
}

TEST_CASE("equal-mass head-on collisions swap velocities bit-exactly") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        double m = rng.uniform(0.001, 0.1);
        double v1 = rng.uniform(-0.1, 0.1), v2 = rng.uniform(-0.1, 0.1);
        auto [n1, n2] = elastic_collision(m, m, v1, v2);
        CHECK(n1 == v2);
        CHECK(n2 == v1);
    }
}

TEST_CASE("elastic law conserves momentum and energy for unequal masses") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        double m1 = rng.uniform(0.001, 0.1), m2 = rng.uniform(0.001, 0.1);
        double v1 = rng.uniform(-0.1, 0.1), v2 = rng.uniform(-0.1, 0.1);
        auto [n1, n2] = elastic_collision(m1, m2, v1, v2);
        double mom0 = m1 * v1 + m2 * v2, mom1 = m1 * n1 + m2 * n2;
        double ke0 = 0.5 * (m1 * v1 * v1 + m2 * v2 * v2);
        double ke1 = 0.5 * (m1 * n1 * n1 + m2 * n2 * n2);
        CHECK(std::abs(mom0 - mom1) < 1e-15);
        CHECK(std::abs(ke0 - ke1) < 1e-15);
    }
}

TEST_CASE("sprites: determinism, bounds, and near-static sequences") {
    SpriteConfig cfg;
    cfg.height = 24;
    cfg.width = 24;
    cfg.t = 12;
    cfg.n = 6;
    cfg.seed = 42;
    VideoDataset a = gen_sprites(cfg);
    VideoDataset b = gen_sprites(cfg);
    CHECK(a.frames == b.frames);  // same seed, bit-identical

    cfg.seed = 43;
    VideoDataset c = gen_sprites(cfg);
    CHECK(a.frames != c.frames);

    for (float v : a.frames) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // every frame shows some sprite mass (sprites never leave the canvas)
    for (std::int64_t s = 0; s < a.n; ++s)
        for (int t = 0; t < a.t; ++t) {
            const float* f = a.frame_ptr(s, t);
            double total = 0.0;
            for (std::size_t i = 0; i < a.frame_size(); ++i) total += f[i];
            CHECK(total > 0.0);
        }

    // speeds below half a pixel per whole sequence cannot move the raster
    SpriteConfig still = cfg;
    still.speed_min = 1e-9;
    still.speed_max = 2e-9;
    VideoDataset d = gen_sprites(still);
    for (std::int64_t s = 0; s < d.n; ++s)
        for (int t = 1; t < d.t; ++t)
            for (std::size_t i = 0; i < d.frame_size(); ++i)
                CHECK(d.frame_ptr(s, t)[i] == d.frame_ptr(s, 0)[i]);

    SpriteConfig tiny = cfg;
    tiny.height = 8;  // smaller than a glyph
    CHECK_THROWS_AS(gen_sprites(tiny), DimensionError);
}

TEST_CASE("collision truth conserves momentum and energy at every step") {
    CollisionConfig cfg;
    cfg.n = 50;
    cfg.t = 24;
    cfg.seed = 7;
    VideoDataset ds = gen_collisions(cfg);
    REQUIRE(ds.has_truth);
    for (std::int64_t s = 0; s < ds.n; ++s) {
        auto [mom0, ke0] = mom_ke(ds, s, 0);
        for (int t = 1; t < ds.t; ++t) {
            auto [mom, ke] = mom_ke(ds, s, t);
            CHECK(std::abs(mom - mom0) < 1e-9);
            CHECK(std::abs(ke - ke0) < 1e-9);
        }
    }
}

TEST_CASE("collision sequences start separated and never interpenetrate") {
    CollisionConfig cfg;
    cfg.n = 40;
    cfg.t = 20;
    cfg.seed = 9;
    VideoDataset ds = gen_collisions(cfg);
    bool any_collision = false;
    for (std::int64_t s = 0; s < ds.n; ++s) {
        double r1 = ds.radii[s * 2], r2 = ds.radii[s * 2 + 1];
        const double* v0 = &ds.velocities[static_cast<std::size_t>(s) * ds.t * 4];
        const double* vl = &ds.velocities[(static_cast<std::size_t>(s) * ds.t + ds.t - 1) * 4];
        if (v0[0] != vl[0]) any_collision = true;
        for (int t = 0; t < ds.t; ++t) {
            const double* pos = &ds.positions[(static_cast<std::size_t>(s) * ds.t + t) * 4];
            CHECK(pos[2] - pos[0] >= r1 + r2 - 1e-12);
        }
    }
    CHECK(any_collision);
}

TEST_CASE("ood flag draws radii and speeds from the disjoint ranges") {
    CollisionConfig cfg;
    cfg.n = 30;
    cfg.t = 4;
    cfg.seed = 11;
    cfg.ood = true;
    VideoDataset ds = gen_collisions(cfg);
    for (std::int64_t s = 0; s < ds.n; ++s) {
        CHECK(ds.radii[s * 2] >= cfg.radius_min_ood);
        CHECK(ds.radii[s * 2] <= cfg.radius_max_ood);
        const double* vel = &ds.velocities[static_cast<std::size_t>(s) * ds.t * 4];
        CHECK(std::abs(vel[0]) >= cfg.speed_min_ood);
        CHECK(std::abs(vel[0]) <= cfg.speed_max_ood);
    }
}

TEST_CASE("dataset files round-trip bit-exactly") {
    Rng rng(5);
    // randomized instance on the f32 grid, with truth
    VideoDataset ds;
    ds.n = 3;
    ds.t = 4;
    ds.h = 6;
    ds.w = 5;
    ds.c = 2;
    ds.frames.resize(static_cast<std::size_t>(ds.n) * ds.t * ds.h * ds.w * ds.c);
    for (float& v : ds.frames) v = static_cast<float>(rng.uniform());
    ds.has_truth = true;
    ds.radii.resize(ds.n * 2);
    ds.positions.resize(static_cast<std::size_t>(ds.n) * ds.t * 4);
    ds.velocities.resize(static_cast<std::size_t>(ds.n) * ds.t * 4);
    for (double& v : ds.radii) v = static_cast<float>(rng.uniform(0.01, 0.2));
    for (double& v : ds.positions) v = static_cast<float>(rng.uniform());
    for (double& v : ds.velocities) v = static_cast<float>(rng.uniform(-1.0, 1.0));

    std::string path = temp_path("roundtrip.nvds");
    write_dataset(ds, path);
    VideoDataset back = read_dataset(path);
    CHECK(back.n == ds.n);
    CHECK(back.t == ds.t);
    CHECK(back.h == ds.h);
    CHECK(back.w == ds.w);
    CHECK(back.c == ds.c);
    CHECK(back.frames == ds.frames);
    CHECK(back.has_truth);
    CHECK(back.radii == ds.radii);
    CHECK(back.positions == ds.positions);
    CHECK(back.velocities == ds.velocities);
    std::filesystem::remove(path);
}

TEST_CASE("container errors are distinct: magic, version, truncation") {
    SpriteConfig cfg;
    cfg.height = 16;
    cfg.width = 16;
    cfg.t = 3;
    cfg.n = 2;
    VideoDataset ds = gen_sprites(cfg);
    std::string path = temp_path("corrupt.nvds");
    write_dataset(ds, path);

    auto slurp = [&]() {
        std::ifstream in(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    auto spit = [&](const std::string& buf) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << buf;
    };
    std::string good = slurp();

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    spit(bad_magic);
    CHECK_THROWS_AS(read_dataset(path), FormatError);

    std::string bad_version = good;
    bad_version[4] = 9;
    spit(bad_version);
    CHECK_THROWS_AS(read_dataset(path), VersionError);

    spit(good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(read_dataset(path), TruncationError);

    spit(good + "zz");
    CHECK_THROWS_AS(read_dataset(path), FormatError);

    spit(good);
    CHECK_NOTHROW(read_dataset(path));
    std::filesystem::remove(path);
}

TEST_CASE("raw import wraps a payload and validates its size") {
    Rng rng(6);
    std::string raw = temp_path("payload.f32");
    const int n = 2, t = 3, h = 4, w = 4, c = 1;
    {
        std::ofstream out(raw, std::ios::binary);
        for (int i = 0; i < n * t * h * w * c; ++i) {
            float v = static_cast<float>(rng.uniform());
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    VideoDataset ds = import_raw(raw, n, t, h, w, c);
    CHECK(ds.n == n);
    CHECK(ds.t == t);
    CHECK_FALSE(ds.has_truth);
    CHECK_THROWS_AS(import_raw(raw, n, t, h, w, 3), FormatError);
    std::filesystem::remove(raw);
}

TEST_SUITE_END();
