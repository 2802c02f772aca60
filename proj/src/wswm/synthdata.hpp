#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace wswm {

// Frame tensor plus optional analytic ground truth for the collision worlds.
// Frames are float32 (the container dtype); truth stays in double so that
// conservation checks are limited only by accumulation error.
struct VideoDataset {
    std::int64_t n = 0;
    int t = 0, h = 0, w = 0, c = 0;
    std::vector<float> frames;  // [n][t][h][w][c]

    bool has_truth = false;
    std::vector<double> radii;       // [n][2]
    std::vector<double> positions;   // [n][t][2 balls][x,y], normalized [0,1]
    std::vector<double> velocities;  // [n][t][2 balls][vx,vy], units per step

    std::size_t frame_size() const { return static_cast<std::size_t>(h) * w * c; }
    const float* frame_ptr(std::int64_t seq, int step) const {
        return frames.data() + (static_cast<std::size_t>(seq) * t + step) * frame_size();
    }
    float* frame_ptr(std::int64_t seq, int step) {
        return frames.data() + (static_cast<std::size_t>(seq) * t + step) * frame_size();
    }
};

// Bouncing-glyph sequences: constant velocity, specular wall reflection,
// overlap without interaction (per-pixel maximum).
struct SpriteConfig {
    int height = 64, width = 64;
    int n_sprites = 2;
    int glyph_kinds = 6;  // capped at the bank size
    double speed_min = 0.5, speed_max = 2.0;
    int t = 20;
    std::int64_t n = 100;
    std::uint64_t seed = 0;
};

// Two discs on a shared horizontal line with exact elastic collisions.
struct CollisionConfig {
    int height = 32, width = 32;
    int t = 16;
    std::int64_t n = 100;
    std::uint64_t seed = 0;
    bool ood = false;
    // normalized units; speeds are units per step
    double radius_min = 0.06, radius_max = 0.10;
    double radius_min_ood = 0.12, radius_max_ood = 0.16;
    double speed_min = 0.01, speed_max = 0.03;
    double speed_min_ood = 0.04, speed_max_ood = 0.06;
};

VideoDataset gen_sprites(const SpriteConfig& cfg);
VideoDataset gen_collisions(const CollisionConfig& cfg);

// Elastic mirror: reflect p into [0, hi], flipping v once per crossing.
void reflect_position(double& p, double& v, double hi);

// One-dimensional elastic collision; equal masses swap velocities exactly.
std::pair<double, double> elastic_collision(double m1, double m2, double v1, double v2);

// Glyph bitmaps used by the sprite generator (9x9, values 0/1).
int glyph_bank_size();
const std::vector<float>& glyph_bitmap(int kind);

// Binary container, little-endian. Layout:
//   "NVDS", u16 version=1, u8 flags (bit0: truth), u32 N, u16 T, u16 H,
//   u16 W, u8 C, frames f32 [seq][t][h][w][c], then optionally
//   f32 radii[2N], f32 positions[N*T*2*2], f32 velocities[N*T*2*2].
// Writes are atomic (temp file + rename).
void write_dataset(const VideoDataset& ds, const std::string& path);
VideoDataset read_dataset(const std::string& path);

// Raw f32 ingest: payload must hold exactly n*t*h*w*c little-endian floats.
VideoDataset import_raw(const std::string& raw_path, std::int64_t n, int t, int h, int w, int c);

}  // namespace wswm
