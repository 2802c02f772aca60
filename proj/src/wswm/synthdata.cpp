#include "synthdata.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "rng.hpp"

namespace wswm {

namespace {

constexpr int kGlyph = 9;

std::vector<std::vector<float>> build_glyphs() {
    auto blank = []() { return std::vector<float>(kGlyph * kGlyph, 0.0f); };
    auto at = [](std::vector<float>& g, int y, int x) -> float& { return g[y * kGlyph + x]; };
    std::vector<std::vector<float>> bank;

    auto square = blank();
    for (int y = 1; y < 8; ++y)
        for (int x = 1; x < 8; ++x) at(square, y, x) = 1.0f;
    bank.push_back(square);

    auto bar = blank();
    for (int y = 0; y < kGlyph; ++y)
        for (int x = 3; x < 6; ++x) at(bar, y, x) = 1.0f;
    bank.push_back(bar);

    auto cross = blank();
    for (int i = 0; i < kGlyph; ++i)
        for (int j = 3; j < 6; ++j) {
            at(cross, i, j) = 1.0f;
            at(cross, j, i) = 1.0f;
        }
    bank.push_back(cross);

    auto disc = blank();
    for (int y = 0; y < kGlyph; ++y)
        for (int x = 0; x < kGlyph; ++x)
            if (std::hypot(y - 4.0, x - 4.0) <= 3.6) at(disc, y, x) = 1.0f;
    bank.push_back(disc);

    auto diamond = blank();
    for (int y = 0; y < kGlyph; ++y)
        for (int x = 0; x < kGlyph; ++x)
            if (std::abs(y - 4) + std::abs(x - 4) <= 4) at(diamond, y, x) = 1.0f;
    bank.push_back(diamond);

    auto hshape = blank();
    for (int y = 0; y < kGlyph; ++y) {
        for (int x = 0; x < 3; ++x) at(hshape, y, x) = 1.0f;
        for (int x = 6; x < 9; ++x) at(hshape, y, x) = 1.0f;
    }
    for (int y = 3; y < 6; ++y)
        for (int x = 0; x < kGlyph; ++x) at(hshape, y, x) = 1.0f;
    bank.push_back(hshape);

    return bank;
}

const std::vector<std::vector<float>>& glyphs() {
    static const std::vector<std::vector<float>> bank = build_glyphs();
    return bank;
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void bytes(char* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw TruncationError(path_ + ": truncated payload (need " + std::to_string(n) +
                                  " more bytes at offset " + std::to_string(pos_) + ")");
    }
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

void atomic_write(const std::string& path, const std::string& payload) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open for writing: " + tmp);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw FormatError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

}  // namespace

void reflect_position(double& p, double& v, double hi) {
    while (p < 0.0 || p > hi) {
        if (p < 0.0) {
            p = -p;
            v = -v;
        } else {
            p = 2.0 * hi - p;
            v = -v;
        }
    }
}

std::pair<double, double> elastic_collision(double m1, double m2, double v1, double v2) {
    if (m1 == m2) return {v2, v1};  // exact limit of the law
    double msum = m1 + m2;
    double nv1 = ((m1 - m2) * v1 + 2.0 * m2 * v2) / msum;
    double nv2 = ((m2 - m1) * v2 + 2.0 * m1 * v1) / msum;
    return {nv1, nv2};
}

int glyph_bank_size() { return static_cast<int>(glyphs().size()); }

const std::vector<float>& glyph_bitmap(int kind) { return glyphs().at(kind); }

VideoDataset gen_sprites(const SpriteConfig& cfg) {
    if (cfg.height < kGlyph || cfg.width < kGlyph)
        throw DimensionError("gen_sprites: sprite larger than canvas");
    if (cfg.speed_min <= 0.0 || cfg.speed_max < cfg.speed_min)
        throw ConfigError("gen_sprites: invalid speed range");
    const int kinds = std::min(cfg.glyph_kinds, glyph_bank_size());

    VideoDataset ds;
    ds.n = cfg.n;
    ds.t = cfg.t;
    ds.h = cfg.height;
    ds.w = cfg.width;
    ds.c = 1;
    ds.frames.assign(static_cast<std::size_t>(cfg.n) * cfg.t * cfg.height * cfg.width, 0.0f);

    Rng rng(cfg.seed);
    const double max_y = cfg.height - kGlyph;
    const double max_x = cfg.width - kGlyph;
    for (std::int64_t s = 0; s < cfg.n; ++s) {
        for (int sp = 0; sp < cfg.n_sprites; ++sp) {
            const auto& bmp = glyph_bitmap(static_cast<int>(rng.below(kinds)));
            double py = rng.uniform() * max_y;
            double px = rng.uniform() * max_x;
            double ang = rng.uniform() * 2.0 * 3.14159265358979323846;
            double spd = rng.uniform(cfg.speed_min, cfg.speed_max);
            double vy = spd * std::sin(ang), vx = spd * std::cos(ang);
            for (int step = 0; step < cfg.t; ++step) {
                int iy = static_cast<int>(std::lround(py));
                int ix = static_cast<int>(std::lround(px));
                float* frame = ds.frame_ptr(s, step);
                for (int gy = 0; gy < kGlyph; ++gy)
                    for (int gx = 0; gx < kGlyph; ++gx) {
                        float v = bmp[gy * kGlyph + gx];
                        float& dst = frame[(iy + gy) * cfg.width + (ix + gx)];
                        dst = std::max(dst, v);
                    }
                py += vy;
                px += vx;
                reflect_position(py, vy, max_y);
                reflect_position(px, vx, max_x);
            }
        }
    }
    return ds;
}

VideoDataset gen_collisions(const CollisionConfig& cfg) {
    const double rmin = cfg.ood ? cfg.radius_min_ood : cfg.radius_min;
    const double rmax = cfg.ood ? cfg.radius_max_ood : cfg.radius_max;
    const double smin = cfg.ood ? cfg.speed_min_ood : cfg.speed_min;
    const double smax = cfg.ood ? cfg.speed_max_ood : cfg.speed_max;
    if (rmin <= 0.0 || rmax < rmin || smin <= 0.0 || smax < smin)
        throw ConfigError("gen_collisions: invalid radius/speed ranges");
    if (2.0 * (rmax + rmax) >= 0.9) throw ConfigError("gen_collisions: radii too large for canvas");

    VideoDataset ds;
    ds.n = cfg.n;
    ds.t = cfg.t;
    ds.h = cfg.height;
    ds.w = cfg.width;
    ds.c = 3;
    ds.frames.assign(static_cast<std::size_t>(cfg.n) * cfg.t * cfg.height * cfg.width * 3, 1.0f);
    ds.has_truth = true;
    ds.radii.assign(static_cast<std::size_t>(cfg.n) * 2, 0.0);
    ds.positions.assign(static_cast<std::size_t>(cfg.n) * cfg.t * 4, 0.0);
    ds.velocities.assign(static_cast<std::size_t>(cfg.n) * cfg.t * 4, 0.0);

    Rng rng(cfg.seed);
    const double line_y = 0.5;

    for (std::int64_t s = 0; s < cfg.n; ++s) {
        double r1 = rng.uniform(rmin, rmax);
        double r2 = rng.uniform(rmin, rmax);
        // red ball starts left of blue with clearance, both inside the walls
        double x1, x2;
        do {
            x1 = rng.uniform(r1, 1.0 - r1);
            x2 = rng.uniform(r2, 1.0 - r2);
        } while (x2 - x1 <= r1 + r2 + 0.02);

        auto speed = [&]() {
            double v = rng.uniform(smin, smax);
            return rng.uniform() < 0.5 ? -v : v;
        };
        double v1 = speed(), v2 = speed();
        const double m1 = r1 * r1, m2 = r2 * r2;

        ds.radii[s * 2] = r1;
        ds.radii[s * 2 + 1] = r2;

        for (int step = 0; step < cfg.t; ++step) {
            // record state, then advance one unit of time event by event
            double* pos = &ds.positions[(static_cast<std::size_t>(s) * cfg.t + step) * 4];
            double* vel = &ds.velocities[(static_cast<std::size_t>(s) * cfg.t + step) * 4];
            pos[0] = x1;
            pos[1] = line_y;
            pos[2] = x2;
            pos[3] = line_y;
            vel[0] = v1;
            vel[1] = 0.0;
            vel[2] = v2;
            vel[3] = 0.0;

            float* frame = ds.frame_ptr(s, step);
            auto draw = [&](double cx, double r, int channel) {
                for (int py = 0; py < cfg.height; ++py)
                    for (int px = 0; px < cfg.width; ++px) {
                        double fx = (px + 0.5) / cfg.width;
                        double fy = (py + 0.5) / cfg.height;
                        double dx = fx - cx, dy = fy - line_y;
                        if (dx * dx + dy * dy <= r * r) {
                            float* p = frame + (static_cast<std::size_t>(py) * cfg.width + px) * 3;
                            p[0] = channel == 0 ? 1.0f : 0.0f;
                            p[1] = 0.0f;
                            p[2] = channel == 2 ? 1.0f : 0.0f;
                        }
                    }
            };
            draw(x1, r1, 0);  // red
            draw(x2, r2, 2);  // blue

            // Advance one frame interval. The world is unbounded (balls may
            // leave the camera's unit square); the only event is mutual
            // contact, solved at its exact time so high speeds cannot
            // tunnel. Post-collision velocities separate, so one event per
            // step is possible at most.
            double remaining = 1.0;
            for (int guard = 0; guard < 4 && remaining > 0.0; ++guard) {
                double t_event = remaining;
                bool contact = false;
                if (v1 > v2) {
                    double tc = (x2 - x1 - (r1 + r2)) / (v1 - v2);
                    if (tc >= 0.0 && tc < t_event) {
                        t_event = tc;
                        contact = true;
                    }
                }
                x1 += v1 * t_event;
                x2 += v2 * t_event;
                remaining -= t_event;
                if (contact) std::tie(v1, v2) = elastic_collision(m1, m2, v1, v2);
            }
        }
    }
    return ds;
}

void write_dataset(const VideoDataset& ds, const std::string& path) {
    std::string out;
    out.reserve(16 + ds.frames.size() * 4);
    out += "NVDS";
    put_u16(out, 1);
    out.push_back(static_cast<char>(ds.has_truth ? 1 : 0));
    put_u32(out, static_cast<std::uint32_t>(ds.n));
    put_u16(out, static_cast<std::uint16_t>(ds.t));
    put_u16(out, static_cast<std::uint16_t>(ds.h));
    put_u16(out, static_cast<std::uint16_t>(ds.w));
    out.push_back(static_cast<char>(ds.c));
    for (float v : ds.frames) put_f32(out, v);
    if (ds.has_truth) {
        for (double v : ds.radii) put_f32(out, static_cast<float>(v));
        for (double v : ds.positions) put_f32(out, static_cast<float>(v));
        for (double v : ds.velocities) put_f32(out, static_cast<float>(v));
    }
    atomic_write(path, out);
}

VideoDataset read_dataset(const std::string& path) {
    std::string buf = read_file(path);
    Reader r(buf, path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "NVDS", 4) != 0) throw FormatError(path + ": bad magic (not a dataset file)");
    std::uint16_t version = r.u16();
    if (version != 1)
        throw VersionError(path + ": unsupported dataset version " + std::to_string(version));
    std::uint8_t flags = r.u8();
    VideoDataset ds;
    ds.n = r.u32();
    ds.t = r.u16();
    ds.h = r.u16();
    ds.w = r.u16();
    ds.c = r.u8();
    ds.has_truth = (flags & 1) != 0;
    std::size_t count = static_cast<std::size_t>(ds.n) * ds.t * ds.h * ds.w * ds.c;
    ds.frames.resize(count);
    for (std::size_t i = 0; i < count; ++i) ds.frames[i] = r.f32();
    if (ds.has_truth) {
        ds.radii.resize(static_cast<std::size_t>(ds.n) * 2);
        ds.positions.resize(static_cast<std::size_t>(ds.n) * ds.t * 4);
        ds.velocities.resize(static_cast<std::size_t>(ds.n) * ds.t * 4);
        for (double& v : ds.radii) v = r.f32();
        for (double& v : ds.positions) v = r.f32();
        for (double& v : ds.velocities) v = r.f32();
    }
    if (r.remaining() != 0) throw FormatError(path + ": trailing bytes after payload");
    return ds;
}

VideoDataset import_raw(const std::string& raw_path, std::int64_t n, int t, int h, int w, int c) {
    if (n < 1 || t < 1 || h < 1 || w < 1 || c < 1) throw ConfigError("import_raw: bad dims");
    std::string buf = read_file(raw_path);
    std::size_t want = static_cast<std::size_t>(n) * t * h * w * c * 4;
    if (buf.size() != want)
        throw FormatError(raw_path + ": raw payload is " + std::to_string(buf.size()) +
                          " bytes, dims need " + std::to_string(want));
    VideoDataset ds;
    ds.n = n;
    ds.t = t;
    ds.h = h;
    ds.w = w;
    ds.c = c;
    ds.frames.resize(want / 4);
    Reader r(buf, raw_path);
    for (float& v : ds.frames) v = r.f32();
    return ds;
}

}  // namespace wswm
