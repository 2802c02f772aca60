#include "metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace wswm {

namespace {

void check_same_binning(const Histogram& p, const Histogram& q) {
    if (p.bins() != q.bins()) throw DimensionError("histogram metrics: binning mismatch");
}

void check_same_shape(const Frame& a, const Frame& b, const char* who) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw DimensionError(std::string(who) + ": frame shape mismatch");
}

Mat gaussian_window(int size, double sigma) {
    Mat k(size, size);
    double half = (size - 1) / 2.0;
    double total = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double dy = y - half, dx = x - half;
            k(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            total += k(y, x);
        }
    k /= total;
    return k;
}

}  // namespace

Histogram intensity_hist(const Frame& frame, int n_bins) {
    if (n_bins < 1) throw DimensionError("intensity_hist: n_bins must be >= 1");
    Histogram h;
    h.counts.assign(n_bins, 0.0);
    h.centers.resize(n_bins);
    for (int b = 0; b < n_bins; ++b) h.centers[b] = (b + 0.5) / n_bins;
    for (double v : frame.pix) {
        double x = std::clamp(v, 0.0, 1.0);
        int b = std::min(n_bins - 1, static_cast<int>(x * n_bins));
        h.counts[b] += 1.0;
    }
    double inv = 1.0 / static_cast<double>(frame.pix.size());
    for (double& c : h.counts) c *= inv;
    return h;
}

double w1(const Histogram& p, const Histogram& q) {
    check_same_binning(p, q);
    const int n = p.bins();
    double cum = 0.0, dist = 0.0;
    for (int b = 0; b + 1 < n; ++b) {
        cum += p.counts[b] - q.counts[b];
        dist += std::abs(cum) * (p.centers[b + 1] - p.centers[b]);
    }
    return dist;
}

double jsd(const Histogram& p, const Histogram& q) {
    check_same_binning(p, q);
    double acc = 0.0;
    for (int b = 0; b < p.bins(); ++b) {
        double m = 0.5 * (p.counts[b] + q.counts[b]);
        double tp = p.counts[b] > 0.0 ? 0.5 * p.counts[b] * std::log(p.counts[b] / m) : 0.0;
        double tq = q.counts[b] > 0.0 ? 0.5 * q.counts[b] * std::log(q.counts[b] / m) : 0.0;
        acc += tp + tq;  // per-bin sum first, so the metric is symmetric to the bit
    }
    return std::sqrt(std::max(acc, 0.0));
}

double bhattacharyya(const Histogram& p, const Histogram& q) {
    check_same_binning(p, q);
    double bc = 0.0;
    for (int b = 0; b < p.bins(); ++b) bc += std::sqrt(p.counts[b] * q.counts[b]);
    if (bc <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, -std::log(bc));
}

double ssim(const Frame& a, const Frame& b) {
    check_same_shape(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    if (a.h < kWin || a.w < kWin) throw DimensionError("ssim: frame smaller than the window");
    static const Mat win = gaussian_window(kWin, kSigma);

    const int oh = a.h - kWin + 1, ow = a.w - kWin + 1;
    double total = 0.0;
    for (int ch = 0; ch < a.c; ++ch) {
        double acc = 0.0;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                for (int ky = 0; ky < kWin; ++ky)
                    for (int kx = 0; kx < kWin; ++kx) {
                        double wgt = win(ky, kx);
                        double va = a.at(oy + ky, ox + kx, ch);
                        double vb = b.at(oy + ky, ox + kx, ch);
                        mu_a += wgt * va;
                        mu_b += wgt * vb;
                        aa += wgt * va * va;
                        bb += wgt * vb * vb;
                        ab += wgt * va * vb;
                    }
                double var_a = aa - mu_a * mu_a;
                double var_b = bb - mu_b * mu_b;
                double cov = ab - mu_a * mu_b;
                acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            }
        }
        total += acc / (static_cast<double>(oh) * ow);
    }
    return total / a.c;
}

double psnr(const Frame& a, const Frame& b) {
    check_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.pix.size(); ++i) {
        double d = a.pix[i] - b.pix[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pix.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> fft_magnitude(const Frame& frame) {
    if (frame.c != 1) throw DimensionError("fft_magnitude: single-channel frames only");
    const int h = frame.h, w = frame.w;
    std::vector<fftw_complex> in(static_cast<std::size_t>(h) * w), out(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < in.size(); ++i) {
        in[i][0] = frame.pix[i];
        in[i][1] = 0.0;
    }
    fftw_plan plan = fftw_plan_dft_2d(h, w, in.data(), out.data(), FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    std::vector<double> mag(in.size());
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(out[i][0], out[i][1]);
    return mag;
}

double fft_distance(const std::vector<Frame>& gt_frames, const Frame& pred) {
    if (pred.c != 1) throw DimensionError("fft_distance: single-channel frames only");
    if (gt_frames.empty()) throw DimensionError("fft_distance: empty reference set");
    for (const Frame& f : gt_frames) check_same_shape(f, pred, "fft_distance");

    std::vector<double> ref(static_cast<std::size_t>(pred.h) * pred.w, 0.0);
    for (const Frame& f : gt_frames) {
        std::vector<double> mag = fft_magnitude(f);
        for (std::size_t i = 0; i < ref.size(); ++i) ref[i] += mag[i];
    }
    double inv = 1.0 / static_cast<double>(gt_frames.size());
    std::vector<double> pm = fft_magnitude(pred);
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double d = ref[i] * inv - pm[i];
        acc += d * d;
    }
    return std::sqrt(acc) / (static_cast<double>(pred.h) * pred.w);
}

BallTrackEntry extract_positions(const Frame& frame, double tau) {
    if (frame.c != 3) throw DimensionError("extract_positions: RGB frames only");
    BallTrackEntry e;
    double rsx = 0.0, rsy = 0.0, bsx = 0.0, bsy = 0.0;
    std::int64_t rn = 0, bn = 0;
    for (int y = 0; y < frame.h; ++y)
        for (int x = 0; x < frame.w; ++x) {
            double r = frame.at(y, x, 0), g = frame.at(y, x, 1), b = frame.at(y, x, 2);
            if (r > tau && g < tau && b < tau) {
                rsx += x;
                rsy += y;
                ++rn;
            }
            if (b > tau && r < tau && g < tau) {
                bsx += x;
                bsy += y;
                ++bn;
            }
        }
    if (rn > 0) {
        e.red_x = rsx / rn / frame.w;
        e.red_y = rsy / rn / frame.h;
        e.red_valid = true;
    }
    if (bn > 0) {
        e.blue_x = bsx / bn / frame.w;
        e.blue_y = bsy / bn / frame.h;
        e.blue_valid = true;
    }
    return e;
}

BallTrack track_sequence(const VideoDataset& ds, std::int64_t seq, double tau) {
    BallTrack track;
    BallTrackEntry last;
    bool have_red = false, have_blue = false;
    for (int step = 0; step < ds.t; ++step) {
        BallTrackEntry e = extract_positions(dataset_frame(ds, seq, step), tau);
        if (e.red_valid) {
            last.red_x = e.red_x;
            last.red_y = e.red_y;
            have_red = true;
        } else if (have_red) {
            e.red_x = last.red_x;
            e.red_y = last.red_y;
        }
        if (e.blue_valid) {
            last.blue_x = e.blue_x;
            last.blue_y = e.blue_y;
            have_blue = true;
        } else if (have_blue) {
            e.blue_x = last.blue_x;
            e.blue_y = last.blue_y;
        }
        track.entries.push_back(e);
    }
    return track;
}

BallTrack truth_track(const VideoDataset& ds, std::int64_t seq) {
    if (!ds.has_truth) throw StateError("truth_track: dataset carries no truth block");
    BallTrack track;
    for (int step = 0; step < ds.t; ++step) {
        const double* pos = &ds.positions[(static_cast<std::size_t>(seq) * ds.t + step) * 4];
        BallTrackEntry e;
        e.red_x = pos[0];
        e.red_y = pos[1];
        e.blue_x = pos[2];
        e.blue_y = pos[3];
        e.red_valid = e.blue_valid = true;
        track.entries.push_back(e);
    }
    return track;
}

PhysicsErrors physics_errors(const BallTrack& track, const BallTrack& truth,
                             double radius1, double radius2) {
    if (track.entries.size() != truth.entries.size())
        throw DimensionError("physics_errors: track length mismatch");
    const std::size_t n = track.entries.size();
    const double m1 = radius1 * radius1, m2 = radius2 * radius2;
    constexpr double kDt = 0.1;

    PhysicsErrors out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = track.entries[i];
        const auto& b = truth.entries[i];
        double dr = std::hypot(a.red_x - b.red_x, a.red_y - b.red_y);
        double db = std::hypot(a.blue_x - b.blue_x, a.blue_y - b.blue_y);
        out.pos += 0.5 * (dr + db);
    }
    out.pos /= static_cast<double>(n);

    if (n < 2) return out;
    auto momentum_ke = [&](const BallTrack& tr, std::size_t i, double& mom_x, double& mom_y,
                           double& ke) {
        const auto& cur = tr.entries[i];
        const auto& prev = tr.entries[i - 1];
        double v1x = (cur.red_x - prev.red_x) / kDt, v1y = (cur.red_y - prev.red_y) / kDt;
        double v2x = (cur.blue_x - prev.blue_x) / kDt, v2y = (cur.blue_y - prev.blue_y) / kDt;
        mom_x = m1 * v1x + m2 * v2x;
        mom_y = m1 * v1y + m2 * v2y;
        ke = 0.5 * m1 * (v1x * v1x + v1y * v1y) + 0.5 * m2 * (v2x * v2x + v2y * v2y);
    };
    for (std::size_t i = 1; i < n; ++i) {
        double amx, amy, ake, bmx, bmy, bke;
        momentum_ke(track, i, amx, amy, ake);
        momentum_ke(truth, i, bmx, bmy, bke);
        out.mom += std::hypot(amx - bmx, amy - bmy);
        out.ke += std::abs(ake - bke);
    }
    out.mom /= static_cast<double>(n - 1);
    out.ke /= static_cast<double>(n - 1);
    return out;
}

Frame dataset_frame(const VideoDataset& ds, std::int64_t seq, int step) {
    Frame f;
    f.h = ds.h;
    f.w = ds.w;
    f.c = ds.c;
    const float* src = ds.frame_ptr(seq, step);
    f.pix.assign(src, src + ds.frame_size());
    return f;
}

}  // namespace wswm
