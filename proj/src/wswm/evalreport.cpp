#include "evalreport.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace wswm {

namespace {

double mse_frames(const Frame& a, const Frame& b) {
    if (a.pix.size() != b.pix.size()) throw DimensionError("mse: frame shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pix.size(); ++i) {
        double d = a.pix[i] - b.pix[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.pix.size());
}

Histogram pooled_histogram(const VideoDataset& ds, std::int64_t seq, int bins) {
    Frame pooled;
    pooled.h = ds.h;
    pooled.w = ds.w * ds.t;  // concatenation only feeds the histogram
    pooled.c = ds.c;
    pooled.pix.reserve(static_cast<std::size_t>(ds.t) * ds.frame_size());
    for (int t = 0; t < ds.t; ++t) {
        Frame f = dataset_frame(ds, seq, t);
        pooled.pix.insert(pooled.pix.end(), f.pix.begin(), f.pix.end());
    }
    return intensity_hist(pooled, bins);
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

}  // namespace

std::string evaluate_datasets(const VideoDataset& pred, const VideoDataset& ref,
                              const std::vector<std::string>& metric_names, int hist_bins,
                              double color_tau) {
    if (pred.h != ref.h || pred.w != ref.w || pred.c != ref.c)
        throw DimensionError("evaluate: prediction and reference frame shapes differ");
    if (pred.n != ref.n)
        throw DimensionError("evaluate: sequence counts differ (" + std::to_string(pred.n) + " vs " +
                             std::to_string(ref.n) + ")");

    std::map<std::string, std::vector<double>> columns;
    std::ostringstream rows;

    auto emit = [&](std::int64_t seq, const std::string& name, double value) {
        rows << seq << "\t" << name << "\t" << fmt(value) << "\n";
        columns[name].push_back(value);
    };

    for (std::int64_t s = 0; s < pred.n; ++s) {
        // reference assets shared by several metrics
        std::vector<Frame> ref_frames;
        ref_frames.reserve(ref.t);
        for (int t = 0; t < ref.t; ++t) ref_frames.push_back(dataset_frame(ref, s, t));
        Histogram pooled = pooled_histogram(ref, s, hist_bins);

        for (const std::string& name : metric_names) {
            if (name == "physics") {
                if (!ref.has_truth) throw StateError("evaluate: physics metrics need a truth block");
                if (pred.c != 3) throw StateError("evaluate: physics metrics need RGB predictions");
                BallTrack track = track_sequence(pred, s, color_tau);
                BallTrack truth = truth_track(ref, s);
                int horizon = std::min(pred.t, ref.t);
                track.entries.resize(horizon);
                truth.entries.resize(horizon);
                PhysicsErrors pe = physics_errors(track, truth, ref.radii[s * 2], ref.radii[s * 2 + 1]);
                emit(s, "physics_pos", pe.pos);
                emit(s, "physics_mom", pe.mom);
                emit(s, "physics_ke", pe.ke);
                continue;
            }

            double acc = 0.0;
            for (int t = 0; t < pred.t; ++t) {
                Frame p = dataset_frame(pred, s, t);
                const bool in_horizon = t < ref.t;
                if (name == "mse") {
                    acc += mse_frames(p, in_horizon ? ref_frames[t] : ref_frames[0]);
                } else if (name == "psnr") {
                    acc += psnr(in_horizon ? ref_frames[t] : ref_frames[0], p);
                } else if (name == "ssim") {
                    acc += ssim(in_horizon ? ref_frames[t] : ref_frames[0], p);
                } else if (name == "w1" || name == "jsd" || name == "bhattacharyya") {
                    Histogram hp = intensity_hist(p, hist_bins);
                    Histogram hr = in_horizon ? intensity_hist(ref_frames[t], hist_bins) : pooled;
                    acc += name == "w1" ? w1(hr, hp) : name == "jsd" ? jsd(hr, hp) : bhattacharyya(hr, hp);
                } else if (name == "fft") {
                    acc += fft_distance(ref_frames, p);
                } else {
                    throw ConfigError("evaluate: unknown metric '" + name + "'");
                }
            }
            emit(s, name, acc / pred.t);
        }
    }

    std::ostringstream out;
    out << "seq\tmetric\tvalue\n" << rows.str();
    for (const auto& [name, vals] : columns) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        double stddev = vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) - 1)) : 0.0;
        out << "summary\t" << name << "\t" << fmt(mean) << "\t" << fmt(stddev) << "\n";
    }
    return out.str();
}

}  // namespace wswm
