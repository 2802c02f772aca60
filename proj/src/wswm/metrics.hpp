#pragma once

#include <vector>

#include "inr.hpp"
#include "synthdata.hpp"

namespace wswm {

// Normalized pixel-intensity histogram over [0,1] with equal-width bins.
struct Histogram {
    std::vector<double> counts;   // sums to 1
    std::vector<double> centers;  // bin midpoints
    int bins() const { return static_cast<int>(counts.size()); }
};

Histogram intensity_hist(const Frame& frame, int n_bins = 64);

// Wasserstein-1 via the one-dimensional CDF reduction on bin centers.
double w1(const Histogram& p, const Histogram& q);

// Square-root Jensen-Shannon divergence, natural log. Range [0, sqrt(ln 2)].
double jsd(const Histogram& p, const Histogram& q);

// Bhattacharyya distance; +infinity when the supports are disjoint.
double bhattacharyya(const Histogram& p, const Histogram& q);

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), valid
// positions only; K1=0.01, K2=0.03, dynamic range 1. Channels averaged.
double ssim(const Frame& a, const Frame& b);

// 10*log10(1/MSE) with peak 1; +infinity for identical frames.
double psnr(const Frame& a, const Frame& b);

// Size-normalized Frobenius distance between the prediction's 2D FFT
// magnitude and the magnitude spectrum averaged over the reference frames.
// Defined for single-channel frames only.
double fft_distance(const std::vector<Frame>& gt_frames, const Frame& pred);

// 2D FFT magnitudes of a single-channel frame (row-major h x w).
std::vector<double> fft_magnitude(const Frame& frame);

struct BallTrackEntry {
    double red_x = 0.5, red_y = 0.5;
    double blue_x = 0.5, blue_y = 0.5;
    bool red_valid = false;
    bool blue_valid = false;
};

struct BallTrack {
    std::vector<BallTrackEntry> entries;
};

// Colour-threshold segmentation of one RGB frame. Centroids are mean pixel
// indices divided by W and H. Empty masks come back flagged invalid; they
// are substituted by the caller, not here.
BallTrackEntry extract_positions(const Frame& frame, double tau = 0.8);

// Track a whole sequence, carrying the last valid position over frames where
// a ball is not found.
BallTrack track_sequence(const VideoDataset& ds, std::int64_t seq, double tau = 0.8);

// Ground-truth track of the same sequence from the dataset truth block.
BallTrack truth_track(const VideoDataset& ds, std::int64_t seq);

struct PhysicsErrors {
    double pos = 0.0;
    double mom = 0.0;
    double ke = 0.0;
};

// Time-averaged absolute errors of position, total momentum and total
// kinetic energy versus the truth track. Velocities are finite differences
// with dt = 0.1 and masses are the squared radii.
PhysicsErrors physics_errors(const BallTrack& track, const BallTrack& truth,
                             double radius1, double radius2);

// Convenience view of one stored dataset frame as a double Frame.
Frame dataset_frame(const VideoDataset& ds, std::int64_t seq, int step);

}  // namespace wswm
