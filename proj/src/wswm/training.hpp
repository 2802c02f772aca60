#pragma once

#include <functional>
#include <string>

#include "metrics.hpp"
#include "model.hpp"
#include "synthdata.hpp"

namespace wswm {

enum class TrainPhase { kPhase1 = 1, kPhase2 = 2, kPhase3 = 3, kJoint12 = 12 };

TrainPhase parse_phase(const std::string& s);
std::string phase_name(TrainPhase p);

struct TrainConfig {
    TrainPhase phase = TrainPhase::kJoint12;
    double learning_rate = 1e-3;
    int batch_size = 8;
    int steps = 1000;
    double lambda_ssim = 0.1;
    std::uint64_t seed = 0;
    bool augment_reverse = true;
    bool augment_static = true;
    double reverse_prob = 0.5;
    double static_prob = 0.25;
    int log_every = 25;
    double commitment_weight = 0.25;
    // optional wall-clock cap; <= 0 disables
    double max_seconds = 0.0;
};

// One training sequence as a (T, H*W*C) row-major matrix in [0,1].
Mat sequence_matrix(const VideoDataset& ds, std::int64_t seq);

// Temporal inversion of a sequence matrix.
Mat augment_reverse(const Mat& seq);

// Static boundary padding: keeps the first P = T-2 frames and duplicates the
// first and last of them, so the result has exactly T frames and at least
// two null transitions.
Mat augment_static(const Mat& seq, int t_out);

// Differentiable mean SSIM between two (N, H*W) single-channel image
// batches; matches metrics::ssim (valid 11x11 Gaussian window).
Value ssim_value(Graph& g, Value a, Value b, int h, int w);

// Per-frame reconstruction objective: mean over frames of
// MSE(o, render(zbar + encode(o))) + lambda * (1 - SSIM).
Value loss_phase1(Graph& g, const Mat& seq, ModelState& state, const Mat& embed,
                  double lambda);

// Latent transition objective (IDM + FDM on frozen encodings): the next
// state enters both the IDM and the regression target behind a
// stop-gradient. With `encoder_in_graph` the encoder participates (used by
// the stop-gradient diagnostics); plain phase-2 training precomputes z.
Value loss_phase2(Graph& g, const Mat& seq, ModelState& state, bool encoder_in_graph = false,
                  double commitment_weight = 0.25);

// Action-matching objective: the control model is unrolled with its memory
// contract over IDM pseudo-actions.
Value loss_phase3(Graph& g, const Mat& seq, ModelState& state);

// Joint phases 1+2: per-frame reconstruction plus pixel-space reconstruction
// of the rendered one-step forward prediction.
Value loss_joint12(Graph& g, const Mat& seq, ModelState& state, const Mat& embed,
                   double lambda, double commitment_weight = 0.25);

struct TrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::string loss_log;  // "step<TAB>phase<TAB>loss" lines
    int steps_run = 0;
};

// Adam over shuffled batches with the phase's freezing rules. Appends to
// `state` in place and returns the loss log.
TrainResult train(const TrainConfig& cfg, const VideoDataset& data, ModelState& state,
                  const std::function<void(int, double)>& progress = {});

}  // namespace wswm
