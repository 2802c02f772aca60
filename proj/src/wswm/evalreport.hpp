#pragma once

#include <string>
#include <vector>

#include "metrics.hpp"

namespace wswm {

// Plain-text evaluation table: one "seq<TAB>metric<TAB>value" row per
// sequence and metric, then "summary<TAB>metric<TAB>mean<TAB>std" rows.
// Known metric names: mse, psnr, ssim, w1, jsd, bhattacharyya, fft,
// physics (expands to physics_pos / physics_mom / physics_ke).
//
// Predictions longer than the reference horizon fall back to the paper's
// long-horizon conventions: distributional metrics compare against the
// pooled reference histogram and pixel metrics against the first frame.
std::string evaluate_datasets(const VideoDataset& pred, const VideoDataset& ref,
                              const std::vector<std::string>& metric_names, int hist_bins = 64,
                              double color_tau = 0.8);

}  // namespace wswm
