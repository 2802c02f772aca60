#pragma once

#include <cstdint>
#include <vector>

#include "graph.hpp"

namespace wswm {

// Coordinate MLP that renders one frame from a flat weight vector.
// depth counts every affine layer including the output head; activation is
// rectified-linear throughout the hidden layers.
struct InrArchitecture {
    int depth = 6;
    int width = 12;
    int out_channels = 1;
    int fourier_bands = 6;
    bool include_raw_coords = true;

    int embed_dim() const { return 4 * fourier_bands + (include_raw_coords ? 2 : 0); }
    void validate() const;
};

// Deterministic weight/bias budget of the MLP described by `arch`.
std::int64_t param_count(const InrArchitecture& arch);

// Per-axis band mask. Band k carries spatial frequency 2^(k-1) cycles per
// unit; it survives only if that stays below the training grid's Nyquist
// limit (resolution/4 cycles per unit).
struct FrequencyMask {
    std::vector<bool> x_keep;
    std::vector<bool> y_keep;

    static FrequencyMask all_pass(int bands);
    int bands() const { return static_cast<int>(x_keep.size()); }
};

FrequencyMask nyquist_mask(int train_h, int train_w, int bands);

// Regular sampling of [-1,1]^2 with spacing 2/rows and 2/cols. The first
// sample sits exactly at -1; the spacing (not the endpoints) is what the
// band-limit arithmetic depends on.
struct CoordinateGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> ys;  // size rows
    std::vector<double> xs;  // size cols

    static CoordinateGrid regular(int rows, int cols);
};

struct Frame {
    int h = 0, w = 0, c = 0;
    std::vector<double> pix;  // [h][w][c]

    double at(int y, int x, int ch) const { return pix[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
    double& at(int y, int x, int ch) { return pix[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

// Embedding of a single coordinate: x band block, y band block, then the raw
// coordinates when enabled. Masked bands are exactly zero.
std::vector<double> fourier_embed(double x, double y, int bands, const FrequencyMask& mask,
                                  bool raw);

// Embedding rows for every grid point, pixel (i,j) at row i*cols+j.
Mat embed_matrix(const CoordinateGrid& grid, int bands, const FrequencyMask& mask, bool raw);

// One layer of the unflattened MLP.
struct InrLayer {
    Mat weight;  // (out, in), row-major
    Vec bias;    // (out)
};

// Flat layout: for each layer in order, the weight matrix (row-major) then
// its bias. This order is frozen; checkpoints depend on it.
std::vector<InrLayer> unflatten(const Vec& weights, const InrArchitecture& arch);
Vec flatten(const std::vector<InrLayer>& layers);

// Analytic render of the weight vector on the grid. Pure, deterministic,
// unclamped; the output resolution follows the grid alone.
Frame render(const Vec& weights, const CoordinateGrid& grid, const InrArchitecture& arch,
             const FrequencyMask& mask);

// Autodiff render used in training: `weights` is a (1, d_z) graph value and
// the result is a (rows*cols, C) value. `embed` must come from embed_matrix
// on the same grid/mask.
Value render_value(Graph& g, Value weights, const Mat& embed, const InrArchitecture& arch);

// Renders one frame per row of `weights` (N, d_z) as a single graph node,
// returning (N * rows*cols, C) stacked frame outputs. Equivalent to N calls
// of render_value; one node keeps large batches cheap.
Value render_batch(Graph& g, Value weights, const Mat& embed, const InrArchitecture& arch);

}  // namespace wswm
