#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"

namespace wswm {

// All autodiff math runs in double; matrices are row-major so that flat
// buffers (checkpoints, im2col panels, frame exports) have C layout.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// A learnable tensor. `value` is a 2D view of the data; `dims` keeps the
// semantic shape (e.g. [out,in,k,k] for conv kernels) for serialization.
// Values are kept on the float32 grid after every optimizer update so that
// checkpoints (stored as f32) round-trip without loss.
struct Param {
    std::string name;
    std::vector<int> dims;
    Mat value;
    Mat grad;
    Mat adam_m, adam_v;

    Param() = default;
    Param(std::string n, std::vector<int> d, Mat v)
        : name(std::move(n)), dims(std::move(d)), value(std::move(v)) {
        grad = Mat::Zero(value.rows(), value.cols());
    }

    void zero_grad() { grad.setZero(); }

    // Snap every entry to the nearest float32. Keeps the in-memory state
    // identical to what a save/load cycle would produce.
    void quantize_f32() {
        double* p = value.data();
        for (Eigen::Index i = 0; i < value.size(); ++i) p[i] = static_cast<double>(static_cast<float>(p[i]));
    }
};

class Graph;

// Handle to a node in a Graph. Cheap to copy; invalidated when the graph dies.
struct Value {
    Graph* g = nullptr;
    int id = -1;

    bool valid() const { return g != nullptr && id >= 0; }
    const Mat& val() const;
    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }
};

// Tape-style reverse-mode autodiff over row-major Eigen matrices.
// Nodes are created in topological order; backward() replays the tape in
// reverse. Single-threaded by design: gradient accumulation order is fixed,
// so runs with identical seeds are bit-reproducible.
class Graph {
public:
    struct Node {
        Mat val;
        Mat grad;
        bool need_grad = false;
        Param* param = nullptr;  // set for leaves bound to a Param
        std::function<void(Graph&, Node&)> back;
    };

    // --- leaves ---
    Value param(Param& p);                    // tracked leaf; backward adds into p.grad
    Value constant(Mat m);                    // untracked leaf
    Value constant_view(const Mat& m);        // untracked leaf, copies (kept simple)

    // --- arithmetic ---
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);              // elementwise
    Value div(Value a, Value b);              // elementwise
    Value scale(Value a, double s);
    Value add_scalar(Value a, double s);
    Value matmul(Value a, Value b);
    Value transpose(Value a);
    Value add_rowvec(Value a, Value b);       // b is 1xM, broadcast over rows of a

    // --- nonlinearities ---
    Value relu(Value a);
    Value sigmoid(Value a);
    Value tanh(Value a);
    Value gelu(Value a);
    Value square(Value a);
    Value sqrt_of(Value a);

    // --- shape ---
    Value reshape(Value a, int rows, int cols);
    Value slice_cols(Value a, int col0, int ncols);
    Value slice_rows(Value a, int row0, int nrows);
    Value concat_cols(const std::vector<Value>& parts);
    Value concat_rows(const std::vector<Value>& parts);
    Value set_row(Value a, int row, Value r);  // copy of a with one row replaced
    Value gather_rows(Value a, std::vector<int> rows);

    // --- reductions ---
    Value sum(Value a);                        // 1x1
    Value mean(Value a);                       // 1x1
    Value row_sum(Value a);                    // Nx1
    Value col_mean(Value a);                   // 1xM

    // --- stop gradient ---
    Value detach(Value a);
    // Straight-through: forward takes `forward_value` verbatim, backward
    // passes the incoming gradient to `a` unchanged.
    Value passthrough(Value a, Mat forward_value);

    // --- convolution ---
    // x rows are images with CHW layout. Weight w is (c_out, c_in*k*k),
    // bias is (1, c_out). Same arithmetic as a strided Conv2d with padding p.
    Value conv2d(Value x, Value w, Value b, int c_in, int h, int w_in,
                 int k, int stride, int pad);
    // Correlation with a fixed single-channel kernel, "valid" mode. Used by
    // the SSIM window; gradients flow to x only.
    Value conv2d_fixed_valid(Value x, const Mat& kernel, int h, int w_in);
    // Same contract for a separable kernel outer(col, row); two 1D passes.
    Value sepconv_fixed_valid(Value x, const Vec& k1d, int h, int w_in);

    // Row-wise softmax over the first `row+1` columns of each row `row`
    // (causal attention scores); masked-out columns give exactly zero.
    Value softmax_causal(Value scores);

    // --- custom ops ---
    // Modules may register fat nodes (one node for a whole batched
    // computation) with their own backward closure.
    Value make_node(Mat val, bool need_grad, std::function<void(Graph&, Node&)> back) {
        return make(std::move(val), need_grad, std::move(back));
    }
    bool needs_grad(Value v) { return at(v).need_grad; }
    void add_grad(int id, const Mat& g);

    // --- execution ---
    void backward(Value loss);
    const Mat& value(Value v) const { return nodes_[v.id]->val; }
    const Mat& grad(Value v) const { return nodes_[v.id]->grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    friend struct Value;
    std::vector<std::unique_ptr<Node>> nodes_;

    Value make(Mat val, bool need_grad, std::function<void(Graph&, Node&)> back);
    Node& at(Value v) { return *nodes_[v.id]; }
    void ensure_grad(Node& n) {
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    }
    void add_grad(int id, const Mat& g);
};

inline const Mat& Value::val() const { return g->value(*this); }

}  // namespace wswm
