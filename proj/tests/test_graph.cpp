#include <doctest.h>

#include <cmath>
#include <functional>

#include "wswm/graph.hpp"
#include "wswm/nn.hpp"
#include "wswm/rng.hpp"

using namespace wswm;

namespace {

// Central finite differences of a scalar loss with respect to one Param.
Mat fd_grad(Param& p, const std::function<double()>& loss, double eps = 1e-6) {
    Mat g(p.value.rows(), p.value.cols());
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
            double keep = p.value(r, c);
            p.value(r, c) = keep + eps;
            double up = loss();
            p.value(r, c) = keep - eps;
            double dn = loss();
            p.value(r, c) = keep;
            g(r, c) = (up - dn) / (2.0 * eps);
        }
    }
    return g;
}

double max_rel_err(const Mat& a, const Mat& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        double denom = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-8});
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / denom);
    }
    return worst;
}

Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal(0.0, scale);
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("matmul forward and both-side gradients match finite differences") {
    Rng rng(1);
    Param a("a", {3, 4}, random_mat(rng, 3, 4));
    Param b("b", {4, 5}, random_mat(rng, 4, 5));
    auto loss = [&]() {
        Graph g;
        Value v = g.mean(g.square(g.matmul(g.param(a), g.param(b))));
        return v.val()(0, 0);
    };
    Graph g;
    Value l = g.mean(g.square(g.matmul(g.param(a), g.param(b))));
    g.backward(l);
    CHECK(max_rel_err(a.grad, fd_grad(a, loss)) < 1e-6);
    CHECK(max_rel_err(b.grad, fd_grad(b, loss)) < 1e-6);
}

TEST_CASE("elementwise and reduction ops pass gradcheck") {
    Rng rng(2);
    Param a("a", {4, 3}, random_mat(rng, 4, 3));
    Param b("b", {4, 3}, random_mat(rng, 4, 3, 0.5));
    // keep divisors away from zero
    b.value = b.value.array().abs() + 0.7;

    auto build = [&](Graph& g) {
        Value va = g.param(a);
        Value vb = g.param(b);
        Value h = g.add(g.mul(va, vb), g.sub(va, g.scale(vb, 0.3)));
        h = g.div(h, vb);
        h = g.add_scalar(g.square(h), 0.1);
        h = g.sqrt_of(h);
        return g.mean(h);
    };
    auto loss = [&]() {
        Graph g;
        return build(g).val()(0, 0);
    };
    Graph g;
    Value l = build(g);
    g.backward(l);
    CHECK(max_rel_err(a.grad, fd_grad(a, loss)) < 1e-5);
    CHECK(max_rel_err(b.grad, fd_grad(b, loss)) < 1e-5);
}

TEST_CASE("activations pass gradcheck") {
    Rng rng(3);
    Param a("a", {5, 4}, random_mat(rng, 5, 4));
    auto build = [&](Graph& g) {
        Value v = g.param(a);
        Value h = g.add(g.relu(v), g.add(g.sigmoid(v), g.add(g.tanh(v), g.gelu(v))));
        return g.sum(g.square(h));
    };
    auto loss = [&]() {
        Graph g;
        return build(g).val()(0, 0);
    };
    Graph g;
    Value l = build(g);
    g.backward(l);
    CHECK(max_rel_err(a.grad, fd_grad(a, loss)) < 1e-5);
}

TEST_CASE("shape ops route gradients correctly") {
    Rng rng(4);
    Param a("a", {3, 8}, random_mat(rng, 3, 8));
    Param r("r", {1, 6}, random_mat(rng, 1, 6));
    auto build = [&](Graph& g) {
        Value v = g.param(a);
        Value left = g.slice_cols(v, 0, 4);
        Value right = g.slice_cols(v, 4, 4);
        Value cat = g.concat_cols({left, g.transpose(g.transpose(right))});
        Value resh = g.reshape(cat, 4, 6);
        Value rows = g.concat_rows({g.slice_rows(resh, 0, 2), g.slice_rows(resh, 2, 2)});
        Value withrow = g.set_row(rows, 1, g.param(r));
        return g.mean(g.square(withrow));
    };
    auto loss = [&]() {
        Graph g;
        return build(g).val()(0, 0);
    };
    Graph g;
    Value l = build(g);
    g.backward(l);
    CHECK(max_rel_err(a.grad, fd_grad(a, loss)) < 1e-6);
    CHECK(max_rel_err(r.grad, fd_grad(r, loss)) < 1e-6);
}

TEST_CASE("detach blocks gradient flow") {
    Rng rng(5);
    Param a("a", {2, 3}, random_mat(rng, 2, 3));
    Graph g;
    Value v = g.param(a);
    Value l = g.mean(g.mul(v, g.detach(g.scale(v, 2.0))));
    g.backward(l);
    // d/dv mean(v * const(2v)) = 2v/6, not 4v/6.
    Mat expect = 2.0 * a.value / 6.0;
    CHECK(max_rel_err(a.grad, expect) < 1e-12);
}

TEST_CASE("conv2d matches a direct convolution loop and passes gradcheck") {
    Rng rng(6);
    const int cin = 2, h = 5, w = 6, k = 3, stride = 2, pad = 1, cout = 3, n = 2;
    Param x("x", {n, cin * h * w}, random_mat(rng, n, cin * h * w));
    Param wt("w", {cout, cin * k * k}, random_mat(rng, cout, cin * k * k, 0.5));
    Param bs("b", {1, cout}, random_mat(rng, 1, cout, 0.2));

    Graph g;
    Value y = g.conv2d(g.param(x), g.param(wt), g.param(bs), cin, h, w, k, stride, pad);
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (w + 2 * pad - k) / stride + 1;
    REQUIRE(y.val().cols() == cout * oh * ow);

    // Independent scalar-loop oracle.
    for (int s = 0; s < n; ++s)
        for (int co = 0; co < cout; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bs.value(0, co);
                    for (int ci = 0; ci < cin; ++ci)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                int iy = oy * stride - pad + ky;
                                int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += x.value(s, (ci * h + iy) * w + ix) *
                                       wt.value(co, (ci * k + ky) * k + kx);
                            }
                    CHECK(y.val()(s, (co * oh + oy) * ow + ox) == doctest::Approx(acc).epsilon(1e-12));
                }

    auto loss = [&]() {
        Graph g2;
        Value y2 = g2.conv2d(g2.param(x), g2.param(wt), g2.param(bs), cin, h, w, k, stride, pad);
        return g2.mean(g2.square(y2)).val()(0, 0);
    };
    Value l = g.mean(g.square(y));
    g.backward(l);
    CHECK(max_rel_err(x.grad, fd_grad(x, loss)) < 1e-5);
    CHECK(max_rel_err(wt.grad, fd_grad(wt, loss)) < 1e-5);
    CHECK(max_rel_err(bs.grad, fd_grad(bs, loss)) < 1e-5);
}

TEST_CASE("fixed-kernel valid convolution gradcheck") {
    Rng rng(7);
    const int h = 7, w = 8, k = 3;
    Param x("x", {2, h * w}, random_mat(rng, 2, h * w));
    Mat kern = random_mat(rng, k, k, 0.3);
    auto loss = [&]() {
        Graph g;
        return g.mean(g.square(g.conv2d_fixed_valid(g.param(x), kern, h, w))).val()(0, 0);
    };
    Graph g;
    Value l = g.mean(g.square(g.conv2d_fixed_valid(g.param(x), kern, h, w)));
    g.backward(l);
    CHECK(max_rel_err(x.grad, fd_grad(x, loss)) < 1e-6);
}

TEST_CASE("causal softmax normalizes rows and ignores the future") {
    Rng rng(8);
    Param s("s", {4, 4}, random_mat(rng, 4, 4));
    Graph g;
    Value a = g.softmax_causal(g.param(s));
    for (int i = 0; i < 4; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < 4; ++j) {
            if (j > i) CHECK(a.val()(i, j) == 0.0);
            rowsum += a.val()(i, j);
        }
        CHECK(rowsum == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto loss = [&]() {
        Graph g2;
        return g2.mean(g2.square(g2.softmax_causal(g2.param(s)))).val()(0, 0);
    };
    Value l = g.mean(g.square(a));
    g.backward(l);
    CHECK(max_rel_err(s.grad, fd_grad(s, loss)) < 1e-5);
}

TEST_CASE("gru, lstm and transformer blocks pass gradcheck") {
    Rng rng(9);
    GruCell gru("gru", 3, 4, rng);
    LstmCell lstm("lstm", 3, 4, rng);
    TransformerBlock blk("blk", 8, 2, 2, rng);
    Param x("x", {2, 3}, random_mat(rng, 2, 3));
    Param tok("tok", {5, 8}, random_mat(rng, 5, 8, 0.5));

    auto build = [&](Graph& g) {
        Value h0 = g.constant(Mat::Zero(2, 4));
        Value c0 = g.constant(Mat::Zero(2, 4));
        Value h1 = gru.step(g, g.param(x), h0);
        auto [h2, c2] = lstm.step(g, g.param(x), h0, c0);
        Value t1 = blk.apply(g, g.param(tok));
        return g.add(g.mean(g.square(h1)), g.add(g.mean(g.square(h2)),
                     g.add(g.mean(g.square(c2)), g.mean(g.square(t1)))));
    };
    auto loss = [&]() {
        Graph g;
        return build(g).val()(0, 0);
    };
    Graph g;
    Value l = build(g);
    g.backward(l);
    CHECK(max_rel_err(x.grad, fd_grad(x, loss)) < 1e-3);

    // spot-check a few parameter tensors end to end; central differences on
    // deep compositions carry ~1e-4 relative noise
    CHECK(max_rel_err(gru.w_hh.grad, fd_grad(gru.w_hh, loss)) < 1e-3);
    CHECK(max_rel_err(lstm.w_ih.grad, fd_grad(lstm.w_ih, loss)) < 1e-3);
    CHECK(max_rel_err(blk.qkv.weight.grad, fd_grad(blk.qkv.weight, loss)) < 1e-3);
    CHECK(max_rel_err(blk.ln1_g.grad, fd_grad(blk.ln1_g, loss)) < 1e-3);
}

TEST_CASE("adam drives a quadratic toward its minimum deterministically") {
    auto run = [&]() {
        Param p("p", {1, 3}, Mat::Constant(1, 3, 2.0));
        Adam opt(0.05);
        std::vector<Param*> ps{&p};
        for (int i = 0; i < 200; ++i) {
            opt.zero_grad(ps);
            Graph g;
            Value v = g.param(p);
            Value l = g.sum(g.square(g.add_scalar(v, -1.0)));
            g.backward(l);
            opt.step(ps);
        }
        return p.value;
    };
    Mat a = run();
    Mat b = run();
    CHECK((a - Mat::Constant(1, 3, 1.0)).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(a == b);  // bit-identical reruns
}

TEST_CASE("separable valid convolution matches the dense kernel") {
    Rng rng(21);
    const int h = 9, w = 12;
    Param xd("xd", {2, h * w}, random_mat(rng, 2, h * w));
    Param xs("xs", {2, h * w}, xd.value);
    Vec k1(3);
    k1 << 0.25, 0.5, 0.25;
    Mat k2 = k1 * k1.transpose();
    Graph gd, gs;
    Value dense = gd.conv2d_fixed_valid(gd.param(xd), k2, h, w);
    Value sep = gs.sepconv_fixed_valid(gs.param(xs), k1, h, w);
    CHECK((dense.val() - sep.val()).cwiseAbs().maxCoeff() < 1e-14);

    // backward agrees with the independently verified dense path
    gd.backward(gd.mean(gd.square(dense)));
    gs.backward(gs.mean(gs.square(sep)));
    CHECK((xd.grad - xs.grad).cwiseAbs().maxCoeff() < 1e-14);

    auto loss = [&]() {
        Graph g2;
        return g2.mean(g2.square(g2.sepconv_fixed_valid(g2.param(xs), k1, h, w))).val()(0, 0);
    };
    CHECK(max_rel_err(xs.grad, fd_grad(xs, loss)) < 1e-4);
}

TEST_SUITE_END();
