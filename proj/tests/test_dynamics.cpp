#include <doctest.h>

#include "wswm/dynamics.hpp"

using namespace wswm;

namespace {

Vec random_vec(Rng& rng, int n, double scale = 1.0) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal(0.0, scale);
    return v;
}

}  // namespace

TEST_SUITE_BEGIN("dynamics");

TEST_CASE("inverse dynamics output length follows the action dimension") {
    IdmConfig mnist;
    mnist.state_dim = 961;
    mnist.action_dim = 4;
    Idm idm4(mnist, 1);
    Rng rng(2);
    Vec z1 = random_vec(rng, 961, 0.1), z2 = random_vec(rng, 961, 0.1);
    Vec u = idm4.infer(z1, z2);
    CHECK(u.size() == 4);
    CHECK(idm4.infer(z1, z2) == u);  // deterministic

    IdmConfig wb;
    wb.state_dim = 961;
    wb.action_dim = 16;
    Idm idm16(wb, 1);
    CHECK(idm16.infer(z1, z2).size() == 16);

    Vec wrong = random_vec(rng, 960);
    CHECK_THROWS_AS(idm4.infer(wrong, z2), DimensionError);
}

TEST_CASE("additive forward dynamics separates content and motion exactly") {
    FdmConfig cfg;
    cfg.state_dim = 24;
    cfg.action_dim = 4;
    cfg.hidden_width = 32;
    Fdm fdm(cfg, 3);
    Rng rng(4);
    Vec u1 = random_vec(rng, 4), u2 = random_vec(rng, 4);
    Vec base;
    for (int trial = 0; trial < 10; ++trial) {
        Vec z = random_vec(rng, 24);
        Vec diff = fdm.step(z, u1) - fdm.step(z, u2);
        if (trial == 0)
            base = diff;
        else
            CHECK(diff == base);  // bit-identical across states
    }
    // and symmetrically, state differences are action independent
    Vec z1 = random_vec(rng, 24), z2 = random_vec(rng, 24);
    CHECK(fdm.step(z1, u1) - fdm.step(z2, u1) == fdm.step(z1, u2) - fdm.step(z2, u2));
}

TEST_CASE("additive mode with a zeroed action branch ignores the action") {
    FdmConfig cfg;
    cfg.state_dim = 12;
    cfg.action_dim = 3;
    cfg.hidden_width = 16;
    Fdm fdm(cfg, 5);
    std::vector<Param*> ps;
    fdm.collect(ps);
    for (Param* p : ps)
        if (p->name.rfind("fdm.b", 0) == 0) p->value.setZero();
    Rng rng(6);
    Vec z = random_vec(rng, 12);
    Vec a_out;
    {
        Graph g;
        a_out = fdm.apply_a(g, g.constant(z.transpose())).val().row(0).transpose();
    }
    CHECK(fdm.step(z, random_vec(rng, 3)) == a_out);
    CHECK(fdm.step(z, random_vec(rng, 3)) == a_out);
}

TEST_CASE("joint mode couples state and action") {
    FdmConfig cfg;
    cfg.state_dim = 16;
    cfg.action_dim = 4;
    cfg.mode = FdmMode::kJoint;
    cfg.hidden_width = 32;  // additive reference width for budget matching
    Fdm fdm(cfg, 7);
    Rng rng(8);
    Vec u1 = random_vec(rng, 4), u2 = random_vec(rng, 4);
    Vec z1 = random_vec(rng, 16), z2 = random_vec(rng, 16);
    Vec d1 = fdm.step(z1, u1) - fdm.step(z1, u2);
    Vec d2 = fdm.step(z2, u1) - fdm.step(z2, u2);
    CHECK((d1 - d2).norm() > 1e-9);  // difference-of-differences is state dependent
}

TEST_CASE("joint width matches the additive parameter budget within 5%") {
    for (int dz : {64, 256, 961}) {
        for (int du : {2, 4, 16}) {
            FdmConfig add;
            add.state_dim = dz;
            add.action_dim = du;
            Fdm a(add, 1);
            FdmConfig joint = add;
            joint.mode = FdmMode::kJoint;
            Fdm j(joint, 1);
            double rel = std::abs(static_cast<double>(j.param_count()) - a.param_count()) /
                         static_cast<double>(a.param_count());
            CHECK(rel < 0.05);
        }
    }
}

TEST_CASE("memory initialisation matches the contract") {
    GcmConfig gru;
    gru.kind = GcmKind::kGru;
    gru.state_dim = 8;
    gru.hidden = 256;
    Gcm g1(gru, 1);
    GcmMemory m1 = g1.init_memory();
    CHECK(m1.h.size() == 256);
    CHECK(m1.h.isZero());
    CHECK(m1.cursor == 1);

    GcmConfig lstm = gru;
    lstm.kind = GcmKind::kLstm;
    Gcm g2(lstm, 1);
    GcmMemory m2 = g2.init_memory();
    CHECK(m2.h.isZero());
    CHECK(m2.cell.isZero());

    GcmConfig tf = gru;
    tf.kind = GcmKind::kTransformer;
    tf.hidden = 32;
    tf.heads = 4;
    tf.blocks = 2;
    tf.max_t = 20;
    Gcm g3(tf, 1);
    GcmMemory m3 = g3.init_memory();
    CHECK(m3.buffer.rows() == 20);
    CHECK(m3.buffer.cols() == 32);
    CHECK(m3.buffer.isZero());
    CHECK(m3.cursor == 1);
}

TEST_CASE("transformer decoding ignores buffer rows at and beyond the query step") {
    GcmConfig cfg;
    cfg.kind = GcmKind::kTransformer;
    cfg.state_dim = 12;
    cfg.action_dim = 4;
    cfg.hidden = 32;
    cfg.heads = 4;
    cfg.blocks = 2;
    cfg.max_t = 10;
    Gcm gcm(cfg, 9);
    Rng rng(10);
    GcmMemory m = gcm.init_memory();
    Vec z = random_vec(rng, 12);
    // fill a few rows as if steps 1..3 had been encoded
    for (int t = 1; t <= 3; ++t) {
        Graph g;
        m = gcm.encode(g, m, g.constant(random_vec(rng, 12).transpose()),
                       g.constant(random_vec(rng, 4).transpose()), t);
    }
    Vec u_before;
    {
        Graph g;
        u_before = gcm.decode(g, m, g.constant(z.transpose()), 4).val().row(0).transpose();
    }
    GcmMemory poked = m;
    for (int r = 4; r < cfg.max_t; ++r)
        for (int c = 0; c < cfg.hidden; ++c) poked.buffer(r, c) = rng.normal();
    Vec u_after;
    {
        Graph g;
        u_after = gcm.decode(g, poked, g.constant(z.transpose()), 4).val().row(0).transpose();
    }
    CHECK(u_before == u_after);  // zero-ulp invariance

    Graph g;
    CHECK_THROWS_AS(gcm.decode(g, m, g.constant(z.transpose()), 11), StateError);
    CHECK_THROWS_AS(gcm.decode(g, m, g.constant(z.transpose()), 0), StateError);
}

TEST_CASE("transformer encode writes exactly one row and rejects double writes") {
    GcmConfig cfg;
    cfg.kind = GcmKind::kTransformer;
    cfg.state_dim = 6;
    cfg.action_dim = 2;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.blocks = 1;
    cfg.max_t = 6;
    Gcm gcm(cfg, 11);
    Rng rng(12);
    GcmMemory m = gcm.init_memory();
    Graph g;
    GcmMemory m2 = gcm.encode(g, m, g.constant(random_vec(rng, 6).transpose()),
                              g.constant(random_vec(rng, 2).transpose()), 3);
    for (int r = 0; r < 6; ++r) {
        if (r == 2) continue;
        CHECK(m2.buffer.row(r) == m.buffer.row(r));
    }
    CHECK(!m2.buffer.row(2).isZero());
    CHECK_THROWS_AS(gcm.encode(g, m2, g.constant(random_vec(rng, 6).transpose()),
                               g.constant(random_vec(rng, 2).transpose()), 3),
                    StateError);
}

TEST_CASE("recurrent memory reacts to every input and decodes purely") {
    GcmConfig cfg;
    cfg.kind = GcmKind::kGru;
    cfg.state_dim = 8;
    cfg.action_dim = 3;
    cfg.hidden = 16;
    cfg.decode_hidden = 16;
    Gcm gcm(cfg, 13);
    Rng rng(14);
    Vec z = random_vec(rng, 8), u = random_vec(rng, 3);
    GcmMemory m = gcm.init_memory();
    m.h = random_vec(rng, 16, 0.5);

    auto encode_with = [&](const Vec& mm, const Vec& zz, const Vec& uu) {
        GcmMemory tmp = m;
        tmp.h = mm;
        Graph g;
        return gcm.encode(g, tmp, g.constant(zz.transpose()), g.constant(uu.transpose()), 1).h;
    };
    Vec base = encode_with(m.h, z, u);
    Vec dm = m.h;
    dm(3) += 0.1;
    Vec dz = z;
    dz(0) += 0.1;
    Vec du = u;
    du(1) += 0.1;
    CHECK((encode_with(dm, z, u) - base).norm() > 1e-9);
    CHECK((encode_with(m.h, dz, u) - base).norm() > 1e-9);
    CHECK((encode_with(m.h, z, du) - base).norm() > 1e-9);

    // decode is a pure function of (memory, state)
    Graph g1, g2;
    Vec d1 = gcm.decode(g1, m, g1.constant(z.transpose()), 1).val().row(0).transpose();
    Vec d2 = gcm.decode(g2, m, g2.constant(z.transpose()), 1).val().row(0).transpose();
    CHECK(d1 == d2);
}

TEST_CASE("teacher-forced unroll equals stepwise decode/encode") {
    for (GcmKind kind : {GcmKind::kGru, GcmKind::kLstm, GcmKind::kTransformer}) {
        GcmConfig cfg;
        cfg.kind = kind;
        cfg.state_dim = 7;
        cfg.action_dim = 3;
        cfg.hidden = 16;
        cfg.heads = 2;
        cfg.blocks = 1;
        cfg.max_t = 8;
        cfg.decode_hidden = 12;
        Gcm gcm(cfg, 15);
        Rng rng(16);
        const int t_len = 5;
        Mat z_seq(t_len, 7);
        Mat u_seq(t_len - 1, 3);
        for (Eigen::Index i = 0; i < z_seq.size(); ++i) z_seq.data()[i] = rng.normal(0.0, 0.5);
        for (Eigen::Index i = 0; i < u_seq.size(); ++i) u_seq.data()[i] = rng.normal(0.0, 0.5);

        Graph g;
        Mat preds = gcm.unroll(g, z_seq, g.constant(u_seq)).val();

        GcmMemory m = gcm.init_memory();
        for (int t = 1; t < t_len; ++t) {
            Graph gs;
            Vec u_hat = gcm.decode(gs, m, gs.constant(z_seq.row(t - 1)), t).val().row(0).transpose();
            for (int d = 0; d < 3; ++d)
                CHECK(preds(t - 1, d) == doctest::Approx(u_hat(d)).epsilon(1e-12));
            m = gcm.encode(gs, m, gs.constant(z_seq.row(t - 1)), gs.constant(u_seq.row(t - 1)), t);
        }
    }
}

TEST_CASE("quantization snaps to the nearest row with lowest-index ties") {
    Codebook cb;
    cb.vectors = Mat(3, 2);
    cb.vectors << 0.0, 0.0, 1.0, 1.0, 0.0, 0.0;  // rows 0 and 2 identical
    Vec u(2);
    u << 0.2, 0.2;
    QuantizeResult r = quantize(u, cb);
    CHECK(r.index == 0);
    CHECK(r.quantized == cb.vectors.row(0).transpose());

    Vec exact(2);
    exact << 1.0, 1.0;
    CHECK(quantize(exact, cb).index == 1);
    CHECK(quantize(exact, cb).quantized == cb.vectors.row(1).transpose());

    Codebook empty;
    empty.vectors = Mat(0, 2);
    CHECK_THROWS_AS(quantize(u, empty), StateError);
}

TEST_CASE("straight-through quantization has an identity Jacobian") {
    Codebook cb = Codebook::init(8, 3, 17);
    Rng rng(18);
    Param u("u", {2, 3}, Mat::Zero(2, 3));
    for (Eigen::Index i = 0; i < u.value.size(); ++i) u.value.data()[i] = rng.normal();
    Mat probe(2, 3);
    for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal();

    Graph g;
    Value q = quantize_st(g, g.param(u), cb);
    // forward equals hard quantization bit-exactly
    for (int r = 0; r < 2; ++r) {
        Vec row = u.value.row(r).transpose();
        CHECK(q.val().row(r) == quantize(row, cb).quantized.transpose());
    }
    Value loss = g.sum(g.mul(q, g.constant(probe)));
    g.backward(loss);
    // d(sum(q * probe))/du under the pass-through rule is exactly probe;
    // finite differences see the same as long as no assignment boundary is
    // crossed, so compare against the analytic identity directly
    CHECK(u.grad == probe);
}

TEST_CASE("ema refresh pulls codes toward their assigned actions") {
    Codebook cb = Codebook::init(4, 2, 19);
    Mat u_rows(6, 2);
    u_rows << 1.0, 1.0, 1.1, 0.9, 0.9, 1.1, -1.0, -1.0, -0.9, -1.1, -1.1, -0.9;
    std::vector<int> idx{0, 0, 0, 1, 1, 1};
    Mat before = cb.vectors;
    for (int it = 0; it < 200; ++it) cb.ema_update(u_rows, idx, 0.9);
    CHECK((cb.vectors.row(0) - Eigen::RowVector2d(1.0, 1.0)).norm() < 0.05);
    CHECK((cb.vectors.row(1) - Eigen::RowVector2d(-1.0, -1.0)).norm() < 0.05);
    CHECK((cb.vectors.row(2) - before.row(2)).norm() < 1e-12);  // untouched codes stay put
}

TEST_SUITE_END();
