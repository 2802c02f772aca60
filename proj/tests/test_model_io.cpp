#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "wswm/checkpoint.hpp"
#include "wswm/runconfig.hpp"

using namespace wswm;

namespace {

std::string temp_path(const char* tag) {
    return (std::filesystem::temp_directory_path() / (std::string("wswm_ck_") + tag)).string();
}

ModelSpec small_spec() {
    ModelSpec sp;
    sp.inr.depth = 3;
    sp.inr.width = 6;
    sp.inr.fourier_bands = 3;
    sp.frame_h = 16;
    sp.frame_w = 16;
    sp.frame_c = 1;
    sp.enc_channels = {4, 8};
    sp.idm_width = 12;
    sp.idm_depth = 3;
    sp.fdm_width = 16;
    sp.fdm_depth = 3;
    sp.gcm_hidden = 8;
    sp.gcm_decode_hidden = 8;
    sp.gcm_max_t = 6;
    sp.gcm_blocks = 1;
    sp.gcm_heads = 2;
    return sp;
}

bool params_equal(ModelState& a, ModelState& b) {
    auto pa = a.all_params();
    auto pb = b.all_params();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->name != pb[i]->name) return false;
        if (pa[i]->value != pb[i]->value) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("model_io");

TEST_CASE("checkpoints round-trip every section bit-exactly") {
    for (int trial = 0; trial < 3; ++trial) {
        ModelState st = make_model(small_spec(), 100 + trial);
        st.ensure_encoder(100 + trial);
        st.ensure_dynamics(100 + trial);
        st.ensure_gcm(100 + trial);
        st.ensure_codebook(100 + trial);
        st.meta.phase = 2;
        st.meta.step = 1234;
        std::string path = temp_path("rt.nvck");
        save_checkpoint(st, path);
        ModelState back = load_checkpoint(path);
        CHECK(params_equal(st, back));
        CHECK(back.codebook.has_value());
        CHECK(back.codebook->vectors == st.codebook->vectors);
        CHECK(back.meta.phase == 2);
        CHECK(back.meta.step == 1234);
        CHECK(back.meta.seed == st.meta.seed);
        CHECK(back.spec.enc_channels == st.spec.enc_channels);
        // a second save of the loaded state is byte-identical
        std::string path2 = temp_path("rt2.nvck");
        save_checkpoint(back, path2);
        std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
        std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(b1 == b2);
        std::filesystem::remove(path);
        std::filesystem::remove(path2);
    }
}

TEST_CASE("partial states persist only their components") {
    ModelState st = make_model(small_spec(), 7);
    st.ensure_encoder(7);  // phase-1 style: encoder + base weights only
    std::string path = temp_path("p1.nvck");
    save_checkpoint(st, path);
    ModelState back = load_checkpoint(path);
    CHECK(back.encoder.has_value());
    CHECK_FALSE(back.idm.has_value());
    CHECK_FALSE(back.fdm.has_value());
    CHECK_FALSE(back.gcm.has_value());
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint errors are distinct") {
    ModelState st = make_model(small_spec(), 9);
    st.ensure_encoder(9);
    std::string path = temp_path("err.nvck");
    save_checkpoint(st, path);
    auto slurp = [&]() {
        std::ifstream in(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    auto spit = [&](const std::string& s) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << s;
    };
    std::string good = slurp();

    std::string bad = good;
    bad[0] = 'Z';
    spit(bad);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);

    bad = good;
    bad[4] = 3;  // version
    spit(bad);
    CHECK_THROWS_AS(load_checkpoint(path), VersionError);

    spit(good.substr(0, good.size() - 10));
    CHECK_THROWS_AS(load_checkpoint(path), TruncationError);

    spit(good);
    CHECK_NOTHROW(load_checkpoint(path));
    std::filesystem::remove(path);
}

TEST_CASE("missing parameter sections are reported by name") {
    // hand-build a checkpoint whose config promises an encoder but whose
    // encoder sections are absent: config + zbar only
    ModelState st = make_model(small_spec(), 11);
    st.ensure_encoder(11);
    std::string full_path = temp_path("full.nvck");
    save_checkpoint(st, full_path);

    ModelState bare = make_model(small_spec(), 11);
    std::string bare_path = temp_path("bare.nvck");
    save_checkpoint(bare, bare_path);  // no encoder sections

    // splice: take bare's sections but claim encoder in the config -> build
    // by saving a state whose config lists encoder but strip sections is
    // simpler done via direct text surgery on the config payload
    std::ifstream in(bare_path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::size_t pos = buf.find("components = none");
    REQUIRE(pos != std::string::npos);
    // keep payload length identical: "components = none" has the same length
    // as "components = enco" - unequal, so rebuild properly instead
    (void)pos;

    // simplest honest route: truncate the full checkpoint's last section
    std::ifstream inf(full_path, std::ios::binary);
    std::string fb((std::istreambuf_iterator<char>(inf)), std::istreambuf_iterator<char>());
    inf.close();
    // dropping the final section while keeping the declared count triggers
    // the truncation error instead; decrementing the count yields a missing
    // section. count is u32 at offset 6.
    fb[6] = static_cast<char>(static_cast<unsigned char>(fb[6]) - 1);
    // also cut the last section's bytes: find its name marker
    std::size_t cut = fb.rfind("encoder.proj.bias");
    REQUIRE(cut != std::string::npos);
    fb.resize(cut - 2);  // 2 bytes of name length precede the name
    std::string miss_path = temp_path("miss.nvck");
    std::ofstream out(miss_path, std::ios::binary);
    out << fb;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(miss_path), MissingSectionError);

    std::filesystem::remove(full_path);
    std::filesystem::remove(bare_path);
    std::filesystem::remove(miss_path);
}

TEST_CASE("run configs parse, default, and reject unknown keys") {
    RunConfig cfg = RunConfig::parse("steps = 42\nlearning_rate = 0.5  # comment\n\n# full line\n");
    CHECK(cfg.get_int("steps") == 42);
    CHECK(cfg.get_num("learning_rate") == 0.5);
    CHECK(cfg.get_int("batch_size") == 8);  // documented default
    CHECK(cfg.get_bool("augment_reverse"));
    CHECK(cfg.get_int_list("enc_channels") == std::vector<int>{64, 128, 256, 512});

    CHECK_THROWS_AS(RunConfig::parse("no_such_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("steps 42\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("steps = abc\n").get_int("steps"), ConfigError);
}

TEST_CASE("fresh models draw base weights on the float32 grid") {
    ModelState st = make_model(small_spec(), 3);
    for (Eigen::Index i = 0; i < st.z_base.value.size(); ++i) {
        double v = st.z_base.value(0, i);
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
}

TEST_SUITE_END();
