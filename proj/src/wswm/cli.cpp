#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "checkpoint.hpp"
#include "evalreport.hpp"
#include "rollout.hpp"
#include "runconfig.hpp"
#include "training.hpp"

namespace wswm {

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << text;
}

ModelSpec spec_from_config(const RunConfig& cfg, int frame_h, int frame_w, int frame_c) {
    ModelSpec sp;
    sp.inr.depth = static_cast<int>(cfg.get_int("inr_depth"));
    sp.inr.width = static_cast<int>(cfg.get_int("inr_width"));
    sp.inr.fourier_bands = static_cast<int>(cfg.get_int("inr_bands"));
    sp.inr.include_raw_coords = cfg.get_bool("inr_raw_coords");
    sp.inr.out_channels = frame_c;
    sp.action_dim = static_cast<int>(cfg.get_int("action_dim"));
    sp.frame_h = frame_h;
    sp.frame_w = frame_w;
    sp.frame_c = frame_c;
    sp.enc_channels = cfg.get_int_list("enc_channels");
    sp.enc_kernel = static_cast<int>(cfg.get_int("enc_kernel"));
    sp.enc_stride = static_cast<int>(cfg.get_int("enc_stride"));
    sp.enc_proj_scale = cfg.get_num("enc_proj_scale");
    sp.idm_width = static_cast<int>(cfg.get_int("idm_width"));
    sp.idm_depth = static_cast<int>(cfg.get_int("idm_depth"));
    sp.idm_out_scale = cfg.get_num("idm_out_scale");
    sp.fdm_mode = cfg.get_str("fdm_mode") == "joint" ? FdmMode::kJoint : FdmMode::kAdditive;
    if (cfg.get_str("fdm_mode") != "joint" && cfg.get_str("fdm_mode") != "additive")
        throw ConfigError("fdm_mode must be additive or joint");
    sp.fdm_width = static_cast<int>(cfg.get_int("fdm_width"));
    sp.fdm_depth = static_cast<int>(cfg.get_int("fdm_depth"));
    sp.fdm_out_scale = cfg.get_num("fdm_out_scale");
    std::string kind = cfg.get_str("gcm_kind");
    if (kind == "gru")
        sp.gcm_kind = GcmKind::kGru;
    else if (kind == "lstm")
        sp.gcm_kind = GcmKind::kLstm;
    else if (kind == "transformer")
        sp.gcm_kind = GcmKind::kTransformer;
    else
        throw ConfigError("gcm_kind must be gru, lstm or transformer");
    sp.gcm_hidden = static_cast<int>(cfg.get_int("gcm_hidden"));
    sp.gcm_blocks = static_cast<int>(cfg.get_int("gcm_blocks"));
    sp.gcm_heads = static_cast<int>(cfg.get_int("gcm_heads"));
    sp.gcm_mlp_ratio = static_cast<int>(cfg.get_int("gcm_mlp_ratio"));
    sp.gcm_max_t = static_cast<int>(cfg.get_int("gcm_max_t"));
    sp.gcm_decode_hidden = static_cast<int>(cfg.get_int("gcm_decode_hidden"));
    sp.use_codebook = cfg.get_bool("use_codebook");
    sp.codebook_size = static_cast<int>(cfg.get_int("codebook_size"));
    return sp;
}

int cmd_data_gen(const std::string& kind, const std::string& config_path, const std::string& out) {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);
    VideoDataset ds;
    if (kind == "sprites") {
        SpriteConfig sc;
        sc.height = static_cast<int>(cfg.get_int("data_h"));
        sc.width = static_cast<int>(cfg.get_int("data_w"));
        sc.t = static_cast<int>(cfg.get_int("data_t"));
        sc.n = cfg.get_int("data_n");
        sc.n_sprites = static_cast<int>(cfg.get_int("n_sprites"));
        sc.glyph_kinds = static_cast<int>(cfg.get_int("glyph_kinds"));
        sc.speed_min = cfg.get_num("speed_min");
        sc.speed_max = cfg.get_num("speed_max");
        sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
        ds = gen_sprites(sc);
    } else if (kind == "collisions") {
        CollisionConfig cc;
        cc.height = static_cast<int>(cfg.get_int("data_h"));
        cc.width = static_cast<int>(cfg.get_int("data_w"));
        cc.t = static_cast<int>(cfg.get_int("data_t"));
        cc.n = cfg.get_int("data_n");
        cc.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
        cc.ood = cfg.get_bool("ood");
        cc.radius_min = cfg.get_num("radius_min");
        cc.radius_max = cfg.get_num("radius_max");
        cc.radius_min_ood = cfg.get_num("radius_min_ood");
        cc.radius_max_ood = cfg.get_num("radius_max_ood");
        cc.speed_min = cfg.get_num("speed_min");
        cc.speed_max = cfg.get_num("speed_max");
        cc.speed_min_ood = cfg.get_num("speed_min_ood");
        cc.speed_max_ood = cfg.get_num("speed_max_ood");
        ds = gen_collisions(cc);
    } else {
        std::cerr << "unknown --kind: " << kind << " (expected sprites or collisions)\n";
        return 1;
    }
    write_dataset(ds, out);
    std::cout << "wrote " << ds.n << " sequences (" << ds.t << "x" << ds.h << "x" << ds.w << "x"
              << ds.c << ") to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& phase_str, const std::string& config_path,
              const std::string& data_path, const std::string& init_path, const std::string& out) {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults() : RunConfig::load(config_path);
    VideoDataset data = read_dataset(data_path);

    ModelState state = [&]() {
        if (!init_path.empty()) return load_checkpoint(init_path);
        ModelSpec sp = spec_from_config(cfg, data.h, data.w, data.c);
        return make_model(sp, static_cast<std::uint64_t>(cfg.get_int("seed")));
    }();

    TrainConfig tc;
    tc.phase = parse_phase(phase_str);
    tc.learning_rate = cfg.get_num("learning_rate");
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size"));
    tc.steps = static_cast<int>(cfg.get_int("steps"));
    tc.lambda_ssim = cfg.get_num("lambda_ssim");
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    tc.augment_reverse = cfg.get_bool("augment_reverse");
    tc.augment_static = cfg.get_bool("augment_static");
    tc.reverse_prob = cfg.get_num("reverse_prob");
    tc.static_prob = cfg.get_num("static_prob");
    tc.log_every = static_cast<int>(cfg.get_int("log_every"));
    tc.commitment_weight = cfg.get_num("commitment_weight");

    TrainResult result = train(tc, data, state, [](int step, double loss) {
        std::cout << "step " << step << " loss " << loss << "\n";
    });
    if (!std::isfinite(result.final_loss)) {
        std::cerr << "training diverged: non-finite loss\n";
        return 3;
    }
    save_checkpoint(state, out);
    write_text(out + ".log", result.loss_log);
    std::cout << "phase " << phase_str << ": loss " << result.initial_loss << " -> "
              << result.final_loss << " over " << result.steps_run << " steps\n";
    std::cout << "checkpoint " << out << " (+ .log)\n";
    return 0;
}

int cmd_rollout(const std::string& ckpt, const std::string& data_path, double rho, int steps,
                const std::string& out, std::int64_t limit) {
    ModelState state = load_checkpoint(ckpt);
    VideoDataset data = read_dataset(data_path);
    RolloutConfig rc;
    rc.t_inf = steps;
    rc.rho = rho;
    CoordinateGrid grid = CoordinateGrid::regular(state.spec.frame_h, state.spec.frame_w);
    std::int64_t n = limit > 0 ? std::min<std::int64_t>(limit, data.n) : data.n;
    std::vector<RolloutTrace> traces;
    std::ostringstream tables;
    for (std::int64_t s = 0; s < n; ++s) {
        traces.push_back(generate(data, s, rc, state, grid));
        tables << "# sequence " << s << "\n" << trace_table(traces.back());
    }
    write_dataset(trace_to_dataset(traces), out);
    write_text(out + ".actions.txt", tables.str());
    std::cout << "rolled out " << n << " sequences for " << steps << " steps to " << out << "\n";
    return 0;
}

int cmd_retarget(const std::string& ckpt, const std::string& data_path, double rho, int steps,
                 const std::string& intervene_at, std::int64_t alien_seq, const std::string& mode,
                 const std::string& out, std::int64_t limit) {
    if (mode != "content" && mode != "motion" && mode != "both") {
        std::cerr << "--mode must be content, motion or both\n";
        return 1;
    }
    ModelState state = load_checkpoint(ckpt);
    VideoDataset data = read_dataset(data_path);
    if (alien_seq < 0 || alien_seq >= data.n) throw StateError("retarget: --alien-seq out of range");

    Intervention iv;
    if (!intervene_at.empty()) {
        std::istringstream in(intervene_at);
        std::string item;
        while (std::getline(in, item, ',')) iv.steps.insert(std::stoi(item));
    }

    // Alien material from the chosen sequence: encoded frames for content,
    // inverse-dynamics actions for motion, clamped to its horizon.
    auto encode_frame = [&](int t) {
        Mat frame(1, static_cast<Eigen::Index>(data.frame_size()));
        const float* src = data.frame_ptr(alien_seq, std::min(t, data.t - 1));
        for (std::size_t i = 0; i < data.frame_size(); ++i)
            frame(0, static_cast<Eigen::Index>(i)) = src[i];
        return state.encoder->encode(frame).row(0).transpose();
    };
    for (int t : iv.steps) {
        if (mode == "content" || mode == "both") iv.alien_states[t] = encode_frame(t - 1);
        if (mode == "motion" || mode == "both") {
            Vec z_a = encode_frame(t - 1);
            Vec z_b = encode_frame(t);
            iv.alien_actions[t] = state.idm->infer(z_a, z_b);
        }
    }

    RolloutConfig rc;
    rc.t_inf = steps;
    rc.rho = rho;
    CoordinateGrid grid = CoordinateGrid::regular(state.spec.frame_h, state.spec.frame_w);
    std::int64_t n = limit > 0 ? std::min<std::int64_t>(limit, data.n) : data.n;
    std::vector<RolloutTrace> traces;
    std::ostringstream tables;
    for (std::int64_t s = 0; s < n; ++s) {
        traces.push_back(retarget(data, s, rc, state, grid, iv));
        tables << "# sequence " << s << "\n" << trace_table(traces.back());
    }
    write_dataset(trace_to_dataset(traces), out);
    write_text(out + ".actions.txt", tables.str());
    std::cout << "retargeted " << n << " sequences (" << mode << ") to " << out << "\n";
    return 0;
}

int cmd_superres(const std::string& ckpt, const std::string& data_path, double scale, bool no_mask,
                 const std::string& out, std::int64_t limit) {
    ModelState state = load_checkpoint(ckpt);
    if (!state.encoder) throw MissingSectionError(ckpt + ": checkpoint has no encoder");
    VideoDataset data = read_dataset(data_path);
    std::int64_t n = limit > 0 ? std::min<std::int64_t>(limit, data.n) : data.n;
    std::vector<RolloutTrace> traces;
    for (std::int64_t s = 0; s < n; ++s) {
        std::vector<Vec> latents;
        for (int t = 0; t < data.t; ++t) {
            Mat frame(1, static_cast<Eigen::Index>(data.frame_size()));
            const float* src = data.frame_ptr(s, t);
            for (std::size_t i = 0; i < data.frame_size(); ++i)
                frame(0, static_cast<Eigen::Index>(i)) = src[i];
            latents.push_back(state.encoder->encode(frame).row(0).transpose());
        }
        RolloutTrace tr;
        tr.frames = superresolve(latents, state, scale, !no_mask);
        traces.push_back(std::move(tr));
    }
    write_dataset(trace_to_dataset(traces), out);
    const Frame& f = traces[0].frames[0];
    std::cout << "rendered " << n << " sequences at " << f.h << "x" << f.w
              << (no_mask ? " (unmasked)" : " (band-masked)") << " to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& ref_path, const std::string& metrics,
             const std::string& out) {
    VideoDataset pred = read_dataset(pred_path);
    VideoDataset ref = read_dataset(ref_path);
    std::vector<std::string> names;
    std::istringstream in(metrics);
    std::string item;
    while (std::getline(in, item, ',')) names.push_back(item);
    if (names.empty()) {
        std::cerr << "--metrics needs at least one name\n";
        return 1;
    }
    std::string report = evaluate_datasets(pred, ref, names);
    write_text(out, report);
    std::cout << report;
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"weight-space world model"};
    app.require_subcommand(1);

    // data gen / data import
    auto* data = app.add_subcommand("data", "dataset generation and ingest");
    data->require_subcommand(1);
    auto* gen = data->add_subcommand("gen", "generate a synthetic dataset");
    std::string gen_kind, gen_config, gen_out;
    gen->add_option("--kind", gen_kind, "sprites|collisions")->required();
    gen->add_option("--config", gen_config, "key=value config file");
    gen->add_option("--out", gen_out, "output dataset path")->required();
    auto* imp = data->add_subcommand("import", "wrap raw f32 frames into a dataset");
    std::string imp_raw, imp_dims, imp_out;
    imp->add_option("--raw", imp_raw, "raw little-endian f32 payload")->required();
    imp->add_option("--dims", imp_dims, "N,T,H,W,C")->required();
    imp->add_option("--out", imp_out, "output dataset path")->required();

    auto* tr = app.add_subcommand("train", "run one training phase");
    std::string tr_phase, tr_config, tr_data, tr_init, tr_out;
    tr->add_option("--phase", tr_phase, "1|2|3|joint12")->required();
    tr->add_option("--config", tr_config, "key=value config file");
    tr->add_option("--data", tr_data, "training dataset")->required();
    tr->add_option("--init", tr_init, "checkpoint to continue from");
    tr->add_option("--out", tr_out, "output checkpoint")->required();

    auto* ro = app.add_subcommand("rollout", "context-conditioned generation");
    std::string ro_ckpt, ro_data, ro_out;
    double ro_rho = 0.0;
    int ro_steps = 20;
    std::int64_t ro_limit = 0;
    ro->add_option("--ckpt", ro_ckpt)->required();
    ro->add_option("--data", ro_data, "reference dataset")->required();
    ro->add_option("--context-ratio", ro_rho, "rho in [0,1]");
    ro->add_option("--steps", ro_steps, "inference steps");
    ro->add_option("--limit", ro_limit, "only the first N sequences");
    ro->add_option("--out", ro_out)->required();

    auto* rt = app.add_subcommand("retarget", "content/motion interventions");
    std::string rt_ckpt, rt_data, rt_at, rt_mode = "content", rt_out;
    double rt_rho = 0.0;
    int rt_steps = 20;
    std::int64_t rt_alien = 0, rt_limit = 0;
    rt->add_option("--ckpt", rt_ckpt)->required();
    rt->add_option("--data", rt_data)->required();
    rt->add_option("--intervene-at", rt_at, "comma-separated step list");
    rt->add_option("--alien-seq", rt_alien, "sequence supplying alien states/actions");
    rt->add_option("--mode", rt_mode, "content|motion|both");
    rt->add_option("--context-ratio", rt_rho);
    rt->add_option("--steps", rt_steps);
    rt->add_option("--limit", rt_limit);
    rt->add_option("--out", rt_out)->required();

    auto* sr = app.add_subcommand("superres", "zero-shot re-rendering at another scale");
    std::string sr_ckpt, sr_data, sr_out;
    double sr_scale = 1.0;
    bool sr_no_mask = false;
    std::int64_t sr_limit = 0;
    sr->add_option("--ckpt", sr_ckpt)->required();
    sr->add_option("--data", sr_data)->required();
    sr->add_option("--scale", sr_scale, "grid scale factor");
    sr->add_flag("--no-mask", sr_no_mask, "skip the band-limit mask");
    sr->add_option("--limit", sr_limit);
    sr->add_option("--out", sr_out)->required();

    auto* ev = app.add_subcommand("eval", "metric report for predictions");
    std::string ev_pred, ev_ref, ev_metrics, ev_out;
    ev->add_option("--pred", ev_pred)->required();
    ev->add_option("--ref", ev_ref)->required();
    ev->add_option("--metrics", ev_metrics, "comma list: mse,psnr,ssim,w1,jsd,bhattacharyya,fft,physics")
        ->required();
    ev->add_option("--out", ev_out)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_data_gen(gen_kind, gen_config, gen_out);
        if (imp->parsed()) {
            std::istringstream in(imp_dims);
            std::vector<std::int64_t> dims;
            std::string item;
            while (std::getline(in, item, ',')) dims.push_back(std::stoll(item));
            if (dims.size() != 5) {
                std::cerr << "--dims must be N,T,H,W,C\n";
                return 1;
            }
            VideoDataset ds = import_raw(imp_raw, dims[0], static_cast<int>(dims[1]),
                                         static_cast<int>(dims[2]), static_cast<int>(dims[3]),
                                         static_cast<int>(dims[4]));
            write_dataset(ds, imp_out);
            std::cout << "imported " << ds.n << " sequences to " << imp_out << "\n";
            return 0;
        }
        if (tr->parsed()) return cmd_train(tr_phase, tr_config, tr_data, tr_init, tr_out);
        if (ro->parsed()) return cmd_rollout(ro_ckpt, ro_data, ro_rho, ro_steps, ro_out, ro_limit);
        if (rt->parsed())
            return cmd_retarget(rt_ckpt, rt_data, rt_rho, rt_steps, rt_at, rt_alien, rt_mode, rt_out,
                                rt_limit);
        if (sr->parsed()) return cmd_superres(sr_ckpt, sr_data, sr_scale, sr_no_mask, sr_out, sr_limit);
        if (ev->parsed()) return cmd_eval(ev_pred, ev_ref, ev_metrics, ev_out);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const StateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

}  // namespace wswm
