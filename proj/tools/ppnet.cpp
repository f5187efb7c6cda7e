#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ppnet/config_json.hpp"
#include "ppnet/metrics.hpp"
#include "ppnet/train.hpp"

namespace fs = std::filesystem;
using namespace ppnet;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write '" + file.string() + "'");
    out << text;
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

std::string frame_name(const char* prefix, size_t i, size_t channels) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%06zu.%s", prefix, i, channels == 3 ? "ppm" : "pgm");
    return buf;
}

SequenceSet synthetic_from(const TrainConfig& cfg, uint64_t seed, size_t count) {
    return gen_moving_shapes(seed, count, static_cast<size_t>(cfg.seq_len),
                             static_cast<size_t>(cfg.net.height),
                             static_cast<size_t>(cfg.net.width),
                             static_cast<size_t>(cfg.num_shapes), cfg.speed_min, cfg.speed_max);
}

SequenceSet load_training_data(const TrainConfig& cfg, const std::string& data) {
    if (data == "synthetic")
        return synthetic_from(cfg, cfg.seed, static_cast<size_t>(cfg.num_sequences));
    return load_frame_dir(fs::path(data), std::nullopt,
                          {static_cast<size_t>(cfg.net.height), static_cast<size_t>(cfg.net.width)},
                          static_cast<size_t>(cfg.seq_len), static_cast<size_t>(cfg.seq_len));
}

// (1,C,H,W) <-> (C,H,W)
TensorF unsqueeze(const TensorF& f) {
    return TensorF({1, f.dim(0), f.dim(1), f.dim(2)}, f.data);
}
TensorF squeeze(const TensorF& f) {
    return TensorF({f.dim(1), f.dim(2), f.dim(3)}, f.data);
}

int cmd_train(const std::string& config_file, const std::string& data, const std::string& out,
              const std::string& resume_file) {
    const TrainConfig cfg = load_train_config(config_file);
    const fs::path dir = ensure_out_dir(out);
    const SequenceSet ds = load_training_data(cfg, data);

    std::optional<Checkpoint> resume;
    if (!resume_file.empty()) resume = Checkpoint::load(resume_file);

    const fs::path ckpt = dir / "checkpoint.ppnc";
    TrainResult res;
    try {
        res = train(cfg, ds, ckpt, std::move(resume));
    } catch (const NumericError&) {
        // last-good checkpoint already written by train()
        RunManifest{"train", train_config_to_json(cfg), cfg.seed,
                    {"checkpoint.ppnc"}, kVersion}
            .write(dir / "manifest.json");
        throw;
    }
    write_text(dir / "train_log.csv", train_log_csv(res.log));
    RunManifest{"train", train_config_to_json(cfg), cfg.seed,
                {"checkpoint.ppnc", "train_log.csv"}, kVersion}
        .write(dir / "manifest.json");
    std::cout << "trained " << res.final_step << " steps; final loss "
              << (res.log.empty() ? 0.0 : res.log.back().loss) << "\n";
    return 0;
}

int cmd_predict(const std::string& ckpt_file, const std::string& config_file,
                const std::string& context_dir, int horizon, const std::string& out) {
    if (horizon < 1) throw ConfigError("--horizon must be >= 1");
    const TrainConfig cfg = load_train_config(config_file);
    const Checkpoint ck = Checkpoint::load(ckpt_file);

    PPNet<float> model(cfg.net);
    model.init(cfg.seed);
    Adam opt(model.params());
    restore_checkpoint(ck, model, opt, config_fingerprint(cfg));

    const std::vector<TensorF> frames = load_frames(context_dir);
    if (frames.size() < 2) throw ConfigError("--context must contain at least 2 frames");
    std::vector<TensorF> context;
    for (const auto& f : frames) context.push_back(unsqueeze(f));

    const std::vector<TensorF> preds = model.rollout(context, horizon);
    const fs::path dir = ensure_out_dir(out);
    std::vector<std::string> artifacts;
    for (size_t i = 0; i < preds.size(); ++i) {
        const std::string name = frame_name("frame_", i, preds[i].dim(1));
        write_pnm(dir / name, squeeze(preds[i]));
        artifacts.push_back(name);
    }
    RunManifest{"predict", train_config_to_json(cfg), cfg.seed, artifacts, kVersion}
        .write(dir / "manifest.json");
    std::cout << "wrote " << preds.size() << " predicted frames to " << dir.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& truth_dir,
             const std::string& windows_arg, const std::string& out) {
    const std::vector<TensorF> pred = load_frames(pred_dir);
    const std::vector<TensorF> truth = load_frames(truth_dir);
    if (pred.size() != truth.size())
        throw ConfigError("eval: --pred has " + std::to_string(pred.size()) +
                          " frames but --truth has " + std::to_string(truth.size()));

    std::vector<size_t> windows;
    std::stringstream ss(windows_arg);
    for (std::string tok; std::getline(ss, tok, ',');) {
        if (tok.empty()) continue;
        const long v = std::stol(tok);
        if (v < 1) throw ConfigError("eval: window horizons must be >= 1");
        windows.push_back(static_cast<size_t>(v));
    }

    const EvalReport report = evaluate_rollout(pred, truth, windows);
    const std::string csv = report.to_csv();
    std::cout << csv;
    if (!out.empty()) {
        const fs::path dir = ensure_out_dir(out);
        write_text(dir / "eval.csv", csv);
        RunManifest{"eval", "", 0, {"eval.csv"}, kVersion}.write(dir / "manifest.json");
    }
    return 0;
}

std::string trace_text(const ScheduleTrace& tr, const std::string& schedule) {
    std::ostringstream os;
    os << "schedule=" << schedule << " layers=" << tr.layers << " steps=" << tr.steps << "\n";
    os << "t\\l";
    for (int l = 0; l < tr.layers; ++l) os << " " << l;
    os << "\n";
    for (int t = 0; t < tr.steps; ++t) {
        os << (t < 10 ? "  " : " ") << t;
        for (int l = 0; l < tr.layers; ++l) os << " " << static_cast<char>(tr.cell[t][l]);
        os << "\n";
    }
    os << "updates:";
    for (int n : tr.update_count) os << " " << n;
    os << "\n";
    return os.str();
}

std::string trace_csv(const ScheduleTrace& tr) {
    std::ostringstream os;
    os << "t";
    for (int l = 0; l < tr.layers; ++l) os << ",layer" << l;
    os << "\n";
    for (int t = 0; t < tr.steps; ++t) {
        os << t;
        for (int l = 0; l < tr.layers; ++l) os << "," << static_cast<char>(tr.cell[t][l]);
        os << "\n";
    }
    os << "updates";
    for (int n : tr.update_count) os << "," << n;
    os << "\n";
    return os.str();
}

int cmd_trace(int layers, int steps, const std::string& schedule, const std::string& out) {
    Schedule s;
    if (schedule == "pyramidal")
        s = Schedule::Pyramidal;
    else if (schedule == "synchronous")
        s = Schedule::Synchronous;
    else
        throw ConfigError("--schedule must be 'pyramidal' or 'synchronous'");
    if (layers < 1) throw ConfigError("--layers must be >= 1");
    if (steps < 2) throw ConfigError("--steps must be >= 2");

    const ScheduleTrace tr = schedule_trace(layers, steps, s);
    std::cout << trace_text(tr, schedule);
    if (!out.empty()) {
        const fs::path dir = ensure_out_dir(out);
        write_text(dir / "trace.txt", trace_text(tr, schedule));
        write_text(dir / "trace.csv", trace_csv(tr));
        RunManifest{"trace", "", 0, {"trace.txt", "trace.csv"}, kVersion}
            .write(dir / "manifest.json");
    }
    return 0;
}

int cmd_variation(const std::string& seq_dir, const std::string& out) {
    const std::vector<TensorF> frames = load_frames(seq_dir);
    if (frames.size() < 2) throw ConfigError("--seq must contain at least 2 frames");
    const auto [pos, neg] = frame_variation(frames);
    const fs::path dir = ensure_out_dir(out);
    std::vector<std::string> artifacts;
    for (size_t i = 0; i < pos.size(); ++i) {
        const std::string pn = frame_name("pos_", i, pos[i].dim(0));
        const std::string nn = frame_name("neg_", i, neg[i].dim(0));
        write_pnm(dir / pn, pos[i]);
        write_pnm(dir / nn, neg[i]);
        artifacts.push_back(pn);
        artifacts.push_back(nn);
    }
    RunManifest{"variation", "", 0, artifacts, kVersion}.write(dir / "manifest.json");
    std::cout << "wrote " << pos.size() << " variation pairs to " << dir.string() << "\n";
    return 0;
}

int cmd_sweep(const std::string& kind, const std::string& config_file, const std::string& out,
              const std::string& p_values_arg, const std::string& lengths_arg, int total_frames) {
    const TrainConfig cfg = load_train_config(config_file);
    const fs::path dir = ensure_out_dir(out);
    std::string csv, artifact;

    if (kind == "p") {
        std::vector<double> p_values;
        std::stringstream ss(p_values_arg);
        for (std::string tok; std::getline(ss, tok, ',');)
            if (!tok.empty()) p_values.push_back(std::stod(tok));
        const SequenceSet train_data =
            synthetic_from(cfg, cfg.seed, static_cast<size_t>(cfg.num_sequences));
        const SequenceSet heldout = synthetic_from(cfg, cfg.seed + 7777, 8);
        csv = p_sweep_csv(sweep_p(cfg, train_data, heldout, p_values));
        artifact = "p_sweep.csv";
    } else if (kind == "seqlen") {
        std::vector<int> lengths;
        std::stringstream ss(lengths_arg);
        for (std::string tok; std::getline(ss, tok, ',');)
            if (!tok.empty()) lengths.push_back(std::stoi(tok));
        if (total_frames < 1) total_frames = cfg.num_sequences * cfg.seq_len;
        csv = seq_len_csv(sweep_seq_len(cfg, lengths, total_frames));
        artifact = "seq_len_sweep.csv";
    } else {
        throw ConfigError("--kind must be 'p' or 'seqlen'");
    }

    write_text(dir / artifact, csv);
    std::cout << csv;
    RunManifest{"sweep-" + kind, train_config_to_json(cfg), cfg.seed, {artifact}, kVersion}
        .write(dir / "manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ppnet - pyramidal predictive network for video frame prediction"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // train
    std::string tr_config, tr_data = "synthetic", tr_out, tr_resume;
    auto* tr = app.add_subcommand("train", "Train a model");
    tr->add_option("--config", tr_config, "JSON config file")->required();
    tr->add_option("--data", tr_data, "'synthetic' or a directory of PNM frames");
    tr->add_option("--out", tr_out, "Output directory")->required();
    tr->add_option("--resume", tr_resume, "Checkpoint to resume from");

    // predict
    std::string pr_ckpt, pr_config, pr_context, pr_out;
    int pr_horizon = 30;
    auto* pr = app.add_subcommand("predict", "Closed-loop rollout from context frames");
    pr->add_option("--ckpt", pr_ckpt, "Checkpoint file")->required();
    pr->add_option("--config", pr_config, "JSON config the checkpoint was trained with")
        ->required();
    pr->add_option("--context", pr_context, "Directory of context frames (>= 2)")->required();
    pr->add_option("--horizon", pr_horizon, "Number of frames to predict");
    pr->add_option("--out", pr_out, "Output directory")->required();

    // eval
    std::string ev_pred, ev_truth, ev_windows = "10,30", ev_out;
    auto* ev = app.add_subcommand("eval", "SSIM/PSNR report between two frame directories");
    ev->add_option("--pred", ev_pred, "Predicted frames directory")->required();
    ev->add_option("--truth", ev_truth, "Ground-truth frames directory")->required();
    ev->add_option("--windows", ev_windows, "Comma-separated first-N horizons");
    ev->add_option("--out", ev_out, "Optional output directory for eval.csv");

    // trace
    int tc_layers = 6, tc_steps = 10;
    std::string tc_schedule = "pyramidal", tc_out;
    auto* tc = app.add_subcommand("trace", "Activity table of the unrolling schedule");
    tc->add_option("--layers", tc_layers, "Number of layers");
    tc->add_option("--steps", tc_steps, "Number of time steps");
    tc->add_option("--schedule", tc_schedule, "pyramidal|synchronous");
    tc->add_option("--out", tc_out, "Optional output directory");

    // variation
    std::string va_seq, va_out;
    auto* va = app.add_subcommand("variation", "Inter-frame variation frames");
    va->add_option("--seq", va_seq, "Directory of input frames")->required();
    va->add_option("--out", va_out, "Output directory")->required();

    // sweep
    std::string sw_kind, sw_config, sw_out;
    std::string sw_p_values = "0,5,10,100,1000,10000", sw_lengths = "5,10,20";
    int sw_total_frames = 0;
    auto* sw = app.add_subcommand("sweep", "Hyperparameter sweeps with CSV reports");
    sw->add_option("--kind", sw_kind, "p|seqlen")->required();
    sw->add_option("--config", sw_config, "JSON base config")->required();
    sw->add_option("--out", sw_out, "Output directory")->required();
    sw->add_option("--p-values", sw_p_values, "Comma-separated p values (kind=p)");
    sw->add_option("--lengths", sw_lengths, "Comma-separated sequence lengths (kind=seqlen)");
    sw->add_option("--total-frames", sw_total_frames, "Frame budget (kind=seqlen)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (tr->parsed()) return cmd_train(tr_config, tr_data, tr_out, tr_resume);
        if (pr->parsed()) return cmd_predict(pr_ckpt, pr_config, pr_context, pr_horizon, pr_out);
        if (ev->parsed()) return cmd_eval(ev_pred, ev_truth, ev_windows, ev_out);
        if (tc->parsed()) return cmd_trace(tc_layers, tc_steps, tc_schedule, tc_out);
        if (va->parsed()) return cmd_variation(va_seq, va_out);
        if (sw->parsed())
            return cmd_sweep(sw_kind, sw_config, sw_out, sw_p_values, sw_lengths, sw_total_frames);
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
