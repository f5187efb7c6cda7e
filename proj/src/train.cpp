#include "ppnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ppnet/kernels.hpp"
#include "ppnet/kernels_ref.hpp"
#include "ppnet/metrics.hpp"

namespace ppnet {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* schedule_str(Schedule s) {
    return s == Schedule::Pyramidal ? "pyramidal" : "synchronous";
}
const char* content_str(UpwardContent c) {
    return c == UpwardContent::ErrorAndInput ? "error_and_input" : "error_only";
}
const char* weighting_str(UpwardWeighting w) {
    return w == UpwardWeighting::Raw ? "raw" : "weighted_normalized";
}
const char* scope_str(LayerScope s) {
    return s == LayerScope::Layer0Only ? "layer0_only" : "all_layers_mean";
}

}  // namespace

// Canonical key-sorted serialization; this string defines the fingerprint.
uint64_t config_fingerprint(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "batch_size=" << cfg.batch_size << ";";
    os << "channels=";
    for (size_t i = 0; i < cfg.net.channels.size(); ++i)
        os << (i ? "," : "") << cfg.net.channels[i];
    os << ";";
    os << "clip_norm=" << fmt_double(cfg.clip_norm) << ";";
    os << "detach_weight=" << (cfg.loss.detach_weight ? 1 : 0) << ";";
    // epochs deliberately excluded: it is run length, not model identity, and
    // must not block resuming a checkpoint with a longer schedule
    os << "height=" << cfg.net.height << ";";
    os << "input_channels=" << cfg.net.input_channels << ";";
    os << "kernel_size=" << cfg.net.kernel_size << ";";
    os << "lambda0=" << fmt_double(cfg.loss.lambda0) << ";";
    os << "layer_scope=" << scope_str(cfg.loss.scope) << ";";
    os << "layers=" << cfg.net.num_layers << ";";
    os << "learning_rate=" << fmt_double(cfg.learning_rate) << ";";
    os << "num_sequences=" << cfg.num_sequences << ";";
    os << "num_shapes=" << cfg.num_shapes << ";";
    os << "p=" << fmt_double(cfg.loss.p) << ";";
    os << "schedule=" << schedule_str(cfg.net.schedule) << ";";
    os << "seed=" << cfg.seed << ";";
    os << "seq_len=" << cfg.seq_len << ";";
    os << "speed_max=" << cfg.speed_max << ";";
    os << "speed_min=" << cfg.speed_min << ";";
    os << "upward_content=" << content_str(cfg.net.upward_content) << ";";
    os << "upward_weighting=" << weighting_str(cfg.net.upward_weighting) << ";";
    os << "width=" << cfg.net.width << ";";
    return fnv1a64(os.str());
}

Adam::Adam(const std::vector<TensorF>& params) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.push_back(TensorF::zeros(p.shape));
        v_.push_back(TensorF::zeros(p.shape));
    }
}

void Adam::step(std::vector<TensorF>& params, const std::vector<TensorF>& grads,
                const std::vector<std::string>& names, double lr, double beta1, double beta2,
                double eps) {
    if (params.size() != grads.size() || params.size() != m_.size())
        throw ContractError("adam: parameter/gradient count mismatch");
    ++t_;
    const float bc1 = static_cast<float>(1.0 - std::pow(beta1, static_cast<double>(t_)));
    const float bc2 = static_cast<float>(1.0 - std::pow(beta2, static_cast<double>(t_)));
    for (size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].all_finite())
            throw NumericError("adam: non-finite gradient for parameter '" + names[i] + "'");
        kern::active().adam(params[i].data.data(), grads[i].data.data(), m_[i].data.data(),
                            v_[i].data.data(), params[i].size(), static_cast<float>(lr),
                            static_cast<float>(beta1), static_cast<float>(beta2),
                            static_cast<float>(eps), bc1, bc2);
    }
}

std::vector<std::vector<int>> collect_loss_errors(const ForwardTrace& trace, size_t frames,
                                                  LayerScope scope) {
    std::vector<std::vector<int>> errs;
    for (size_t t = 1; t < frames; ++t) {
        std::vector<int> step;
        if (scope == LayerScope::Layer0Only) {
            if (trace.E[t][0] >= 0) step.push_back(trace.E[t][0]);
        } else {
            for (int e : trace.E[t])
                if (e >= 0) step.push_back(e);
        }
        if (!step.empty()) errs.push_back(std::move(step));
    }
    return errs;
}

std::vector<TensorF> batch_frames(const std::vector<const TensorF*>& seqs) {
    if (seqs.empty()) throw ContractError("batch_frames: empty batch");
    const TensorF& first = *seqs[0];
    const size_t T = first.dim(0), C = first.dim(1), H = first.dim(2), W = first.dim(3);
    const size_t n = C * H * W;
    std::vector<TensorF> out;
    out.reserve(T);
    for (size_t t = 0; t < T; ++t) {
        TensorF f({seqs.size(), C, H, W});
        for (size_t b = 0; b < seqs.size(); ++b) {
            if (!seqs[b]->same_shape(first))
                throw DimensionError("batch_frames: mixed sequence shapes");
            std::copy_n(seqs[b]->data.begin() + t * n, n, f.data.begin() + b * n);
        }
        out.push_back(std::move(f));
    }
    return out;
}

Checkpoint make_checkpoint(const PPNet<float>& model, const Adam& opt, uint64_t fingerprint,
                           uint64_t step) {
    Checkpoint ck;
    ck.fingerprint = fingerprint;
    ck.step = step;
    const auto& names = model.param_names();
    const auto& params = model.params();
    for (size_t i = 0; i < params.size(); ++i) ck.tensors.emplace_back(names[i], params[i]);
    for (size_t i = 0; i < params.size(); ++i) {
        ck.tensors.emplace_back("opt." + names[i] + ".m", opt.m()[i]);
        ck.tensors.emplace_back("opt." + names[i] + ".v", opt.v()[i]);
    }
    return ck;
}

void restore_checkpoint(const Checkpoint& ck, PPNet<float>& model, Adam& opt,
                        uint64_t expected_fingerprint) {
    if (ck.fingerprint != expected_fingerprint)
        throw ConfigError("checkpoint fingerprint mismatch: checkpoint was trained with a "
                          "different configuration");
    const auto& names = model.param_names();
    for (size_t i = 0; i < names.size(); ++i) {
        const TensorF* p = ck.find(names[i]);
        const TensorF* m = ck.find("opt." + names[i] + ".m");
        const TensorF* v = ck.find("opt." + names[i] + ".v");
        if (!p || !m || !v)
            throw IoError("checkpoint is missing records for parameter '" + names[i] + "'");
        if (p->shape != model.params()[i].shape)
            throw DimensionError("checkpoint parameter '" + names[i] + "' has shape " +
                                 p->shape_str() + ", expected " +
                                 model.params()[i].shape_str());
        model.params()[i] = *p;
        opt.m()[i] = *m;
        opt.v()[i] = *v;
    }
    opt.set_steps(ck.step);
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
    std::ostringstream os;
    os.precision(10);
    os << "step,loss,time_ms,updates\n";
    for (const auto& r : log)
        os << r.step << "," << r.loss << "," << r.time_ms << "," << r.updates << "\n";
    return os.str();
}

TrainResult train(const TrainConfig& cfg, const SequenceSet& data,
                  std::optional<std::filesystem::path> checkpoint_path,
                  std::optional<Checkpoint> resume) {
    cfg.validate();
    if (data.sequences.empty()) throw ContractError("train: empty dataset");
    for (const auto& s : data.sequences)
        if (s.dim(0) < 2) throw ContractError("train: sequences must have length >= 2");

    const uint64_t fp = config_fingerprint(cfg);
    TrainResult res;
    res.model = PPNet<float>(cfg.net);
    res.model.init(cfg.seed);
    Adam opt(res.model.params());
    if (resume) restore_checkpoint(*resume, res.model, opt, fp);
    uint64_t step = opt.steps();

    Checkpoint last_good = make_checkpoint(res.model, opt, fp, step);
    const auto& names = res.model.param_names();
    const size_t nseq = data.sequences.size();
    const size_t bs = static_cast<size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t start = 0; start < nseq; start += bs) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<const TensorF*> batch;
            for (size_t i = start; i < std::min(start + bs, nseq); ++i)
                batch.push_back(&data.sequences[i]);
            const std::vector<TensorF> frames = batch_frames(batch);

            Graph<float> g;
            double loss_val;
            size_t batch_updates;
            try {
                const std::vector<int> pids = res.model.bind(g, true);
                const ForwardTrace trace = res.model.forward_sequence(g, pids, frames);
                batch_updates = trace.total_updates;
                const auto errs = collect_loss_errors(trace, frames.size(), cfg.loss.scope);
                const int loss_id = sequence_loss(g, errs, cfg.loss);
                loss_val = static_cast<double>(g.value(loss_id).item());
                if (!std::isfinite(loss_val))
                    throw NumericError("train: loss diverged (non-finite) at step " +
                                       std::to_string(step + 1));
                g.backward(loss_id);

                std::vector<TensorF> grads;
                grads.reserve(pids.size());
                double sq_norm = 0;
                for (int id : pids) {
                    grads.push_back(g.grad(id));
                    for (float v : grads.back().data)
                        sq_norm += static_cast<double>(v) * static_cast<double>(v);
                }
                if (cfg.clip_norm > 0) {
                    const double norm = std::sqrt(sq_norm);
                    if (norm > cfg.clip_norm) {
                        const float scale = static_cast<float>(cfg.clip_norm / norm);
                        for (auto& gr : grads)
                            for (auto& v : gr.data) v *= scale;
                    }
                }
                opt.step(res.model.params(), grads, names, cfg.learning_rate);
            } catch (const NumericError&) {
                // any numeric abort (diverged loss, non-finite activations or
                // gradients) leaves the last good state on disk
                if (checkpoint_path) last_good.save(*checkpoint_path);
                throw;
            }
            ++step;
            const auto t1 = std::chrono::steady_clock::now();
            const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            res.log.push_back({static_cast<size_t>(step), loss_val, ms, batch_updates});
            res.total_cell_updates += batch_updates;
            last_good = make_checkpoint(res.model, opt, fp, step);
        }
    }
    res.final_step = step;
    if (checkpoint_path) last_good.save(*checkpoint_path);
    return res;
}

// --- evaluation helpers ------------------------------------------------------

namespace {

// (1,C,H,W) batch slice -> (C,H,W)
TensorF squeeze_batch(const TensorF& t) {
    return TensorF({t.dim(1), t.dim(2), t.dim(3)},
                   std::vector<float>(t.data.begin(), t.data.end()));
}

}  // namespace

double next_frame_ssim(const PPNet<float>& model, const SequenceSet& heldout) {
    double total = 0;
    size_t count = 0;
    for (const auto& seq : heldout.sequences) {
        const std::vector<TensorF> frames_flat = split_frames(seq);
        std::vector<TensorF> frames;
        for (const auto& f : frames_flat)
            frames.push_back(TensorF({1, f.dim(0), f.dim(1), f.dim(2)}, f.data));
        Graph<float> g;
        const auto pids = model.bind(g, false);
        const ForwardTrace tr = model.forward_sequence(g, pids, frames);
        for (size_t t = 0; t + 1 < frames.size(); ++t) {
            if (tr.P[t][0] < 0) continue;
            total += ssim(squeeze_batch(g.value(tr.P[t][0])), frames_flat[t + 1]);
            ++count;
        }
    }
    if (!count) throw ContractError("next_frame_ssim: no predictions formed");
    return total / static_cast<double>(count);
}

double copy_last_ssim(const SequenceSet& heldout) {
    double total = 0;
    size_t count = 0;
    for (const auto& seq : heldout.sequences) {
        const std::vector<TensorF> frames = split_frames(seq);
        for (size_t t = 0; t + 1 < frames.size(); ++t) {
            total += ssim(frames[t], frames[t + 1]);
            ++count;
        }
    }
    if (!count) throw ContractError("copy_last_ssim: no frame pairs");
    return total / static_cast<double>(count);
}

double mean_raw_error(const PPNet<float>& model, const SequenceSet& heldout) {
    double total = 0;
    size_t count = 0;
    // score after the schedule warm-up: the first frames give the model no
    // motion evidence, so those guesses are irreducibly ambiguous and would
    // swamp a comparison between trained models
    const size_t start = std::max<size_t>(1, static_cast<size_t>(model.cfg.num_layers));
    for (const auto& seq : heldout.sequences) {
        const std::vector<TensorF> frames_flat = split_frames(seq);
        std::vector<TensorF> frames;
        for (const auto& f : frames_flat)
            frames.push_back(TensorF({1, f.dim(0), f.dim(1), f.dim(2)}, f.data));
        Graph<float> g;
        const auto pids = model.bind(g, false);
        const ForwardTrace tr = model.forward_sequence(g, pids, frames);
        for (size_t t = start; t < frames.size(); ++t) {
            if (tr.E[t][0] < 0) continue;
            const TensorF& e = g.value(tr.E[t][0]);
            total += kern::sum_ref(e.data.data(), e.size()) / static_cast<double>(e.size());
            ++count;
        }
    }
    if (!count) throw ContractError("mean_raw_error: no errors formed");
    return total / static_cast<double>(count);
}

// --- sweeps -------------------------------------------------------------------

std::vector<PSweepRow> sweep_p(const TrainConfig& base, const SequenceSet& train_data,
                               const SequenceSet& heldout, const std::vector<double>& p_values) {
    if (p_values.size() < 2) throw ContractError("sweep_p: need at least two p values");
    std::vector<PSweepRow> rows;
    for (double p : p_values) {
        TrainConfig cfg = base;
        cfg.loss.p = p;
        cfg.net.p = p;
        const TrainResult r = train(cfg, train_data);
        rows.push_back({p, mean_raw_error(r.model, heldout)});
    }
    return rows;
}

std::string p_sweep_csv(const std::vector<PSweepRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "p,mean_raw_error\n";
    for (const auto& r : rows) os << r.p << "," << r.mean_error << "\n";
    return os.str();
}

std::vector<SeqLenRow> sweep_seq_len(const TrainConfig& base, const std::vector<int>& lengths,
                                     int total_frames) {
    std::vector<SeqLenRow> rows;
    for (int len : lengths) {
        if (len < 2) throw ContractError("sweep_seq_len: lengths must be >= 2");
        TrainConfig cfg = base;
        cfg.seq_len = len;
        cfg.num_sequences = std::max(1, total_frames / len);
        const SequenceSet data = gen_moving_shapes(
            cfg.seed, static_cast<size_t>(cfg.num_sequences), static_cast<size_t>(len),
            static_cast<size_t>(cfg.net.height), static_cast<size_t>(cfg.net.width),
            static_cast<size_t>(cfg.num_shapes), cfg.speed_min, cfg.speed_max);
        const SequenceSet heldout = gen_moving_shapes(
            cfg.seed + 7777, 8, static_cast<size_t>(len), static_cast<size_t>(cfg.net.height),
            static_cast<size_t>(cfg.net.width), static_cast<size_t>(cfg.num_shapes),
            cfg.speed_min, cfg.speed_max);
        const TrainResult r = train(cfg, data);
        double total_ms = 0;
        for (const auto& row : r.log) total_ms += row.time_ms;
        rows.push_back({len, total_ms / cfg.epochs, next_frame_ssim(r.model, heldout)});
    }
    return rows;
}

std::string seq_len_csv(const std::vector<SeqLenRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "seq_len,epoch_time_ms,heldout_ssim\n";
    for (const auto& r : rows) os << r.seq_len << "," << r.epoch_time_ms << "," << r.heldout_ssim << "\n";
    return os.str();
}

}  // namespace ppnet
