#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppnet/convlstm.hpp"
#include "ppnet/graph.hpp"
#include "ppnet/rng.hpp"

namespace ppnet {

enum class Schedule { Pyramidal, Synchronous };
enum class UpwardContent { ErrorAndInput, ErrorOnly };
enum class UpwardWeighting { Raw, WeightedNormalized };

struct PPNetConfig {
    int num_layers = 4;
    std::vector<int> channels = {16, 32, 64, 128};  // hidden width per layer; also the
                                                    // A-channel count for layers > 0
    int kernel_size = 3;
    int input_channels = 1;
    int height = 32;
    int width = 32;
    Schedule schedule = Schedule::Pyramidal;
    UpwardContent upward_content = UpwardContent::ErrorAndInput;
    UpwardWeighting upward_weighting = UpwardWeighting::Raw;
    double p = 1000.0;
    double lambda0 = 0.5;

    void validate() const {
        if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
        if (channels.size() != static_cast<size_t>(num_layers))
            throw ConfigError("channels list length must equal num_layers");
        for (int c : channels)
            if (c < 1) throw ConfigError("channels must be positive");
        if (kernel_size < 1 || kernel_size % 2 == 0)
            throw ConfigError("kernel_size must be odd and positive");
        const int div = 1 << (num_layers - 1);
        if (height % div || width % div)
            throw ConfigError("height and width must be divisible by 2^(num_layers-1)");
        if (p < 0) throw ConfigError("p must be >= 0");
        if (lambda0 < 0 || lambda0 > 1) throw ConfigError("lambda0 must be in [0,1]");
    }

    // A-channel count at layer l: pixels at the bottom, configured width above.
    size_t a_channels(int l) const {
        return l == 0 ? static_cast<size_t>(input_channels) : static_cast<size_t>(channels[l]);
    }
    size_t hidden_channels(int l) const { return static_cast<size_t>(channels[l]); }
    size_t layer_height(int l) const { return static_cast<size_t>(height) >> l; }
    size_t layer_width(int l) const { return static_cast<size_t>(width) >> l; }
};

// --- schedule --------------------------------------------------------------

enum class Activity : char { Predicts = 'P', Holds = 'H', Absent = '.' };

struct ScheduleTrace {
    int layers = 0;
    int steps = 0;
    std::vector<std::vector<Activity>> cell;  // [t][l]
    std::vector<int> update_count;            // per layer, number of Predicts
};

// Control-flow replay of the staggered schedule without numerics. Under the
// pyramidal schedule layer l first predicts at t = l (0-based): the error
// formed between P_t^l and A_{t+1}^l feeds the layer above one step later.
inline ScheduleTrace schedule_trace(int layers, int steps, Schedule schedule) {
    if (layers < 1) throw ContractError("schedule_trace: layers must be >= 1");
    if (steps < 2) throw ContractError("schedule_trace: steps must be >= 2");
    ScheduleTrace tr;
    tr.layers = layers;
    tr.steps = steps;
    tr.cell.assign(steps, std::vector<Activity>(layers, Activity::Absent));
    tr.update_count.assign(layers, 0);
    // a[l]: whether A_t^l is present at the current time step
    std::vector<char> a(layers, 0), a_next(layers, 0);
    a[0] = 1;
    if (schedule == Schedule::Synchronous) std::fill(a.begin(), a.end(), 1);
    std::vector<char> p(layers, 0);
    for (int t = 0; t < steps; ++t) {
        std::fill(p.begin(), p.end(), 0);
        for (int l = layers - 1; l >= 0; --l) {
            if (a[l]) {
                tr.cell[t][l] = Activity::Predicts;
                ++tr.update_count[l];
                p[l] = 1;
            } else {
                tr.cell[t][l] = t > 0 ? Activity::Holds : Activity::Absent;
            }
        }
        if (t < steps - 1) {
            std::fill(a_next.begin(), a_next.end(), 0);
            a_next[0] = 1;
            for (int l = 0; l < layers; ++l)
                if (p[l] && a_next[l] && l + 1 < layers) a_next[l + 1] = 1;
            a = a_next;
        }
    }
    return tr;
}

// --- model -----------------------------------------------------------------

// Node ids recorded while unrolling one sequence. -1 marks an absent slot.
struct ForwardTrace {
    std::vector<std::vector<int>> A;  // [t][l] sensory input
    std::vector<std::vector<int>> P;  // [t][l] prediction (predicts A at t+1)
    std::vector<std::vector<int>> E;  // [t][l] error formed at time t (E[0] is the zero seed)
    std::vector<std::vector<int>> h;  // [t][l] hidden state after the top-down pass
    std::vector<std::vector<int>> c;
    std::vector<size_t> update_count;  // predictive-unit updates per layer
    size_t total_updates = 0;
};

template <class T>
class PPNet {
  public:
    PPNetConfig cfg;

    PPNet() = default;
    explicit PPNet(PPNetConfig c) : cfg(std::move(c)) { cfg.validate(); }

    // Parameter layout per layer: lstm.kernel, lstm.bias, pred.kernel,
    // pred.bias, and (below the top layer) up.kernel, up.bias feeding l+1.
    void init(uint64_t seed) {
        names_.clear();
        params_.clear();
        Rng rng(seed);
        const int L = cfg.num_layers;
        for (int l = 0; l < L; ++l) {
            const std::string pfx = "layer" + std::to_string(l) + ".";
            const size_t k = cfg.kernel_size;
            const size_t cin =
                cfg.a_channels(l) + cfg.hidden_channels(l) + (l + 1 < L ? cfg.a_channels(l + 1) : 0);
            Rng r1 = rng.fork(4 * l);
            ConvLSTMCell<T> cell = init_convlstm<T>(r1, cin, cfg.hidden_channels(l), k);
            push_param(pfx + "lstm.kernel", std::move(cell.gate_kernel));
            push_param(pfx + "lstm.bias", std::move(cell.gate_bias));
            Rng r2 = rng.fork(4 * l + 1);
            push_param(pfx + "pred.kernel",
                       uniform_kernel(r2, cfg.a_channels(l), cfg.hidden_channels(l), k));
            push_param(pfx + "pred.bias", Tensor<T>({cfg.a_channels(l)}));
            if (l + 1 < L) {
                const size_t up_cin = 2 * cfg.a_channels(l) +
                                      (cfg.upward_content == UpwardContent::ErrorAndInput
                                           ? cfg.a_channels(l)
                                           : 0);
                Rng r3 = rng.fork(4 * l + 2);
                push_param(pfx + "up.kernel",
                           uniform_kernel(r3, cfg.a_channels(l + 1), up_cin, k));
                push_param(pfx + "up.bias", Tensor<T>({cfg.a_channels(l + 1)}));
            }
        }
    }

    const std::vector<std::string>& param_names() const { return names_; }
    std::vector<Tensor<T>>& params() { return params_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

    // Register every parameter on a graph. Trainable binds leaves (gradients
    // collected); otherwise constants (inference).
    std::vector<int> bind(Graph<T>& g, bool trainable) const {
        std::vector<int> ids;
        ids.reserve(params_.size());
        for (const auto& p : params_) ids.push_back(trainable ? g.leaf(p) : g.constant(p));
        return ids;
    }

    // Teacher-forced unroll over `frames` plus an optional closed-loop tail of
    // `horizon` steps where the layer-0 prediction is fed back as the next
    // input. frames[t] is (B, C, H, W) in [0,1].
    ForwardTrace forward_sequence(Graph<T>& g, const std::vector<int>& pids,
                                  const std::vector<Tensor<T>>& frames, size_t horizon = 0) const {
        if (frames.size() < 2)
            throw ContractError("forward_sequence: need at least two frames");
        const int L = cfg.num_layers;
        const size_t total_steps = frames.size() + horizon;
        const size_t B = frames[0].dim(0);

        ForwardTrace tr;
        tr.A.assign(total_steps, std::vector<int>(L, -1));
        tr.P.assign(total_steps, std::vector<int>(L, -1));
        tr.E.assign(total_steps, std::vector<int>(L, -1));
        tr.h.assign(total_steps, std::vector<int>(L, -1));
        tr.c.assign(total_steps, std::vector<int>(L, -1));
        tr.update_count.assign(L, 0);

        std::vector<ConvLSTMState<T>> state(L);
        std::vector<int> e_cur(L, -1);
        for (int l = 0; l < L; ++l) {
            const std::vector<size_t> hs = {B, cfg.hidden_channels(l), cfg.layer_height(l),
                                            cfg.layer_width(l)};
            state[l].h = g.constant(Tensor<T>::zeros(hs));
            state[l].c = g.constant(Tensor<T>::zeros(hs));
            e_cur[l] = g.constant(Tensor<T>::zeros(
                {B, 2 * cfg.a_channels(l), cfg.layer_height(l), cfg.layer_width(l)}));
        }

        tr.A[0][0] = g.constant(check_frame(frames[0], B));
        if (cfg.schedule == Schedule::Synchronous)
            for (int l = 1; l < L; ++l)
                tr.A[0][l] = g.constant(Tensor<T>::zeros(
                    {B, cfg.a_channels(l), cfg.layer_height(l), cfg.layer_width(l)}));

        for (size_t t = 0; t < total_steps; ++t) {
            // top-down: update recurrent state and predict where input exists
            for (int l = L - 1; l >= 0; --l) {
                if (tr.A[t][l] < 0) {
                    tr.h[t][l] = state[l].h;  // held, bit-identical to t-1
                    tr.c[t][l] = state[l].c;
                    continue;
                }
                std::optional<int> topdown;
                if (l + 1 < L) {
                    if (tr.P[t][l + 1] >= 0)
                        topdown = g.upsample_nearest(tr.P[t][l + 1], 2);
                    else
                        // two-argument ConvLSTM step: the kernel keeps its
                        // top-down channels, fed with zeros until the layer
                        // above starts predicting
                        topdown = g.constant(Tensor<T>::zeros(
                            {B, cfg.a_channels(l + 1), cfg.layer_height(l), cfg.layer_width(l)}));
                }
                state[l] = convlstm_step(g, pid(pids, l, 0), pid(pids, l, 1), tr.A[t][l], state[l],
                                         topdown);
                tr.h[t][l] = state[l].h;
                tr.c[t][l] = state[l].c;
                ++tr.update_count[l];
                tr.P[t][l] = local_prediction(g, pids, state[l].h, l);
            }
            // bottom-up: form errors against the next frame and lift input
            if (t + 1 < total_steps) {
                tr.A[t + 1][0] =
                    t + 1 < frames.size()
                        ? g.constant(check_frame(frames[t + 1], B))
                        : g.constant(g.value(tr.P[t][0]));  // closed loop, detached
                for (int l = 0; l < L; ++l) {
                    if (tr.P[t][l] < 0 || tr.A[t + 1][l] < 0) {
                        tr.E[t + 1][l] = e_cur[l];  // carried unchanged
                        continue;                   // A[t+1][l+1] stays absent
                    }
                    const int err = error_unit(g, tr.P[t][l], tr.A[t + 1][l]);
                    e_cur[l] = err;
                    tr.E[t + 1][l] = err;
                    if (l + 1 < L) {
                        int up_err = err;
                        if (cfg.upward_weighting == UpwardWeighting::WeightedNormalized) {
                            // p*E rescaled to unit max; the normalizer is a
                            // detached constant
                            const Tensor<T>& ev = g.value(err);
                            T mx = T(0);
                            for (T v : ev.data) mx = std::max(mx, v);
                            const T w = static_cast<T>(cfg.p);
                            up_err = g.scale(err, mx > T(0) ? w / (w * mx) : w);
                        }
                        tr.A[t + 1][l + 1] = upward_input(g, pids, up_err, tr.A[t][l], l);
                    }
                }
            }
        }
        for (size_t n : tr.update_count) tr.total_updates += n;
        return tr;
    }

    // conv -> relu local prediction; layer 0 additionally clamps to the pixel
    // range [0,1].
    int local_prediction(Graph<T>& g, const std::vector<int>& pids, int h, int l) const {
        int p = g.conv2d(h, pid(pids, l, 2), pid(pids, l, 3), (cfg.kernel_size - 1) / 2);
        p = g.relu(p);
        if (l == 0) p = g.clamp01(p);
        return p;
    }

    // Split error: concat[relu(P - A), relu(A - P)].
    static int error_unit(Graph<T>& g, int pred, int a_next) {
        require_same_shape(g.value(pred), g.value(a_next), "error_unit");
        const int pos = g.relu(g.sub(pred, a_next));
        const int neg = g.relu(g.sub(a_next, pred));
        return g.concat_channels(pos, neg);
    }

    // Generative unit: concat(E, A_prev) -> conv -> relu -> maxpool(2).
    // Under UpwardContent::ErrorOnly the local input is omitted from the
    // concat (the PredNet-style ablation).
    int upward_input(Graph<T>& g, const std::vector<int>& pids, int err, int a_prev, int l) const {
        int z = err;
        if (cfg.upward_content == UpwardContent::ErrorAndInput) z = g.concat_channels(err, a_prev);
        int a = g.conv2d(z, pid(pids, l, 4), pid(pids, l, 5), (cfg.kernel_size - 1) / 2);
        return g.maxpool2d(g.relu(a), 2);
    }

    // Closed-loop continuation: run the schedule over the context, then feed
    // layer-0 predictions back for `horizon` steps. Returns the predicted
    // frames (values, no graph retained by the caller).
    std::vector<Tensor<T>> rollout(const std::vector<Tensor<T>>& context, int horizon) const {
        if (context.size() < 2) throw ContractError("rollout: need at least two context frames");
        if (horizon < 1) throw ContractError("rollout: horizon must be >= 1");
        Graph<T> g;
        const std::vector<int> pids = bind(g, false);
        const ForwardTrace tr = forward_sequence(g, pids, context, horizon);
        std::vector<Tensor<T>> out;
        out.reserve(horizon);
        // P at time t predicts frame t+1; the first unseen frame is predicted
        // at t = context.size()-1
        const size_t last = context.size() + static_cast<size_t>(horizon) - 1;
        for (size_t t = context.size() - 1; t < last; ++t) out.push_back(g.value(tr.P[t][0]));
        return out;
    }

  private:
    static Tensor<T> uniform_kernel(Rng& rng, size_t cout, size_t cin, size_t k) {
        Tensor<T> t({cout, cin, k, k});
        const double bound = std::sqrt(1.0 / static_cast<double>(cin * k * k));
        for (auto& w : t.data) w = static_cast<T>(rng.uniform(-bound, bound));
        return t;
    }

    Tensor<T> check_frame(const Tensor<T>& f, size_t B) const {
        if (f.rank() != 4 || f.dim(0) != B ||
            f.dim(1) != static_cast<size_t>(cfg.input_channels) ||
            f.dim(2) != static_cast<size_t>(cfg.height) || f.dim(3) != static_cast<size_t>(cfg.width))
            throw DimensionError("forward_sequence: frame shape " + f.shape_str() +
                                 " does not match config");
        return f;
    }

    void push_param(std::string name, Tensor<T> t) {
        names_.push_back(std::move(name));
        params_.push_back(std::move(t));
    }

    // slot: 0 lstm.kernel, 1 lstm.bias, 2 pred.kernel, 3 pred.bias,
    //       4 up.kernel, 5 up.bias. Every layer below the top owns 6 params;
    //       the top layer owns 4 but, being last, does not shift offsets.
    static int pid(const std::vector<int>& pids, int l, int slot) {
        return pids[static_cast<size_t>(l) * 6 + slot];
    }

    std::vector<std::string> names_;
    std::vector<Tensor<T>> params_;
};

}  // namespace ppnet
