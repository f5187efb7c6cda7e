#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ppnet/checkpoint.hpp"
#include "ppnet/data.hpp"
#include "ppnet/loss.hpp"
#include "ppnet/network.hpp"

namespace ppnet {

struct TrainConfig {
    PPNetConfig net;
    LossConfig loss;
    int epochs = 20;
    double learning_rate = 2e-4;
    int batch_size = 4;
    uint64_t seed = 1;
    double clip_norm = 5.0;  // global-norm gradient clip; <= 0 disables
    // synthetic-data knobs (used when training from the generator)
    int seq_len = 10;
    int num_sequences = 200;
    int num_shapes = 2;
    int speed_min = 1;
    int speed_max = 2;

    void validate() const {
        net.validate();
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (seq_len < 2) throw ConfigError("seq_len must be >= 2");
    }
};

// Adaptive-moment optimizer with bias correction; moments align with the
// model's parameter list by index.
class Adam {
  public:
    Adam() = default;
    explicit Adam(const std::vector<TensorF>& params);

    void step(std::vector<TensorF>& params, const std::vector<TensorF>& grads,
              const std::vector<std::string>& names, double lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8);

    uint64_t steps() const { return t_; }
    std::vector<TensorF>& m() { return m_; }
    std::vector<TensorF>& v() { return v_; }
    const std::vector<TensorF>& m() const { return m_; }
    const std::vector<TensorF>& v() const { return v_; }
    void set_steps(uint64_t t) { t_ = t; }

  private:
    std::vector<TensorF> m_, v_;
    uint64_t t_ = 0;
};

struct TrainLogRow {
    size_t step;
    double loss;
    double time_ms;
    size_t updates;  // predictive-unit updates in this step
};

struct TrainResult {
    PPNet<float> model;
    std::vector<TrainLogRow> log;
    size_t total_cell_updates = 0;
    uint64_t final_step = 0;
};

std::string train_log_csv(const std::vector<TrainLogRow>& log);

// Errors entering the loss, grouped per formable step, restricted to the
// teacher-forced range t in [1, T-1].
std::vector<std::vector<int>> collect_loss_errors(const ForwardTrace& trace, size_t frames,
                                                  LayerScope scope);

// Stack sequences (T,C,H,W) into per-time batch frames (B,C,H,W).
std::vector<TensorF> batch_frames(const std::vector<const TensorF*>& seqs);

uint64_t config_fingerprint(const TrainConfig& cfg);

Checkpoint make_checkpoint(const PPNet<float>& model, const Adam& opt, uint64_t fingerprint,
                           uint64_t step);
void restore_checkpoint(const Checkpoint& ck, PPNet<float>& model, Adam& opt,
                        uint64_t expected_fingerprint);

// Full optimization loop: forward_sequence -> sequence_loss -> backward ->
// optimizer step. Writes the final checkpoint to `checkpoint_path` when set;
// on divergence (non-finite loss) writes the last good state there and
// throws NumericError.
TrainResult train(const TrainConfig& cfg, const SequenceSet& data,
                  std::optional<std::filesystem::path> checkpoint_path = std::nullopt,
                  std::optional<Checkpoint> resume = std::nullopt);

// --- evaluation helpers ------------------------------------------------------

// Teacher-forced next-frame SSIM averaged over a held-out set.
double next_frame_ssim(const PPNet<float>& model, const SequenceSet& heldout);
// Copy-last-frame baseline on the same protocol: ssim(x_t, x_{t+1}).
double copy_last_ssim(const SequenceSet& heldout);
// Mean raw (unweighted) layer-0 split error on a held-out set.
double mean_raw_error(const PPNet<float>& model, const SequenceSet& heldout);

// --- experiment sweeps -------------------------------------------------------

struct PSweepRow {
    double p;
    double mean_error;  // raw, never the weighted loss
};
// One model per p from the same seed; p = 0 rows are the no-weight baseline.
std::vector<PSweepRow> sweep_p(const TrainConfig& base, const SequenceSet& train_data,
                               const SequenceSet& heldout, const std::vector<double>& p_values);
std::string p_sweep_csv(const std::vector<PSweepRow>& rows);

struct SeqLenRow {
    int seq_len;
    double epoch_time_ms;
    double heldout_ssim;
};
// Constant frame budget: each length trains on total_frames/length sequences.
std::vector<SeqLenRow> sweep_seq_len(const TrainConfig& base, const std::vector<int>& lengths,
                                     int total_frames);
std::string seq_len_csv(const std::vector<SeqLenRow>& rows);

}  // namespace ppnet
