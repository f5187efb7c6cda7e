#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ppnet/train.hpp"

using namespace ppnet;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.net.num_layers = 2;
    cfg.net.channels = {4, 8};
    cfg.net.height = 16;
    cfg.net.width = 16;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.seq_len = 5;
    cfg.num_sequences = 4;
    cfg.num_shapes = 1;
    return cfg;
}

SequenceSet tiny_data(const TrainConfig& cfg, uint64_t seed) {
    return gen_moving_shapes(seed, cfg.num_sequences, cfg.seq_len, cfg.net.height, cfg.net.width,
                             cfg.num_shapes, cfg.speed_min, cfg.speed_max);
}

fs::path temp_file(const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove(p);
    return p;
}

}  // namespace

TEST_CASE("adam: single step matches hand arithmetic") {
    std::vector<TensorF> params = {TensorF({2}, {1.0f, -1.0f})};
    std::vector<TensorF> grads = {TensorF({2}, {0.5f, -0.5f})};
    Adam opt(params);
    opt.step(params, grads, {"w"}, 0.1);
    // t=1: m=(1-b1)g, v=(1-b2)g^2, mhat=g, vhat=g^2 -> update = lr*g/(|g|+eps)
    CHECK(params[0].data[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-5));
    CHECK(params[0].data[1] == doctest::Approx(-1.0 + 0.1).epsilon(1e-5));
    CHECK(opt.steps() == 1);

    std::vector<TensorF> bad = {TensorF({2}, {std::nanf(""), 0.0f})};
    CHECK_THROWS_WITH_AS(opt.step(params, bad, {"w"}, 0.1), doctest::Contains("'w'"),
                         NumericError);
}

TEST_CASE("config fingerprint separates configs") {
    const TrainConfig a = tiny_train_config();
    TrainConfig b = a;
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    b.learning_rate *= 2;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
    TrainConfig c = a;
    c.net.channels = {4, 9};
    CHECK(config_fingerprint(a) != config_fingerprint(c));
}

TEST_CASE("checkpoint round trip is bit-identical") {
    const TrainConfig cfg = tiny_train_config();
    const TrainResult r = train(cfg, tiny_data(cfg, 3));
    Adam opt(r.model.params());
    const Checkpoint ck = make_checkpoint(r.model, opt, config_fingerprint(cfg), r.final_step);
    const fs::path file = temp_file("roundtrip.ppnc");
    ck.save(file);
    const Checkpoint back = Checkpoint::load(file);
    CHECK(back.fingerprint == ck.fingerprint);
    CHECK(back.step == ck.step);
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (size_t i = 0; i < ck.tensors.size(); ++i) {
        CHECK(back.tensors[i].first == ck.tensors[i].first);
        CHECK(back.tensors[i].second.shape == ck.tensors[i].second.shape);
        CHECK(back.tensors[i].second.data == ck.tensors[i].second.data);
    }
}

TEST_CASE("fixed seed and config train bit-reproducibly") {
    const TrainConfig cfg = tiny_train_config();
    const SequenceSet data = tiny_data(cfg, 5);
    const TrainResult a = train(cfg, data);
    const TrainResult b = train(cfg, data);
    REQUIRE(a.model.params().size() == b.model.params().size());
    for (size_t i = 0; i < a.model.params().size(); ++i)
        CHECK(a.model.params()[i].data == b.model.params()[i].data);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
}

TEST_CASE("resume continues the step counter and matches uninterrupted training") {
    TrainConfig cfg = tiny_train_config();
    const SequenceSet data = tiny_data(cfg, 7);

    cfg.epochs = 2;
    const TrainResult full = train(cfg, data);

    cfg.epochs = 1;
    const fs::path ck1 = temp_file("resume1.ppnc");
    const TrainResult half = train(cfg, data, ck1);
    CHECK(half.final_step == data.sequences.size() / cfg.batch_size);

    // resume from the half checkpoint for one more epoch
    const Checkpoint ck = Checkpoint::load(ck1);
    const TrainResult resumed = train(cfg, data, std::nullopt, ck);
    CHECK(resumed.final_step == full.final_step);
    for (size_t i = 0; i < full.model.params().size(); ++i)
        CHECK(resumed.model.params()[i].data == full.model.params()[i].data);

    // wrong config -> fingerprint mismatch
    TrainConfig other = cfg;
    other.learning_rate = 1e-3;
    CHECK_THROWS_AS(train(other, data, std::nullopt, ck), ConfigError);
}

TEST_CASE("update counter follows the pyramidal schedule") {
    TrainConfig cfg = tiny_train_config();
    const SequenceSet data = tiny_data(cfg, 9);
    const TrainResult r = train(cfg, data);
    // per step: sum over layers of max(0, T - l), T = 5, L = 2 -> 9
    const size_t steps = data.sequences.size() / cfg.batch_size;
    CHECK(r.total_cell_updates == steps * (5 + 4));

    cfg.net.schedule = Schedule::Synchronous;
    const TrainResult rs = train(cfg, data);
    CHECK(rs.total_cell_updates == steps * (5 + 5));
}

TEST_CASE("diverging loss aborts with NumericError and keeps the last good checkpoint") {
    TrainConfig cfg = tiny_train_config();
    cfg.learning_rate = 1e18;  // guaranteed blow-up
    cfg.clip_norm = 0;         // disable the clip so divergence actually happens
    cfg.epochs = 50;
    const SequenceSet data = tiny_data(cfg, 11);
    const fs::path ck = temp_file("diverge.ppnc");
    CHECK_THROWS_AS(train(cfg, data, ck), NumericError);
    CHECK(fs::exists(ck));
    const Checkpoint last = Checkpoint::load(ck);
    for (const auto& [name, t] : last.tensors) CHECK(t.all_finite());
}

TEST_CASE("train log csv layout") {
    const std::vector<TrainLogRow> log = {{1, 0.5, 12.0, 9}, {2, 0.25, 11.0, 9}};
    const std::string csv = train_log_csv(log);
    CHECK(csv.rfind("step,loss,time_ms,updates\n", 0) == 0);
    CHECK(csv.find("\n1,0.5,") != std::string::npos);
}

TEST_CASE("eval helpers run on a trained model") {
    const TrainConfig cfg = tiny_train_config();
    const SequenceSet data = tiny_data(cfg, 13);
    // 16x16 frames satisfy the 11x11 ssim window
    const TrainResult r = train(cfg, data);
    const double model_ssim = next_frame_ssim(r.model, data);
    const double baseline = copy_last_ssim(data);
    CHECK(model_ssim >= -1.0);
    CHECK(model_ssim <= 1.0);
    CHECK(baseline < 1.0);
    CHECK(mean_raw_error(r.model, data) >= 0.0);
}

TEST_CASE("sweep tables have one row per setting") {
    TrainConfig cfg = tiny_train_config();
    const SequenceSet data = tiny_data(cfg, 15);
    const SequenceSet held = tiny_data(cfg, 16);
    const auto rows = sweep_p(cfg, data, held, {0.0, 10.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].p == 0.0);
    CHECK(rows[1].p == 10.0);
    const std::string csv = p_sweep_csv(rows);
    CHECK(csv.rfind("p,mean_raw_error\n", 0) == 0);

    const auto lrows = sweep_seq_len(cfg, {3, 5}, 20);
    REQUIRE(lrows.size() == 2);
    CHECK(lrows[0].seq_len == 3);
    CHECK(lrows[0].epoch_time_ms > 0);
    const std::string lcsv = seq_len_csv(lrows);
    CHECK(lcsv.rfind("seq_len,epoch_time_ms,heldout_ssim\n", 0) == 0);
}
