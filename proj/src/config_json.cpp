#include "ppnet/config_json.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace ppnet {

using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kKeys = {
    "batch_size",    "channels",   "clip_norm",     "detach_weight",   "epochs",
    "height",        "input_channels", "kernel_size", "lambda0",       "layer_scope",
    "layers",        "learning_rate", "num_sequences", "num_shapes",   "p",
    "schedule",      "seed",       "seq_len",       "speed_max",       "speed_min",
    "upward_content", "upward_weighting", "width",
};

template <class T>
T get(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("config: missing required key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

Schedule parse_schedule(const std::string& s) {
    if (s == "pyramidal") return Schedule::Pyramidal;
    if (s == "synchronous") return Schedule::Synchronous;
    throw ConfigError("config: schedule must be 'pyramidal' or 'synchronous', got '" + s + "'");
}

UpwardContent parse_content(const std::string& s) {
    if (s == "error_and_input") return UpwardContent::ErrorAndInput;
    if (s == "error_only") return UpwardContent::ErrorOnly;
    throw ConfigError("config: upward_content must be 'error_and_input' or 'error_only', got '" +
                      s + "'");
}

UpwardWeighting parse_weighting(const std::string& s) {
    if (s == "raw") return UpwardWeighting::Raw;
    if (s == "weighted_normalized") return UpwardWeighting::WeightedNormalized;
    throw ConfigError("config: upward_weighting must be 'raw' or 'weighted_normalized', got '" +
                      s + "'");
}

LayerScope parse_scope(const std::string& s) {
    if (s == "layer0_only") return LayerScope::Layer0Only;
    if (s == "all_layers_mean") return LayerScope::AllLayersMean;
    throw ConfigError("config: layer_scope must be 'layer0_only' or 'all_layers_mean', got '" +
                      s + "'");
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKeys.count(key)) throw ConfigError("config: unknown key '" + key + "'");

    TrainConfig cfg;
    cfg.net.num_layers = get<int>(j, "layers");
    cfg.net.channels = get<std::vector<int>>(j, "channels");
    cfg.net.kernel_size = get<int>(j, "kernel_size");
    cfg.net.input_channels = get<int>(j, "input_channels");
    cfg.net.height = get<int>(j, "height");
    cfg.net.width = get<int>(j, "width");
    cfg.net.schedule = parse_schedule(get<std::string>(j, "schedule"));
    cfg.net.upward_content = parse_content(get<std::string>(j, "upward_content"));
    cfg.net.upward_weighting = parse_weighting(get<std::string>(j, "upward_weighting"));
    cfg.net.p = get<double>(j, "p");
    cfg.loss.p = cfg.net.p;
    cfg.loss.lambda0 = get<double>(j, "lambda0");
    cfg.net.lambda0 = cfg.loss.lambda0;
    cfg.loss.detach_weight = get<bool>(j, "detach_weight");
    cfg.loss.scope = parse_scope(get<std::string>(j, "layer_scope"));
    cfg.epochs = get<int>(j, "epochs");
    cfg.learning_rate = get<double>(j, "learning_rate");
    cfg.batch_size = get<int>(j, "batch_size");
    cfg.seed = get<uint64_t>(j, "seed");
    cfg.clip_norm = get<double>(j, "clip_norm");
    cfg.seq_len = get<int>(j, "seq_len");
    cfg.num_sequences = get<int>(j, "num_sequences");
    cfg.num_shapes = get<int>(j, "num_shapes");
    cfg.speed_min = get<int>(j, "speed_min");
    cfg.speed_max = get<int>(j, "speed_max");
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("config: cannot open '" + file.string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_train_config(text);
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;  // key-sorted by construction order below
    j["batch_size"] = cfg.batch_size;
    j["channels"] = cfg.net.channels;
    j["clip_norm"] = cfg.clip_norm;
    j["detach_weight"] = cfg.loss.detach_weight;
    j["epochs"] = cfg.epochs;
    j["height"] = cfg.net.height;
    j["input_channels"] = cfg.net.input_channels;
    j["kernel_size"] = cfg.net.kernel_size;
    j["lambda0"] = cfg.loss.lambda0;
    j["layer_scope"] = cfg.loss.scope == LayerScope::Layer0Only ? "layer0_only"
                                                                : "all_layers_mean";
    j["layers"] = cfg.net.num_layers;
    j["learning_rate"] = cfg.learning_rate;
    j["num_sequences"] = cfg.num_sequences;
    j["num_shapes"] = cfg.num_shapes;
    j["p"] = cfg.loss.p;
    j["schedule"] = cfg.net.schedule == Schedule::Pyramidal ? "pyramidal" : "synchronous";
    j["seed"] = cfg.seed;
    j["seq_len"] = cfg.seq_len;
    j["speed_max"] = cfg.speed_max;
    j["speed_min"] = cfg.speed_min;
    j["upward_content"] =
        cfg.net.upward_content == UpwardContent::ErrorAndInput ? "error_and_input" : "error_only";
    j["upward_weighting"] =
        cfg.net.upward_weighting == UpwardWeighting::Raw ? "raw" : "weighted_normalized";
    j["width"] = cfg.net.width;
    return j.dump(2);
}

void RunManifest::write(const std::filesystem::path& file) const {
    json j;
    j["command"] = command;
    j["config"] = resolved_config.empty() ? json() : json::parse(resolved_config);
    j["seed"] = seed;
    j["artifacts"] = artifacts;
    j["tool_version"] = tool_version;
    std::ofstream out(file);
    if (!out) throw IoError("manifest: cannot write '" + file.string() + "'");
    out << j.dump(2) << "\n";
}

}  // namespace ppnet
