#include "ovg/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "ovg/errors.hpp"

namespace ovg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "ovg-checkpoint";
constexpr int kVersion = 1;

ordered_json config_json(const ModelConfig& cfg) {
    ordered_json c = ordered_json::object();
    for (const auto& [k, v] : cfg.to_map()) c[k] = v;
    return c;
}

json parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed checkpoint: ") + e.what());
    }
    if (!j.is_object() || j.value("format", std::string{}) != kFormat)
        throw ParseError("not an ovg checkpoint (missing format tag)");
    if (j.value("version", 0) != kVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
    return j;
}

ModelConfig read_config(const json& j) {
    if (!j.contains("config") || !j["config"].is_object()) throw ParseError("checkpoint has no config object");
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : j["config"].items()) {
        if (!v.is_string()) throw ParseError("checkpoint config value for '" + k + "' must be a string");
        kv[k] = v.get<std::string>();
    }
    ModelConfig cfg;
    cfg.apply(kv);
    cfg.validate();
    return cfg;
}

}  // namespace

std::string serialize_checkpoint(const Grounder& model) {
    ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = "model";
    j["config"] = config_json(model.config());
    j["vocabulary"] = model.vocabulary().words();
    ordered_json params = ordered_json::object();
    for (const auto& [name, p] : model.params().entries()) {
        const ad::Matrix& m = p.value();
        std::vector<double> data(static_cast<std::size_t>(m.size()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
        params[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
    }
    j["params"] = std::move(params);
    return j.dump() + "\n";
}

void save_checkpoint(const Grounder& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << serialize_checkpoint(model);
}

void load_weights(Grounder& model, const std::string& text) {
    const json j = parse(text);
    if (!j.contains("params") || !j["params"].is_object()) throw ParseError("checkpoint has no params object");
    const json& params = j["params"];
    std::set<std::string> expected;
    for (auto& [name, p] : model.params().entries()) {
        expected.insert(name);
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("checkpoint is missing parameter '" + name + "'");
        const auto rows = it->value("rows", -1L), cols = it->value("cols", -1L);
        if (rows != p.rows() || cols != p.cols())
            throw ConfigError("parameter '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " in the checkpoint but the config implies " + std::to_string(p.rows()) + "x" +
                              std::to_string(p.cols()));
        const auto& data = it->at("data");
        if (!data.is_array() || static_cast<long>(data.size()) != rows * cols)
            throw ParseError("parameter '" + name + "' has the wrong number of values");
        ad::Var v = p;
        ad::Matrix& m = v.mutable_value();
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
    }
    for (const auto& [name, _] : params.items())
        if (!expected.count(name)) throw ConfigError("checkpoint parameter '" + name + "' is not part of the model");
}

std::unique_ptr<Grounder> parse_checkpoint(const std::string& text) {
    const json j = parse(text);
    if (j.value("kind", std::string{"model"}) != "model") throw ConfigError("checkpoint does not hold model weights");
    const ModelConfig cfg = read_config(j);
    if (!j.contains("vocabulary") || !j["vocabulary"].is_array()) throw ParseError("checkpoint has no vocabulary");
    const auto vocab = Vocabulary::from_words(j["vocabulary"].get<std::vector<std::string>>());
    auto model = std::make_unique<Grounder>(cfg, vocab);
    load_weights(*model, text);
    return model;
}

CheckpointKind checkpoint_kind(const std::string& text) {
    const json j = parse(text);
    const std::string kind = j.value("kind", std::string{"model"});
    if (kind == "model") return CheckpointKind::model;
    if (kind == "oracle") return CheckpointKind::oracle;
    throw ParseError("unknown checkpoint kind '" + kind + "'");
}

ModelConfig checkpoint_config(const std::string& text) { return read_config(parse(text)); }

std::string serialize_oracle_checkpoint(const ModelConfig& cfg) {
    ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["kind"] = "oracle";
    j["config"] = config_json(cfg);
    return j.dump(2) + "\n";
}

}  // namespace ovg
