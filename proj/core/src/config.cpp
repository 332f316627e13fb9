#include "ovg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ovg/errors.hpp"

namespace ovg {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

int to_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.feature_dim = 64;
    c.num_encoder_layers = 2;
    c.num_text_layers = 2;
    c.num_decoder_layers = 2;
    c.num_heads = 4;
    c.top_k = 10;
    c.image_size = 64;
    c.max_text_len = 16;
    c.num_feature_levels = 2;
    c.ffn_dim = 128;
    c.batch_size = 4;
    c.train_steps = 500;
    return c;
}

void ModelConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(feature_dim > 0, "feature_dim must be positive");
    require(num_heads > 0, "num_heads must be positive");
    require(feature_dim % num_heads == 0, "feature_dim must be divisible by num_heads");
    require(num_encoder_layers >= 1, "num_encoder_layers must be >= 1");
    require(num_text_layers >= 1, "num_text_layers must be >= 1");
    require(num_decoder_layers >= 1, "num_decoder_layers must be >= 1");
    require(num_feature_levels >= 1, "num_feature_levels must be >= 1");
    require(top_k >= 1, "top_k must be >= 1");
    require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
    require(temperature > 0.0, "temperature must be positive");
    require(lambda_l1 >= 0.0 && lambda_giou >= 0.0 && lambda_cts >= 0.0,
            "loss weights must be non-negative");
    require(image_size > 0, "image_size must be positive");
    require(max_text_len >= 1, "max_text_len must be >= 1");
    require(ffn_dim >= 1, "ffn_dim must be >= 1");
    require(backbone == "toy" || backbone == "external", "backbone must be 'toy' or 'external'");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(train_steps >= 0, "train_steps must be non-negative");
    require(max_grad_norm >= 0.0, "max_grad_norm must be non-negative");
    const int coarsest_stride = 4 << (num_feature_levels - 1);
    require(image_size % coarsest_stride == 0,
            "image_size must be divisible by the coarsest pyramid stride " +
                std::to_string(coarsest_stride));
    require(top_k <= num_image_tokens(), "top_k exceeds the number of image tokens");
}

int ModelConfig::fusion_rounds() const { return std::min(num_encoder_layers, num_text_layers); }

int ModelConfig::num_image_tokens() const {
    int total = 0;
    for (int l = 0; l < num_feature_levels; ++l) {
        const int side = image_size / (4 << l);
        total += side * side;
    }
    return total;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    return {
        {"feature_dim", std::to_string(feature_dim)},
        {"num_encoder_layers", std::to_string(num_encoder_layers)},
        {"num_text_layers", std::to_string(num_text_layers)},
        {"num_decoder_layers", std::to_string(num_decoder_layers)},
        {"num_heads", std::to_string(num_heads)},
        {"top_k", std::to_string(top_k)},
        {"beta", fmt_double(beta)},
        {"temperature", fmt_double(temperature)},
        {"lambda_l1", fmt_double(lambda_l1)},
        {"lambda_giou", fmt_double(lambda_giou)},
        {"lambda_cts", fmt_double(lambda_cts)},
        {"image_size", std::to_string(image_size)},
        {"max_text_len", std::to_string(max_text_len)},
        {"num_feature_levels", std::to_string(num_feature_levels)},
        {"seed", std::to_string(seed)},
        {"backbone", backbone},
        {"ffn_dim", std::to_string(ffn_dim)},
        {"update_norm", update_norm == UpdateNorm::layer ? "layer" : "l2"},
        {"tiqs_input", tiqs_input == TiqsInput::pre_lgfa ? "pre_lgfa" : "post_lgfa"},
        {"contrastive_symmetric", contrastive_symmetric ? "true" : "false"},
        {"aux_loss", aux_loss ? "true" : "false"},
        {"learning_rate", fmt_double(learning_rate)},
        {"weight_decay", fmt_double(weight_decay)},
        {"batch_size", std::to_string(batch_size)},
        {"train_steps", std::to_string(train_steps)},
        {"max_grad_norm", fmt_double(max_grad_norm)},
    };
}

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : to_map()) os << k << " = " << v << "\n";
    return os.str();
}

void ModelConfig::set(const std::string& key, const std::string& value) {
    if (key == "feature_dim") feature_dim = to_int(key, value);
    else if (key == "num_encoder_layers") num_encoder_layers = to_int(key, value);
    else if (key == "num_text_layers") num_text_layers = to_int(key, value);
    else if (key == "num_decoder_layers") num_decoder_layers = to_int(key, value);
    else if (key == "num_heads") num_heads = to_int(key, value);
    else if (key == "top_k") top_k = to_int(key, value);
    else if (key == "beta") beta = to_double(key, value);
    else if (key == "temperature") temperature = to_double(key, value);
    else if (key == "lambda_l1") lambda_l1 = to_double(key, value);
    else if (key == "lambda_giou") lambda_giou = to_double(key, value);
    else if (key == "lambda_cts") lambda_cts = to_double(key, value);
    else if (key == "image_size") image_size = to_int(key, value);
    else if (key == "max_text_len") max_text_len = to_int(key, value);
    else if (key == "num_feature_levels") num_feature_levels = to_int(key, value);
    else if (key == "seed") seed = to_u64(key, value);
    else if (key == "backbone") backbone = value;
    else if (key == "ffn_dim") ffn_dim = to_int(key, value);
    else if (key == "update_norm") {
        if (value == "layer") update_norm = UpdateNorm::layer;
        else if (value == "l2") update_norm = UpdateNorm::l2;
        else throw ConfigError("update_norm must be 'layer' or 'l2'");
    } else if (key == "tiqs_input") {
        if (value == "pre_lgfa") tiqs_input = TiqsInput::pre_lgfa;
        else if (value == "post_lgfa") tiqs_input = TiqsInput::post_lgfa;
        else throw ConfigError("tiqs_input must be 'pre_lgfa' or 'post_lgfa'");
    } else if (key == "contrastive_symmetric") contrastive_symmetric = to_bool(key, value);
    else if (key == "aux_loss") aux_loss = to_bool(key, value);
    else if (key == "learning_rate") learning_rate = to_double(key, value);
    else if (key == "weight_decay") weight_decay = to_double(key, value);
    else if (key == "batch_size") batch_size = to_int(key, value);
    else if (key == "train_steps") train_steps = to_int(key, value);
    else if (key == "max_grad_norm") max_grad_norm = to_double(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

void ModelConfig::apply(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) set(k, v);
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

ModelConfig load_config(const std::filesystem::path& path, ModelConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    base.apply(parse_key_values(buf.str()));
    base.validate();
    return base;
}

}  // namespace ovg
