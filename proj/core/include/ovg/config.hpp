#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace ovg {

enum class UpdateNorm { layer, l2 };
enum class TiqsInput { pre_lgfa, post_lgfa };

/// Model, loss and training hyper-parameters. Every field is addressable by
/// its name in a flat `key = value` file.
struct ModelConfig {
    int feature_dim = 256;
    int num_encoder_layers = 6;
    int num_text_layers = 6;
    int num_decoder_layers = 6;
    int num_heads = 8;
    int top_k = 100;
    double beta = 0.7;
    double temperature = 0.07;
    double lambda_l1 = 5.0;
    double lambda_giou = 2.0;
    double lambda_cts = 2.0;
    int image_size = 640;
    int max_text_len = 256;
    int num_feature_levels = 4;
    std::uint64_t seed = 42;

    // Architecture switches.
    std::string backbone = "toy";
    int ffn_dim = 1024;
    UpdateNorm update_norm = UpdateNorm::layer;
    TiqsInput tiqs_input = TiqsInput::pre_lgfa;
    bool contrastive_symmetric = false;
    bool aux_loss = false;

    // Optimization.
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    int batch_size = 16;
    int train_steps = 10000;
    double max_grad_norm = 0.1;

    /// Desk-scale profile used by the overfit tests and `train --toy`.
    static ModelConfig toy();

    /// Throws ConfigError on the first violated constraint.
    void validate() const;

    /// Number of fusion rounds between image and text streams.
    int fusion_rounds() const;

    /// Total flattened image tokens produced by the toy patch pyramid.
    int num_image_tokens() const;

    std::map<std::string, std::string> to_map() const;
    std::string to_text() const;

    /// Overrides fields from `key = value` lines; unknown keys are an error.
    void apply(const std::map<std::string, std::string>& kv);
    void set(const std::string& key, const std::string& value);

    bool operator==(const ModelConfig&) const = default;
};

std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Loads a flat key-value file on top of `base`.
ModelConfig load_config(const std::filesystem::path& path, ModelConfig base = {});

}  // namespace ovg
