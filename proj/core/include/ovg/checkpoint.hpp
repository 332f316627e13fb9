#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "ovg/config.hpp"
#include "ovg/model.hpp"

namespace ovg {

/// Flat named-parameter archive with the config and vocabulary embedded.
std::string serialize_checkpoint(const Grounder& model);
void save_checkpoint(const Grounder& model, const std::filesystem::path& path);

/// Rebuilds the model from the embedded config, then loads every parameter.
/// A missing, extra or mis-shaped parameter throws ConfigError.
std::unique_ptr<Grounder> parse_checkpoint(const std::string& text);

/// Copies parameter values from `text` into `model`; the names and shapes
/// must match exactly (ConfigError otherwise).
void load_weights(Grounder& model, const std::string& text);

enum class CheckpointKind { model, oracle };

/// Reads only the header. Malformed JSON throws ParseError.
CheckpointKind checkpoint_kind(const std::string& text);

/// The embedded config, validated.
ModelConfig checkpoint_config(const std::string& text);

/// An oracle archive carries a config but no weights; evaluating it
/// predicts the ground truth exactly.
std::string serialize_oracle_checkpoint(const ModelConfig& cfg);

}  // namespace ovg
