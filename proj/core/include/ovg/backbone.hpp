#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ovg/config.hpp"
#include "ovg/image.hpp"
#include "ovg/nn.hpp"

namespace ovg {

/// One (H, W, C) grid of a feature pyramid, stored flattened as (H*W, C).
struct FeatureLevel {
    int height = 0;
    int width = 0;
    int stride = 0;
    ad::Var features;
};

/// Pre-encoder image features; strides strictly increase with level.
struct ImageFeaturePyramid {
    std::vector<FeatureLevel> levels;

    int channels() const;
    int num_tokens() const;
    /// Throws InputError if levels disagree on channels, strides do not
    /// strictly increase, or a level's matrix does not match its grid.
    void validate() const;
};

/// Backbone text features. Masked positions have zero embeddings.
struct TextTokens {
    ad::Var embeddings;  // (L, C)
    ad::KeyMask mask;
    std::vector<std::string> tokens;

    int length() const { return static_cast<int>(tokens.size()); }
};

/// Lowercase whitespace tokenizer with a reserved unknown-word row at index 0.
class Vocabulary {
public:
    static constexpr int kUnk = 0;
    static constexpr const char* kUnkToken = "<unk>";

    Vocabulary();
    explicit Vocabulary(const std::vector<std::string>& corpus);

    static std::vector<std::string> tokenize(const std::string& text);
    static Vocabulary from_words(const std::vector<std::string>& words);

    int index(const std::string& token) const;
    int size() const { return static_cast<int>(words_.size()); }
    const std::vector<std::string>& words() const { return words_; }

    bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

private:
    void add(const std::string& word);

    std::vector<std::string> words_;
    std::unordered_map<std::string, int> ids_;
};

class ImageBackbone {
public:
    virtual ~ImageBackbone() = default;

    /// `pixels` is an (H*W, 3) matrix in raster order.
    virtual ImageFeaturePyramid embed(const ad::Var& pixels, int height, int width) const = 0;

    /// Convenience wrapper; the image must already be resized to the model
    /// input size and carry exactly 3 channels.
    ImageFeaturePyramid embed_image(const Image& image) const;

    virtual int input_size() const = 0;
};

class TextBackbone {
public:
    virtual ~TextBackbone() = default;

    /// Throws InputError on empty or whitespace-only text.
    virtual TextTokens embed(const std::string& expression) const = 0;
};

/// Strided linear patch embedding per pyramid level (stride 4 * 2^l).
class ToyImageBackbone final : public ImageBackbone {
public:
    ToyImageBackbone(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng);

    ImageFeaturePyramid embed(const ad::Var& pixels, int height, int width) const override;
    int input_size() const override { return image_size_; }

private:
    int image_size_;
    std::vector<nn::Linear> patch_embed_;
};

/// Learned token table plus learned positional table.
class ToyTextBackbone final : public TextBackbone {
public:
    ToyTextBackbone(nn::ParamStore& store, const ModelConfig& cfg, const Vocabulary& vocab, Rng& rng);

    TextTokens embed(const std::string& expression) const override;

private:
    Vocabulary vocab_;
    int max_len_;
    ad::Var token_table_;
    ad::Var position_table_;
};

using ImageBackboneFactory =
    std::function<std::unique_ptr<ImageBackbone>(nn::ParamStore&, const ModelConfig&, Rng&)>;
using TextBackboneFactory =
    std::function<std::unique_ptr<TextBackbone>(nn::ParamStore&, const ModelConfig&, const Vocabulary&, Rng&)>;

/// Backbone seam selected by `ModelConfig::backbone`. The toy pair is always
/// available; "external" requires factories supplied by the caller.
struct BackboneFactories {
    ImageBackboneFactory image;
    TextBackboneFactory text;

    static BackboneFactories toy();
    static BackboneFactories for_config(const ModelConfig& cfg);
};

}  // namespace ovg
