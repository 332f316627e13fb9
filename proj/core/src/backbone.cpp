#include "ovg/backbone.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "ovg/errors.hpp"

namespace ovg {

int ImageFeaturePyramid::channels() const {
    return levels.empty() ? 0 : static_cast<int>(levels.front().features.cols());
}

int ImageFeaturePyramid::num_tokens() const {
    int total = 0;
    for (const auto& l : levels) total += l.height * l.width;
    return total;
}

void ImageFeaturePyramid::validate() const {
    if (levels.empty()) throw InputError("feature pyramid has no levels");
    const int c = channels();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& l = levels[i];
        if (l.features.rows() != static_cast<Eigen::Index>(l.height) * l.width || l.features.cols() != c)
            throw InputError("feature level " + std::to_string(i) + " has inconsistent shape");
        if (i > 0 && l.stride <= levels[i - 1].stride)
            throw InputError("feature pyramid strides must strictly increase");
    }
}

Vocabulary::Vocabulary() { add(kUnkToken); }

Vocabulary::Vocabulary(const std::vector<std::string>& corpus) : Vocabulary() {
    std::vector<std::string> words;
    for (const auto& text : corpus)
        for (auto& tok : tokenize(text)) words.push_back(std::move(tok));
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (const auto& w : words) add(w);
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
    if (words.empty() || words.front() != kUnkToken)
        throw ConfigError("vocabulary must start with the unknown-word token");
    Vocabulary v;
    for (std::size_t i = 1; i < words.size(); ++i) v.add(words[i]);
    if (v.size() != static_cast<int>(words.size())) throw ConfigError("vocabulary contains duplicate words");
    return v;
}

void Vocabulary::add(const std::string& word) {
    if (ids_.emplace(word, static_cast<int>(words_.size())).second) words_.push_back(word);
}

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        std::transform(tok.begin(), tok.end(), tok.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        out.push_back(std::move(tok));
    }
    return out;
}

int Vocabulary::index(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

ImageFeaturePyramid ImageBackbone::embed_image(const Image& image) const {
    if (image.channels != 3)
        throw InputError("image backbone expects 3 channels, got " + std::to_string(image.channels));
    if (image.width != input_size() || image.height != input_size())
        throw InputError("image must be resized to " + std::to_string(input_size()) + "x" +
                         std::to_string(input_size()) + " before embedding");
    return embed(ad::constant(to_pixel_matrix(image)), image.height, image.width);
}

ToyImageBackbone::ToyImageBackbone(nn::ParamStore& store, const ModelConfig& cfg, Rng& rng)
    : image_size_(cfg.image_size) {
    for (int l = 0; l < cfg.num_feature_levels; ++l) {
        const int patch = 4 << l;
        patch_embed_.emplace_back(store, "backbone.image.level" + std::to_string(l), patch * patch * 3,
                                  cfg.feature_dim, rng);
    }
}

ImageFeaturePyramid ToyImageBackbone::embed(const ad::Var& pixels, int height, int width) const {
    if (pixels.cols() != 3) throw InputError("image backbone expects 3 channels");
    ImageFeaturePyramid pyr;
    for (std::size_t l = 0; l < patch_embed_.size(); ++l) {
        const int patch = 4 << l;
        FeatureLevel level;
        level.height = height / patch;
        level.width = width / patch;
        level.stride = patch;
        level.features = patch_embed_[l](ad::add_scalar(ad::patchify(pixels, height, width, 3, patch), -0.5));
        pyr.levels.push_back(std::move(level));
    }
    return pyr;
}

ToyTextBackbone::ToyTextBackbone(nn::ParamStore& store, const ModelConfig& cfg, const Vocabulary& vocab,
                                 Rng& rng)
    : vocab_(vocab), max_len_(cfg.max_text_len) {
    ad::Matrix tokens(vocab.size(), cfg.feature_dim);
    for (Eigen::Index i = 0; i < tokens.size(); ++i) tokens.data()[i] = normal(rng, 0.0, 1.0);
    ad::Matrix pos(cfg.max_text_len, cfg.feature_dim);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = normal(rng, 0.0, 0.1);
    token_table_ = store.add("backbone.text.tokens", std::move(tokens));
    position_table_ = store.add("backbone.text.positions", std::move(pos));
}

TextTokens ToyTextBackbone::embed(const std::string& expression) const {
    auto tokens = Vocabulary::tokenize(expression);
    if (tokens.empty()) throw InputError("expression is empty");
    if (static_cast<int>(tokens.size()) > max_len_) tokens.resize(static_cast<std::size_t>(max_len_));
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab_.index(t));
    TextTokens out;
    out.embeddings = ad::add(ad::gather_rows(token_table_, ids),
                             ad::slice_rows(position_table_, 0, static_cast<Eigen::Index>(ids.size())));
    out.mask.assign(tokens.size(), true);
    out.tokens = std::move(tokens);
    return out;
}

BackboneFactories BackboneFactories::toy() {
    BackboneFactories f;
    f.image = [](nn::ParamStore& s, const ModelConfig& c, Rng& r) -> std::unique_ptr<ImageBackbone> {
        return std::make_unique<ToyImageBackbone>(s, c, r);
    };
    f.text = [](nn::ParamStore& s, const ModelConfig& c, const Vocabulary& v,
                Rng& r) -> std::unique_ptr<TextBackbone> { return std::make_unique<ToyTextBackbone>(s, c, v, r); };
    return f;
}

BackboneFactories BackboneFactories::for_config(const ModelConfig& cfg) {
    if (cfg.backbone == "toy") return toy();
    throw ConfigError("backbone '" + cfg.backbone +
                      "' has no built-in implementation; supply BackboneFactories explicitly");
}

}  // namespace ovg
