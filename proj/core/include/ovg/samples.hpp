#pragma once

#include <map>
#include <string>
#include <vector>

#include "ovg/box.hpp"

namespace ovg {

/// One visual-grounding instance: an expression referring to a single box.
struct GroundingSample {
    std::string image_id;
    int image_width = 0;
    int image_height = 0;
    std::string expression;
    BBox target;
    std::string category;
    bool is_novel = false;

    bool operator==(const GroundingSample&) const = default;
};

/// Character span of a noun-phrase chunk, linked to a coreference chain.
struct PhraseChunk {
    int start = 0;  // inclusive
    int end = 0;    // exclusive
    int chain = 0;

    bool operator==(const PhraseChunk&) const = default;
};

/// One phrase-localization sentence with its chunks and coreference chains.
/// Chains may carry no boxes (scenes, events).
struct PLSample {
    std::string image_id;
    std::string sentence;
    bool uses_novel = false;
    std::vector<PhraseChunk> chunks;
    std::map<int, std::vector<BBox>> chains;

    std::string chunk_text(const PhraseChunk& c) const {
        return sentence.substr(static_cast<std::size_t>(c.start),
                               static_cast<std::size_t>(c.end - c.start));
    }

    bool operator==(const PLSample&) const = default;
};

}  // namespace ovg
