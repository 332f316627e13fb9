#include "ovg/metrics.hpp"

#include <algorithm>
#include <json.hpp>

#include "ovg/errors.hpp"

namespace ovg {

const char* to_string(SizeBucket b) {
    switch (b) {
        case SizeBucket::small: return "small";
        case SizeBucket::middle: return "middle";
        case SizeBucket::large: return "large";
    }
    return "middle";
}

SizeBucket bucket_from_string(const std::string& s) {
    if (s == "small") return SizeBucket::small;
    if (s == "middle") return SizeBucket::middle;
    if (s == "large") return SizeBucket::large;
    throw InputError("unknown size bucket '" + s + "'");
}

double iou(const BBox& a, const BBox& b) {
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

SizeBucket size_bucket(const BBox& gt) {
    const double area = gt.area();
    if (area < kSmallArea) return SizeBucket::small;
    if (area > kLargeArea) return SizeBucket::large;
    return SizeBucket::middle;
}

bool is_correct(double iou_value) { return iou_value >= kAccThreshold; }

EvalReport acc50(std::span<const BBox> preds, std::span<const BBox> gts) {
    if (preds.size() != gts.size())
        throw InputError("acc50: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(gts.size()) + " targets");
    EvalReport r;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool ok = is_correct(iou(preds[i], gts[i]));
        auto& b = r.buckets[static_cast<std::size_t>(size_bucket(gts[i]))];
        ++b.total;
        ++r.total;
        if (ok) {
            ++b.correct;
            ++r.correct;
        }
    }
    return r;
}

void accumulate_recall(const PLSample& sample, std::span<const PhrasePrediction> predictions, EvalReport& report) {
    RecallStat& stat = sample.uses_novel ? report.pl_novel : report.pl_base;
    for (const auto& p : predictions) {
        if (p.chunk < 0 || p.chunk >= static_cast<int>(sample.chunks.size()))
            throw InputError("phrase prediction refers to a missing chunk");
        const auto chain = sample.chains.find(sample.chunks[static_cast<std::size_t>(p.chunk)].chain);
        if (chain == sample.chains.end() || chain->second.empty()) continue;
        int first_hit = -1;
        for (std::size_t r = 0; r < p.ranked.size() && first_hit < 0; ++r)
            for (const auto& gt : chain->second)
                if (is_correct(iou(p.ranked[r], gt))) {
                    first_hit = static_cast<int>(r);
                    break;
                }
        ++stat.phrases;
        for (std::size_t s = 0; s < kRecallKs.size(); ++s)
            if (first_hit >= 0 && first_hit < kRecallKs[s]) ++stat.hits[s];
    }
}

std::array<double, 3> recall_at_k(std::span<const PLSample> samples,
                                  std::span<const std::vector<PhrasePrediction>> predictions) {
    if (samples.size() != predictions.size()) throw InputError("recall_at_k: one prediction list per sentence required");
    EvalReport r;
    for (std::size_t i = 0; i < samples.size(); ++i) accumulate_recall(samples[i], predictions[i], r);
    RecallStat pooled;
    pooled.phrases = r.pl_base.phrases + r.pl_novel.phrases;
    for (std::size_t s = 0; s < 3; ++s) pooled.hits[s] = r.pl_base.hits[s] + r.pl_novel.hits[s];
    return {pooled.recall(0), pooled.recall(1), pooled.recall(2)};
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["clip_policy"] = clipped_predictions ? "clip_to_image" : "none";
    j["iou_threshold"] = kAccThreshold;
    j["threshold_inclusive"] = true;
    for (auto b : {SizeBucket::small, SizeBucket::middle, SizeBucket::large}) {
        const std::string n = to_string(b);
        j[n + "_acc"] = bucket(b).accuracy();
        j[n + "_correct"] = bucket(b).correct;
        j[n + "_count"] = bucket(b).total;
    }
    j["acc50"] = acc50();
    j["correct"] = correct;
    j["total"] = total;
    const auto put = [&](const std::string& prefix, const RecallStat& s) {
        j[prefix + "_phrases"] = s.phrases;
        for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
            j[prefix + "_r" + std::to_string(kRecallKs[i])] = s.recall(static_cast<int>(i));
            j[prefix + "_hits" + std::to_string(kRecallKs[i])] = s.hits[i];
        }
    };
    put("pl_base", pl_base);
    put("pl_novel", pl_novel);
    return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("eval report: ") + e.what());
    }
    EvalReport r;
    try {
        r.clipped_predictions = j.at("clip_policy").get<std::string>() == "clip_to_image";
        for (auto b : {SizeBucket::small, SizeBucket::middle, SizeBucket::large}) {
            const std::string n = to_string(b);
            auto& s = r.buckets[static_cast<std::size_t>(b)];
            s.correct = j.at(n + "_correct").get<int>();
            s.total = j.at(n + "_count").get<int>();
        }
        r.correct = j.at("correct").get<int>();
        r.total = j.at("total").get<int>();
        const auto get = [&](const std::string& prefix, RecallStat& s) {
            s.phrases = j.at(prefix + "_phrases").get<int>();
            for (std::size_t i = 0; i < kRecallKs.size(); ++i)
                s.hits[i] = j.at(prefix + "_hits" + std::to_string(kRecallKs[i])).get<int>();
        };
        get("pl_base", r.pl_base);
        get("pl_novel", r.pl_novel);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("eval report is missing fields: ") + e.what());
    }
    return r;
}

}  // namespace ovg
