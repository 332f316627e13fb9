#include "ovg/evaluate.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>

#include "ovg/errors.hpp"

namespace ovg {

std::vector<BBox> ModelPredictor::rank(const PredictInput& in) const {
    ad::NoGradGuard guard;
    const ForwardResult r = model_->forward_pixels(in.pixels, in.text, in.width, in.height);
    const LayerPrediction& last = r.output.final_layer();
    std::vector<int> order(last.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return last.scores[static_cast<std::size_t>(a)] > last.scores[static_cast<std::size_t>(b)]; });
    std::vector<BBox> out;
    out.reserve(order.size());
    for (int i : order) out.push_back(norm_to_bbox(last.boxes[static_cast<std::size_t>(i)], in.width, in.height));
    return out;
}

std::vector<BBox> OraclePredictor::rank(const PredictInput& in) const {
    if (in.truth.empty()) return {BBox{0.0, 0.0, in.width, in.height}};
    return in.truth;
}

Evaluation evaluate_grounding(const Predictor& predictor, const std::vector<TrainingSample>& samples) {
    Evaluation ev;
    std::vector<BBox> preds, gts;
    for (const auto& s : samples) {
        const std::vector<BBox> truth{s.target};
        const auto ranked = predictor.rank({s.pixels, s.width, s.height, s.expression, truth});
        if (ranked.empty()) throw InputError("predictor returned no boxes for " + s.image_id);
        SamplePrediction p;
        p.image_id = s.image_id;
        p.pred = clip_to_image(ranked.front(), s.width, s.height);
        p.gt = s.target;
        p.iou = iou(p.pred, p.gt);
        p.bucket = size_bucket(p.gt);
        p.correct = is_correct(p.iou);
        preds.push_back(p.pred);
        gts.push_back(p.gt);
        ev.predictions.push_back(p);
    }
    ev.report = acc50(preds, gts);
    ev.report.clipped_predictions = true;
    return ev;
}

EvalReport evaluate_phrases(const Predictor& predictor, const std::vector<PhraseSample>& samples) {
    EvalReport report;
    for (const auto& ps : samples) {
        std::vector<PhrasePrediction> phrases;
        for (std::size_t c = 0; c < ps.sample.chunks.size(); ++c) {
            const PhraseChunk& chunk = ps.sample.chunks[c];
            const std::string text = ps.sample.sentence.substr(static_cast<std::size_t>(chunk.start),
                                                               static_cast<std::size_t>(chunk.end - chunk.start));
            const auto& truth = ps.sample.chains.at(chunk.chain);
            PhrasePrediction pp;
            pp.chunk = static_cast<int>(c);
            for (const auto& b : predictor.rank({ps.pixels, ps.width, ps.height, text, truth}))
                pp.ranked.push_back(clip_to_image(b, ps.width, ps.height));
            phrases.push_back(std::move(pp));
        }
        accumulate_recall(ps.sample, phrases, report);
    }
    return report;
}

std::string Evaluation::predictions_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : predictions) {
        arr.push_back({{"image_id", p.image_id},
                       {"pred_bbox", {p.pred.x1, p.pred.y1, p.pred.x2, p.pred.y2}},
                       {"gt_bbox", {p.gt.x1, p.gt.y1, p.gt.x2, p.gt.y2}},
                       {"iou", p.iou},
                       {"bucket", to_string(p.bucket)},
                       {"correct", p.correct}});
    }
    return arr.dump(2) + "\n";
}

std::vector<SamplePrediction> parse_predictions(const std::string& json_text) {
    std::vector<SamplePrediction> out;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed prediction dump: ") + e.what());
    }
    if (!j.is_array()) throw InputError("prediction dump must be a JSON array");
    auto box = [](const nlohmann::json& v, const std::string& where) {
        if (!v.is_array() || v.size() != 4) throw InputError(where + " must be [x1, y1, x2, y2]");
        return BBox{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
    };
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        const std::string where = "prediction " + std::to_string(i);
        for (const char* key : {"image_id", "pred_bbox", "gt_bbox", "iou", "bucket", "correct"})
            if (!e.contains(key)) throw InputError(where + ": field '" + key + "' is missing");
        try {
            SamplePrediction p;
            p.image_id = e["image_id"].get<std::string>();
            p.pred = box(e["pred_bbox"], where + ": field 'pred_bbox'");
            p.gt = box(e["gt_bbox"], where + ": field 'gt_bbox'");
            p.iou = e["iou"].get<double>();
            p.bucket = bucket_from_string(e["bucket"].get<std::string>());
            p.correct = e["correct"].get<bool>();
            out.push_back(p);
        } catch (const nlohmann::json::exception& ex) {
            throw InputError(where + ": " + ex.what());
        }
    }
    return out;
}

namespace {

Image load_checked(const std::filesystem::path& manifest_path, const DatasetManifest& m, const std::string& id,
                   int width, int height) {
    Image img = load_ppm(image_path(manifest_path, m, id));
    if (width > 0 && (img.width != width || img.height != height))
        throw InputError("image '" + id + "' is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         " but the record says " + std::to_string(width) + "x" + std::to_string(height));
    return img;
}

}  // namespace

std::vector<TrainingSample> load_grounding_samples(const std::filesystem::path& manifest_path,
                                                   const DatasetManifest& m, int input_size) {
    if (m.kind != ManifestKind::vg) throw InputError("expected a grounding manifest");
    std::vector<TrainingSample> out;
    out.reserve(m.vg.size());
    for (const auto& s : m.vg) {
        const Image img = load_checked(manifest_path, m, s.image_id, s.image_width, s.image_height);
        out.push_back({s.image_id, prepare_pixels(img, input_size), static_cast<double>(s.image_width),
                       static_cast<double>(s.image_height), s.expression, s.target});
    }
    return out;
}

std::vector<PhraseSample> load_phrase_samples(const std::filesystem::path& manifest_path, const DatasetManifest& m,
                                              int input_size) {
    if (m.kind != ManifestKind::pl) throw InputError("expected a phrase-localization manifest");
    std::map<std::string, std::pair<ad::Matrix, std::pair<int, int>>> cache;
    std::vector<PhraseSample> out;
    for (const auto& s : m.pl) {
        auto it = cache.find(s.image_id);
        if (it == cache.end()) {
            const Image img = load_checked(manifest_path, m, s.image_id, 0, 0);
            it = cache.emplace(s.image_id, std::make_pair(prepare_pixels(img, input_size),
                                                          std::make_pair(img.width, img.height)))
                     .first;
        }
        out.push_back({s, it->second.first, static_cast<double>(it->second.second.first),
                       static_cast<double>(it->second.second.second)});
    }
    return out;
}

std::vector<TrainingSample> grounding_samples(const SyntheticDataset& ds, int input_size) {
    std::vector<TrainingSample> out;
    for (const auto& s : ds.manifest.vg)
        out.push_back({s.image_id, prepare_pixels(ds.images.at(s.image_id), input_size),
                       static_cast<double>(s.image_width), static_cast<double>(s.image_height), s.expression,
                       s.target});
    return out;
}

}  // namespace ovg
