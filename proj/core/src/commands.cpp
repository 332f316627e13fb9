#include "ovg/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ovg/checkpoint.hpp"
#include "ovg/errors.hpp"
#include "ovg/evaluate.hpp"
#include "ovg/train.hpp"

namespace ovg::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("failed writing " + path.string());
}

/// Maps the error taxonomy onto exit codes.
template <typename Fn>
int guarded(std::ostream& err, const char* command, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        err << command << ": " << e.what() << "\n";
        return kInvalidInput;
    } catch (const ConfigError& e) {
        err << command << ": config error: " << e.what() << "\n";
        return kConfigMismatch;
    } catch (const Error& e) {
        err << command << ": " << e.what() << "\n";
        return kInvalidInput;
    } catch (const std::exception& e) {
        err << command << ": unexpected failure: " << e.what() << "\n";
        return kInvalidInput;
    }
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

ModelConfig resolve_config(const std::optional<fs::path>& path, bool toy) {
    ModelConfig cfg = toy ? ModelConfig::toy() : ModelConfig{};
    if (path) cfg = load_config(*path, cfg);
    if (const char* seed = std::getenv("OVG_SEED"); seed && *seed) cfg.set("seed", seed);
    cfg.validate();
    return cfg;
}

int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "train", [&] {
        const ModelConfig cfg = resolve_config(args.config, args.toy);
        const DatasetManifest manifest = load_vg_manifest(args.data);
        const auto samples = load_grounding_samples(args.data, manifest, cfg.image_size);
        if (samples.empty()) throw InputError("manifest has no records");
        fs::create_directories(args.out);

        const auto start = std::chrono::steady_clock::now();
        Grounder model(cfg, build_vocabulary(samples));
        out << "training on " << samples.size() << " samples, " << model.params().num_scalars()
            << " parameters, " << cfg.train_steps << " steps\n";
        RunRecord record;
        record.config = cfg;
        record.seed = cfg.seed;
        record.steps = train(model, samples, [&](const StepLog& log) {
            if (args.log_every > 0 && (log.step % args.log_every == 0 || log.step + 1 == cfg.train_steps))
                out << "step " << log.step << " loss " << fixed(log.loss, 5) << " (giou " << fixed(log.giou, 4)
                    << ", l1 " << fixed(log.l1, 4) << ", cts " << fixed(log.cts, 4) << ")\n"
                    << std::flush;
        });
        record.final_report = evaluate_grounding(ModelPredictor(model), samples).report;
        record.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        write_text(args.out / "run_record.json", record.to_json());
        save_checkpoint(model, args.out / "checkpoint.json");
        write_text(args.out / "config.txt", cfg.to_text());
        out << "training-set Acc50 " << fixed(record.final_report.acc50()) << " (" << record.final_report.correct
            << "/" << record.final_report.total << "), " << fixed(record.wall_clock_seconds, 1) << " s\n";
        return static_cast<int>(kOk);
    });
}

int run_eval(const fs::path& checkpoint, const fs::path& data, const fs::path& out_dir, std::ostream& out,
             std::ostream& err) {
    return guarded(err, "eval", [&] {
        const std::string text = read_text(checkpoint);
        std::unique_ptr<Grounder> model;
        std::unique_ptr<Predictor> predictor;
        if (checkpoint_kind(text) == CheckpointKind::oracle) {
            predictor = std::make_unique<OraclePredictor>(checkpoint_config(text).image_size);
        } else {
            model = parse_checkpoint(text);
            predictor = std::make_unique<ModelPredictor>(*model);
        }
        const DatasetManifest manifest = load_manifest(data);
        fs::create_directories(out_dir);
        Evaluation ev;
        if (manifest.kind == ManifestKind::vg) {
            ev = evaluate_grounding(*predictor, load_grounding_samples(data, manifest, predictor->input_size()));
        } else {
            ev.report = evaluate_phrases(*predictor, load_phrase_samples(data, manifest, predictor->input_size()));
        }
        write_text(out_dir / "report.json", ev.report.to_json());
        write_text(out_dir / "predictions.json", ev.predictions_json());
        if (manifest.kind == ManifestKind::vg)
            out << "Acc50 " << fixed(ev.report.acc50()) << " (" << ev.report.correct << "/" << ev.report.total
                << ")\n";
        else
            out << "R@1/5/10 base " << fixed(ev.report.pl_base.recall(0)) << "/" << fixed(ev.report.pl_base.recall(1))
                << "/" << fixed(ev.report.pl_base.recall(2)) << ", novel " << fixed(ev.report.pl_novel.recall(0))
                << "/" << fixed(ev.report.pl_novel.recall(1)) << "/" << fixed(ev.report.pl_novel.recall(2)) << "\n";
        return static_cast<int>(kOk);
    });
}

int run_verify(const fs::path& train, const fs::path& eval, const std::optional<fs::path>& report_path,
               std::ostream& out, std::ostream& err) {
    return guarded(err, "verify", [&] {
        const DatasetManifest a = load_manifest(train);
        const DatasetManifest b = load_manifest(eval);
        const DisjointnessReport report = check_disjointness(a, b);
        const std::string text = report.to_json();
        out << text;
        write_text(report_path.value_or("disjointness_report.json"), text);
        return static_cast<int>(report.pass() ? kOk : kCheckFailed);
    });
}

namespace {

std::string bucket_chart(const EvalReport& r) {
    constexpr int W = 360, H = 240, left = 48, bottom = 200, top = 20, bar = 60;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
        << W << " " << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"14\" font-size=\"12\" text-anchor=\"middle\">Acc50 by box size</text>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << W - 10 << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";
    for (int pct = 0; pct <= 100; pct += 25) {
        const double y = bottom - (bottom - top) * pct / 100.0;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y + 4, 1) << "\" font-size=\"10\" text-anchor=\"end\">"
            << pct << "</text>\n";
    }
    int i = 0;
    for (auto b : {SizeBucket::small, SizeBucket::middle, SizeBucket::large}) {
        const BucketStat& s = r.bucket(b);
        const double h = (bottom - top) * s.accuracy() / 100.0;
        const int x = left + 20 + i * (bar + 30);
        svg << "<rect x=\"" << x << "\" y=\"" << fixed(bottom - h, 2) << "\" width=\"" << bar << "\" height=\""
            << fixed(h, 2) << "\" fill=\"#4a78b5\"/>\n";
        svg << "<text x=\"" << x + bar / 2 << "\" y=\"" << bottom + 14 << "\" font-size=\"11\" text-anchor=\"middle\">"
            << to_string(b) << " (n=" << s.total << ")</text>\n";
        svg << "<text x=\"" << x + bar / 2 << "\" y=\"" << fixed(bottom - h - 4, 2)
            << "\" font-size=\"10\" text-anchor=\"middle\">" << fixed(s.accuracy()) << "</text>\n";
        ++i;
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string size_scatter(const std::vector<SamplePrediction>& preds) {
    constexpr int W = 360, H = 360, pad = 40;
    double extent = 128.0;
    for (const auto& p : preds) extent = std::max({extent, p.gt.width(), p.gt.height()});
    const double span = W - 2 * pad;
    auto px = [&](double v) { return pad + span * v / extent; };
    auto py = [&](double v) { return H - pad - span * v / extent; };
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
        << W << " " << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"16\" font-size=\"12\" text-anchor=\"middle\">Ground-truth box width vs height (px)</text>\n";
    svg << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << W - pad << "\" y=\"" << H - pad + 14 << "\" font-size=\"10\" text-anchor=\"end\">"
        << fixed(extent, 0) << "</text>\n";
    svg << "<text x=\"" << pad - 4 << "\" y=\"" << pad + 4 << "\" font-size=\"10\" text-anchor=\"end\">"
        << fixed(extent, 0) << "</text>\n";
    // Iso-area curves at the bucket boundaries.
    for (double area : {kSmallArea, kLargeArea}) {
        svg << "<polyline fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\" points=\"";
        for (int i = 0; i <= 64; ++i) {
            const double w = std::sqrt(area) / 4.0 + (extent - std::sqrt(area) / 4.0) * i / 64.0;
            const double h = area / w;
            if (h > extent) continue;
            svg << fixed(px(w), 2) << "," << fixed(py(h), 2) << " ";
        }
        svg << "\"/>\n";
    }
    for (const auto& p : preds)
        svg << "<circle cx=\"" << fixed(px(p.gt.width()), 2) << "\" cy=\"" << fixed(py(p.gt.height()), 2)
            << "\" r=\"2.5\" fill=\"" << (p.correct ? "#2e8b57" : "#c0392b") << "\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::string accuracy_table(const EvalReport& r) {
    std::ostringstream t;
    char line[160];
    t << "Visual grounding (Acc50, IoU >= 0.5, predictions "
      << (r.clipped_predictions ? "clipped to image" : "unclipped") << ")\n";
    std::snprintf(line, sizeof(line), "%-10s %10s %10s %10s %10s\n", "", "Small", "Middle", "Large", "Acc50");
    t << line;
    std::snprintf(line, sizeof(line), "%-10s %10s %10s %10s %10s\n", "accuracy",
                  fixed(r.bucket(SizeBucket::small).accuracy()).c_str(),
                  fixed(r.bucket(SizeBucket::middle).accuracy()).c_str(),
                  fixed(r.bucket(SizeBucket::large).accuracy()).c_str(), fixed(r.acc50()).c_str());
    t << line;
    std::snprintf(line, sizeof(line), "%-10s %10d %10d %10d %10d\n", "correct", r.bucket(SizeBucket::small).correct,
                  r.bucket(SizeBucket::middle).correct, r.bucket(SizeBucket::large).correct, r.correct);
    t << line;
    std::snprintf(line, sizeof(line), "%-10s %10d %10d %10d %10d\n", "count", r.bucket(SizeBucket::small).total,
                  r.bucket(SizeBucket::middle).total, r.bucket(SizeBucket::large).total, r.total);
    t << line;
    t << "\nPhrase localization (Recall@k)\n";
    std::snprintf(line, sizeof(line), "%-10s %10s %10s %10s %10s\n", "", "R@1", "R@5", "R@10", "phrases");
    t << line;
    for (const auto& [name, s] : {std::pair<const char*, const RecallStat&>{"base", r.pl_base}, {"novel", r.pl_novel}}) {
        std::snprintf(line, sizeof(line), "%-10s %10s %10s %10s %10d\n", name, fixed(s.recall(0)).c_str(),
                      fixed(s.recall(1)).c_str(), fixed(s.recall(2)).c_str(), s.phrases);
        t << line;
    }
    return t.str();
}

}  // namespace

int run_report(const fs::path& report, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, "report", [&] {
        const EvalReport r = EvalReport::from_json(read_text(report));
        const fs::path dump = report.parent_path() / "predictions.json";
        if (!fs::exists(dump)) throw InputError("prediction dump not found: " + dump.string());
        const auto preds = parse_predictions(read_text(dump));
        fs::create_directories(out_dir);
        write_text(out_dir / "bbox_size_scatter.svg", size_scatter(preds));
        write_text(out_dir / "bucket_accuracy.svg", bucket_chart(r));
        write_text(out_dir / "accuracy_table.txt", accuracy_table(r));
        out << "wrote " << (out_dir / "bbox_size_scatter.svg").string() << ", "
            << (out_dir / "bucket_accuracy.svg").string() << ", " << (out_dir / "accuracy_table.txt").string() << "\n";
        return static_cast<int>(kOk);
    });
}

int run_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, "synth", [&] {
        const SyntheticDataset ds = args.phrases ? generate_synthetic_pl(args.count, args.options, args.seed)
                                                 : generate_synthetic(args.count, args.options, args.seed);
        const fs::path manifest = write_dataset(ds, args.out);
        out << "wrote " << ds.manifest.size() << " records to " << manifest.string() << "\n";
        return static_cast<int>(kOk);
    });
}

}  // namespace ovg::cli
