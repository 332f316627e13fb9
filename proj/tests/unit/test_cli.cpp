#include <gtest/gtest.h>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "ovg/checkpoint.hpp"
#include "ovg/commands.hpp"
#include "ovg/data.hpp"
#include "ovg/evaluate.hpp"
#include "ovg/metrics.hpp"
#include "ovg/train.hpp"

using namespace ovg;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "feature_dim = 16\nnum_heads = 2\nffn_dim = 32\ntop_k = 4\nbatch_size = 2\ntrain_steps = 3\n";

struct Workspace {
    testkit::TempDir dir{"cli"};
    fs::path data, config;
    std::ostringstream out, err;

    Workspace() {
        cli::SynthArgs s;
        s.out = dir / "data";
        s.count = 4;
        EXPECT_EQ(cli::run_synth(s, out, err), cli::kOk) << err.str();
        data = dir / "data" / "manifest.json";
        config = dir / "small.cfg";
        testkit::write_file(config, kSmallConfig);
    }

    cli::TrainArgs train_args(const std::string& out_name) const {
        cli::TrainArgs a;
        a.config = config;
        a.data = data;
        a.out = dir / out_name;
        a.toy = true;
        a.log_every = 0;
        return a;
    }
};

}  // namespace

TEST(CliTrain, WritesArtifactsAndIsDeterministic) {
    Workspace ws;
    ASSERT_EQ(cli::run_train(ws.train_args("r1"), ws.out, ws.err), cli::kOk) << ws.err.str();
    ASSERT_EQ(cli::run_train(ws.train_args("r2"), ws.out, ws.err), cli::kOk) << ws.err.str();
    for (const char* f : {"run_record.json", "checkpoint.json", "config.txt"}) EXPECT_TRUE(fs::exists(ws.dir / "r1" / f));
    const RunRecord a = RunRecord::from_json(testkit::read_file(ws.dir / "r1" / "run_record.json"));
    const RunRecord b = RunRecord::from_json(testkit::read_file(ws.dir / "r2" / "run_record.json"));
    ASSERT_EQ(a.steps.size(), 3u);
    for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].loss, b.steps[i].loss);
    EXPECT_EQ(a.config.feature_dim, 16);
    EXPECT_EQ(testkit::read_file(ws.dir / "r1" / "checkpoint.json"), testkit::read_file(ws.dir / "r2" / "checkpoint.json"));
}

TEST(CliTrain, SeedEnvironmentOverride) {
    Workspace ws;
    ::setenv("OVG_SEED", "1234", 1);
    const ModelConfig cfg = cli::resolve_config(ws.config, true);
    ::unsetenv("OVG_SEED");
    EXPECT_EQ(cfg.seed, 1234u);
    EXPECT_EQ(cfg.feature_dim, 16);
    EXPECT_EQ(cli::resolve_config(std::nullopt, true), ModelConfig::toy());
}

TEST(CliTrain, InvalidInputsExitNonzero) {
    Workspace ws;
    auto a = ws.train_args("bad");
    a.data = ws.dir / "missing.json";
    EXPECT_EQ(cli::run_train(a, ws.out, ws.err), cli::kInvalidInput);

    nlohmann::json m = nlohmann::json::parse(testkit::read_file(ws.data));
    m["records"][0]["bbox"] = {50, 50, 10, 10};
    testkit::write_file(ws.dir / "data" / "broken.json", m.dump());
    a.data = ws.dir / "data" / "broken.json";
    ws.err.str("");
    EXPECT_EQ(cli::run_train(a, ws.out, ws.err), cli::kInvalidInput);
    EXPECT_NE(ws.err.str().find("record 0"), std::string::npos) << ws.err.str();

    testkit::write_file(ws.dir / "bad.cfg", "num_heads = 5\n");
    a = ws.train_args("bad");
    a.config = ws.dir / "bad.cfg";
    EXPECT_EQ(cli::run_train(a, ws.out, ws.err), cli::kConfigMismatch);
}

TEST(CliEval, OracleAndRandomCheckpoints) {
    Workspace ws;
    const fs::path oracle = ws.dir / "oracle.json";
    testkit::write_file(oracle, serialize_oracle_checkpoint(ModelConfig::toy()));
    ASSERT_EQ(cli::run_eval(oracle, ws.data, ws.dir / "ev_oracle", ws.out, ws.err), cli::kOk) << ws.err.str();
    const EvalReport perfect = EvalReport::from_json(testkit::read_file(ws.dir / "ev_oracle" / "report.json"));
    EXPECT_EQ(perfect.acc50(), 100.0);
    for (const auto& b : perfect.buckets)
        if (b.total > 0) EXPECT_EQ(b.accuracy(), 100.0);

    ASSERT_EQ(cli::run_train(ws.train_args("run"), ws.out, ws.err), cli::kOk) << ws.err.str();
    const fs::path ckpt = ws.dir / "run" / "checkpoint.json";
    ASSERT_EQ(cli::run_eval(ckpt, ws.data, ws.dir / "ev1", ws.out, ws.err), cli::kOk) << ws.err.str();
    ASSERT_EQ(cli::run_eval(ckpt, ws.data, ws.dir / "ev2", ws.out, ws.err), cli::kOk) << ws.err.str();
    EXPECT_EQ(testkit::read_file(ws.dir / "ev1" / "report.json"), testkit::read_file(ws.dir / "ev2" / "report.json"));
    const auto dump = nlohmann::json::parse(testkit::read_file(ws.dir / "ev1" / "predictions.json"));
    ASSERT_EQ(dump.size(), 4u);
    for (const char* key : {"image_id", "pred_bbox", "iou", "bucket", "correct"}) EXPECT_TRUE(dump[0].contains(key)) << key;

    // A checkpoint whose stored config disagrees with its weights.
    nlohmann::json j = nlohmann::json::parse(testkit::read_file(ckpt));
    j["config"]["feature_dim"] = "32";
    j["config"]["ffn_dim"] = "64";
    testkit::write_file(ws.dir / "mismatch.json", j.dump());
    EXPECT_EQ(cli::run_eval(ws.dir / "mismatch.json", ws.data, ws.dir / "ev3", ws.out, ws.err), cli::kConfigMismatch);
}

TEST(CliEval, PhraseManifest) {
    Workspace ws;
    cli::SynthArgs s;
    s.out = ws.dir / "pl";
    s.count = 3;
    s.phrases = true;
    ASSERT_EQ(cli::run_synth(s, ws.out, ws.err), cli::kOk);
    testkit::write_file(ws.dir / "oracle.json", serialize_oracle_checkpoint(ModelConfig::toy()));
    ASSERT_EQ(cli::run_eval(ws.dir / "oracle.json", ws.dir / "pl" / "manifest.json", ws.dir / "ev", ws.out, ws.err),
              cli::kOk)
        << ws.err.str();
    const EvalReport r = EvalReport::from_json(testkit::read_file(ws.dir / "ev" / "report.json"));
    EXPECT_GT(r.pl_base.phrases, 0);
    EXPECT_GT(r.pl_novel.phrases, 0);
    EXPECT_EQ(r.pl_base.recall(0), 100.0);
}

TEST(CliVerify, ExitCodesAndReport) {
    Workspace ws;
    cli::SynthArgs s;
    s.out = ws.dir / "other";
    s.count = 4;
    s.seed = 7;
    s.options.split = "eval";
    ASSERT_EQ(cli::run_synth(s, ws.out, ws.err), cli::kOk);
    const fs::path other = ws.dir / "other" / "manifest.json";
    const fs::path report = ws.dir / "disjoint.json";
    EXPECT_EQ(cli::run_verify(ws.data, other, report, ws.out, ws.err), cli::kOk);
    EXPECT_TRUE(nlohmann::json::parse(testkit::read_file(report)).is_object());
    EXPECT_EQ(cli::run_verify(ws.data, ws.data, report, ws.out, ws.err), cli::kCheckFailed);
    const DatasetManifest m = load_vg_manifest(ws.data);
    EXPECT_NE(testkit::read_file(report).find(m.vg[0].image_id), std::string::npos);
    EXPECT_EQ(cli::run_verify(ws.data, ws.dir / "nope.json", report, ws.out, ws.err), cli::kInvalidInput);
}

TEST(CliReport, OutputsAreDeterministic) {
    Workspace ws;
    testkit::write_file(ws.dir / "oracle.json", serialize_oracle_checkpoint(ModelConfig::toy()));
    ASSERT_EQ(cli::run_eval(ws.dir / "oracle.json", ws.data, ws.dir / "ev", ws.out, ws.err), cli::kOk);
    ASSERT_EQ(cli::run_report(ws.dir / "ev" / "report.json", ws.dir / "rep1", ws.out, ws.err), cli::kOk) << ws.err.str();
    ASSERT_EQ(cli::run_report(ws.dir / "ev" / "report.json", ws.dir / "rep2", ws.out, ws.err), cli::kOk);
    for (const char* f : {"bbox_size_scatter.svg", "bucket_accuracy.svg", "accuracy_table.txt"}) {
        ASSERT_TRUE(fs::exists(ws.dir / "rep1" / f)) << f;
        EXPECT_EQ(testkit::read_file(ws.dir / "rep1" / f), testkit::read_file(ws.dir / "rep2" / f)) << f;
    }
}

TEST(CliReport, EmptyDumpAndMissingFields) {
    testkit::TempDir dir("report");
    testkit::write_file(dir / "report.json", EvalReport{}.to_json());
    testkit::write_file(dir / "predictions.json", "[]");
    std::ostringstream out, err;
    ASSERT_EQ(cli::run_report(dir / "report.json", dir / "out", out, err), cli::kOk) << err.str();
    const std::string table = testkit::read_file(dir / "out" / "accuracy_table.txt");
    EXPECT_NE(table.find("0"), std::string::npos);

    testkit::write_file(dir / "predictions.json", R"([{"image_id": "x"}])");
    EXPECT_EQ(cli::run_report(dir / "report.json", dir / "out", out, err), cli::kInvalidInput);
    testkit::write_file(dir / "report.json", R"({"acc50": 1})");
    EXPECT_EQ(cli::run_report(dir / "report.json", dir / "out", out, err), cli::kInvalidInput);
}

TEST(CliBinary, ProcessExitCodes) {
    testkit::TempDir dir("bin");
    const std::string exe = OVG_CLI_PATH;
    auto run = [&](const std::string& args) {
        const int status = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    EXPECT_EQ(run("synth --out " + (dir / "a").string() + " --n 2"), 0);
    EXPECT_EQ(run("synth --out " + (dir / "b").string() + " --n 2 --seed 5"), 0);
    const std::string a = (dir / "a" / "manifest.json").string(), b = (dir / "b" / "manifest.json").string();
    const std::string rep = " --out " + (dir / "r.json").string();
    EXPECT_EQ(run("verify --train " + a + " --eval " + b + rep), 0);
    EXPECT_EQ(run("verify --train " + a + " --eval " + a + rep), 1);
    EXPECT_EQ(run("verify --train " + a + " --eval " + (dir / "none.json").string() + rep), 2);
    EXPECT_EQ(run("eval --ckpt " + (dir / "none.json").string() + " --data " + a + " --out " + dir.path().string()), 2);
    EXPECT_NE(run("frobnicate"), 0);
}
