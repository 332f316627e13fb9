// Command-line front end: train, eval, verify, report, synth.
#include <CLI11.hpp>
#include <iostream>

#include "ovg/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Open-vocabulary visual grounding toolkit"};
    app.require_subcommand(1);

    ovg::cli::TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a grounding manifest");
    train_cmd->add_option("--config", train.config, "Flat key = value config file");
    train_cmd->add_option("--data", train.data, "Grounding manifest (JSON)")->required();
    train_cmd->add_option("--out", train.out, "Output directory")->required();
    train_cmd->add_flag("--toy", train.toy, "Start from the desk-scale profile");
    train_cmd->add_option("--log-every", train.log_every, "Print every n-th step (0: quiet)");

    std::filesystem::path ckpt, data, out;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    eval_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--data", data, "Grounding or phrase manifest")->required();
    eval_cmd->add_option("--out", out, "Output directory")->required();

    std::filesystem::path train_path, eval_path;
    std::optional<std::filesystem::path> verify_out;
    auto* verify_cmd = app.add_subcommand("verify", "Audit train/eval splits for leakage");
    verify_cmd->add_option("--train", train_path, "Training manifest")->required();
    verify_cmd->add_option("--eval", eval_path, "Evaluation manifest")->required();
    verify_cmd->add_option("--out", verify_out, "Report file (default: disjointness_report.json)");

    std::filesystem::path report_in, report_out;
    auto* report_cmd = app.add_subcommand("report", "Plots and tables from an eval report");
    report_cmd->add_option("--in", report_in, "report.json written by eval")->required();
    report_cmd->add_option("--out", report_out, "Output directory")->required();

    ovg::cli::SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--n", synth.count, "Number of scenes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth.seed, "Generator seed");
    synth_cmd->add_flag("--phrases", synth.phrases, "Phrase-localization records instead of grounding");
    synth_cmd->add_option("--canvas", synth.options.canvas, "Canvas side in pixels");
    synth_cmd->add_option("--min-size", synth.options.min_size, "Smallest object side");
    synth_cmd->add_option("--max-size", synth.options.max_size, "Largest object side");
    synth_cmd->add_option("--novel-fraction", synth.options.novel_fraction, "Share of novel-shape targets")
        ->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--split", synth.options.split, "Split name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : ovg::cli::kInvalidInput;
    }

    if (*train_cmd) return ovg::cli::run_train(train, std::cout, std::cerr);
    if (*eval_cmd) return ovg::cli::run_eval(ckpt, data, out, std::cout, std::cerr);
    if (*verify_cmd) return ovg::cli::run_verify(train_path, eval_path, verify_out, std::cout, std::cerr);
    if (*report_cmd) return ovg::cli::run_report(report_in, report_out, std::cout, std::cerr);
    if (*synth_cmd) return ovg::cli::run_synth(synth, std::cout, std::cerr);
    return ovg::cli::kInvalidInput;
}
