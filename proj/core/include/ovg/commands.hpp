#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "ovg/config.hpp"
#include "ovg/data.hpp"

namespace ovg::cli {

/// Exit codes shared by every command.
enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,     // verify found leakage
    kInvalidInput = 2,    // unreadable, malformed or invalid data
    kConfigMismatch = 3,  // bad config or checkpoint/config disagreement
};

struct TrainArgs {
    std::optional<std::filesystem::path> config;
    std::filesystem::path data;
    std::filesystem::path out;
    bool toy = false;
    /// Log every n-th step (0: never).
    int log_every = 50;
};

/// Writes run_record.json, checkpoint.json and config.txt into `out`.
int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

/// Writes report.json and predictions.json into `out_dir`.
int run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
             const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// Prints the disjointness report and writes it to `report_path`
/// (default: disjointness_report.json in the working directory).
int run_verify(const std::filesystem::path& train, const std::filesystem::path& eval,
               const std::optional<std::filesystem::path>& report_path, std::ostream& out, std::ostream& err);

/// Reads an eval report and the predictions.json beside it; writes
/// bbox_size_scatter.svg, bucket_accuracy.svg and accuracy_table.txt.
int run_report(const std::filesystem::path& report, const std::filesystem::path& out_dir, std::ostream& out,
               std::ostream& err);

struct SynthArgs {
    std::filesystem::path out;
    int count = 16;
    std::uint64_t seed = 42;
    bool phrases = false;
    SyntheticOptions options;
};

/// Generates a synthetic dataset directory.
int run_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

/// Config resolution used by train: defaults, then the toy profile, then
/// the file, then the OVG_SEED environment variable.
ModelConfig resolve_config(const std::optional<std::filesystem::path>& path, bool toy);

}  // namespace ovg::cli
