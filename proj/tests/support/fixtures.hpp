#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ovg/autodiff.hpp"
#include "ovg/config.hpp"
#include "ovg/rng.hpp"

namespace ovg::testkit {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ovg_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Small instance config for gradient checks: C=8, 2 heads, tiny FFN.
inline ModelConfig grad_config() {
    ModelConfig c = ModelConfig::toy();
    c.feature_dim = 8;
    c.num_heads = 2;
    c.ffn_dim = 16;
    c.num_encoder_layers = 1;
    c.num_text_layers = 1;
    c.num_decoder_layers = 1;
    c.top_k = 4;
    return c;
}

inline ad::Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
    ad::Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = normal(rng, 0.0, scale);
    return m;
}

}  // namespace ovg::testkit
