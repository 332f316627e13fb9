#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ovg/image.hpp"
#include "ovg/samples.hpp"

namespace ovg {

struct CategoryRegistry {
    std::vector<std::string> base;
    std::vector<std::string> novel;

    bool is_base(const std::string& c) const;
    bool is_novel(const std::string& c) const;
    bool contains(const std::string& c) const { return is_base(c) || is_novel(c); }

    bool operator==(const CategoryRegistry&) const = default;
};

enum class ManifestKind { vg, pl };

/// One split of grounding (VG) or phrase-localization (PL) records.
struct DatasetManifest {
    std::string split;
    ManifestKind kind = ManifestKind::vg;
    CategoryRegistry registry;
    std::string image_dir;  // relative to the manifest file; empty if none
    std::vector<GroundingSample> vg;
    std::vector<PLSample> pl;

    std::size_t size() const { return kind == ManifestKind::vg ? vg.size() : pl.size(); }
    /// Distinct image ids in record order.
    std::vector<std::string> image_ids() const;

    bool operator==(const DatasetManifest&) const = default;
};

/// Parses and validates manifest JSON. Malformed JSON throws ParseError;
/// schema or invariant violations throw ValidationError whose message names
/// every offending record index and field.
DatasetManifest parse_manifest(const std::string& json_text);
DatasetManifest parse_vg_manifest(const std::string& json_text);
DatasetManifest parse_pl_manifest(const std::string& json_text);

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest load_vg_manifest(const std::filesystem::path& path);
DatasetManifest load_pl_manifest(const std::filesystem::path& path);

std::string serialize_manifest(const DatasetManifest& m);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Resolves the image file for an id: <manifest dir>/<image_dir>/<id>.ppm.
std::filesystem::path image_path(const std::filesystem::path& manifest_path, const DatasetManifest& m,
                                 const std::string& image_id);

struct DisjointnessReport {
    std::vector<std::string> shared_image_ids;
    std::vector<std::string> category_collisions;  // names in both a base and a novel registry

    bool pass() const { return shared_image_ids.empty() && category_collisions.empty(); }
    std::string to_json() const;
};

/// Shared image ids between the splits, and every category appearing in a
/// base registry and a novel registry of either manifest.
DisjointnessReport check_disjointness(const DatasetManifest& train, const DatasetManifest& eval);

/// Knobs for synthetic scene generation.
struct SyntheticOptions {
    int canvas = 160;
    int min_size = 24;  // object side range in pixels
    int max_size = 64;
    int min_objects = 2;
    int max_objects = 3;
    /// Probability that a grounding target is drawn from the novel shapes.
    double novel_fraction = 0.0;
    std::string split = "synthetic";
};

struct SyntheticDataset {
    DatasetManifest manifest;
    std::map<std::string, Image> images;
};

/// Shape categories used by the generator.
CategoryRegistry synthetic_registry();

/// n scenes of colored rectangles and ellipses on a blank canvas, one
/// templated expression per scene ("the red square left of the blue
/// circle"), deterministic per seed.
SyntheticDataset generate_synthetic(int n, const SyntheticOptions& options, std::uint64_t seed);

/// n images, two sentences each (base-only and base+novel), with phrase
/// chunks, coreference chains and one box-less scene chain.
SyntheticDataset generate_synthetic_pl(int n, const SyntheticOptions& options, std::uint64_t seed);

/// Writes <dir>/manifest.json and <dir>/images/<id>.ppm; returns the manifest path.
std::filesystem::path write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir);

}  // namespace ovg
