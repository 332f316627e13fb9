#include "ovg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ovg/errors.hpp"
#include "ovg/rng.hpp"

namespace ovg {

using nlohmann::json;
using nlohmann::ordered_json;

bool CategoryRegistry::is_base(const std::string& c) const {
    return std::find(base.begin(), base.end(), c) != base.end();
}

bool CategoryRegistry::is_novel(const std::string& c) const {
    return std::find(novel.begin(), novel.end(), c) != novel.end();
}

std::vector<std::string> DatasetManifest::image_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto push = [&](const std::string& id) {
        if (seen.insert(id).second) out.push_back(id);
    };
    for (const auto& s : vg) push(s.image_id);
    for (const auto& s : pl) push(s.image_id);
    return out;
}

namespace {

/// Collects validation problems, one line each.
class Problems {
public:
    void add(const std::string& where, const std::string& what) { lines_.push_back(where + ": " + what); }
    bool empty() const { return lines_.empty(); }
    [[noreturn]] void raise() const {
        std::ostringstream msg;
        msg << "manifest validation failed (" << lines_.size() << " problem" << (lines_.size() == 1 ? "" : "s")
            << ")";
        for (const auto& l : lines_) msg << "\n  " << l;
        throw ValidationError(msg.str());
    }

private:
    std::vector<std::string> lines_;
};

std::string record_tag(std::size_t i) { return "record " + std::to_string(i); }

bool read_string(const json& obj, const char* key, std::string& out, Problems& p, const std::string& where,
                 bool nonempty = true) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        p.add(where, std::string("field '") + key + "' is missing");
        return false;
    }
    if (!it->is_string()) {
        p.add(where, std::string("field '") + key + "' must be a string");
        return false;
    }
    out = it->get<std::string>();
    if (nonempty && out.find_first_not_of(" \t\r\n") == std::string::npos) {
        p.add(where, std::string("field '") + key + "' must not be empty");
        return false;
    }
    return true;
}

bool read_bool(const json& obj, const char* key, bool& out, Problems& p, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        p.add(where, std::string("field '") + key + "' is missing");
        return false;
    }
    if (!it->is_boolean()) {
        p.add(where, std::string("field '") + key + "' must be a boolean");
        return false;
    }
    out = it->get<bool>();
    return true;
}

bool read_int(const json& obj, const char* key, int& out, Problems& p, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        p.add(where, std::string("field '") + key + "' is missing");
        return false;
    }
    if (!it->is_number_integer()) {
        p.add(where, std::string("field '") + key + "' must be an integer");
        return false;
    }
    out = it->get<int>();
    return true;
}

bool read_box(const json& v, BBox& out, Problems& p, const std::string& where, const std::string& field) {
    if (!v.is_array() || v.size() != 4) {
        p.add(where, "field '" + field + "' must be an array of 4 numbers");
        return false;
    }
    std::array<double, 4> c{};
    for (std::size_t i = 0; i < 4; ++i) {
        if (!v[i].is_number()) {
            p.add(where, "field '" + field + "' must be an array of 4 numbers");
            return false;
        }
        c[i] = v[i].get<double>();
        if (!std::isfinite(c[i])) {
            p.add(where, "field '" + field + "' has a non-finite coordinate");
            return false;
        }
    }
    out = {c[0], c[1], c[2], c[3]};
    bool ok = true;
    if (out.x2 < out.x1) {
        p.add(where, "field '" + field + "': x2 < x1");
        ok = false;
    }
    if (out.y2 < out.y1) {
        p.add(where, "field '" + field + "': y2 < y1");
        ok = false;
    }
    return ok;
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed manifest JSON: ") + e.what());
    }
}

CategoryRegistry read_registry(const json& root, Problems& p) {
    CategoryRegistry reg;
    auto it = root.find("registry");
    if (it == root.end() || !it->is_object()) {
        p.add("manifest", "field 'registry' must be an object with 'base' and 'novel' lists");
        return reg;
    }
    for (const char* key : {"base", "novel"}) {
        auto list = it->find(key);
        auto& dst = std::string(key) == "base" ? reg.base : reg.novel;
        if (list == it->end() || !list->is_array()) {
            p.add("registry", std::string("field '") + key + "' must be an array of strings");
            continue;
        }
        for (const auto& v : *list) {
            if (!v.is_string() || v.get<std::string>().empty()) {
                p.add("registry", std::string("field '") + key + "' must contain non-empty strings");
                continue;
            }
            dst.push_back(v.get<std::string>());
        }
    }
    return reg;
}

void read_header(const json& root, DatasetManifest& m, Problems& p) {
    if (!root.is_object()) {
        p.add("manifest", "top level must be a JSON object");
        p.raise();
    }
    m.split = root.value("split", std::string{});
    if (auto it = root.find("image_dir"); it != root.end()) {
        if (it->is_string()) m.image_dir = it->get<std::string>();
        else p.add("manifest", "field 'image_dir' must be a string");
    }
    m.registry = read_registry(root, p);
    if (!root.contains("records") || !root["records"].is_array()) {
        p.add("manifest", "field 'records' must be an array");
        p.raise();
    }
}

void read_vg_records(const json& root, DatasetManifest& m, Problems& p) {
    std::set<std::string> ids;
    const auto& records = root["records"];
    for (std::size_t i = 0; i < records.size(); ++i) {
        const json& r = records[i];
        const std::string where = record_tag(i);
        if (!r.is_object()) {
            p.add(where, "must be an object");
            continue;
        }
        GroundingSample s;
        bool ok = read_string(r, "image_id", s.image_id, p, where);
        ok &= read_int(r, "width", s.image_width, p, where);
        ok &= read_int(r, "height", s.image_height, p, where);
        ok &= read_string(r, "expression", s.expression, p, where);
        ok &= read_string(r, "category", s.category, p, where);
        ok &= read_bool(r, "is_novel", s.is_novel, p, where);
        if (auto b = r.find("bbox"); b == r.end()) {
            p.add(where, "field 'bbox' is missing");
            ok = false;
        } else {
            ok &= read_box(*b, s.target, p, where, "bbox");
        }
        if (!s.image_id.empty() && !ids.insert(s.image_id).second) {
            p.add(where, "field 'image_id': duplicate id '" + s.image_id + "' within split");
            ok = false;
        }
        if (r.contains("width") && r["width"].is_number_integer() && s.image_width <= 0) {
            p.add(where, "field 'width' must be positive");
            ok = false;
        }
        if (r.contains("height") && r["height"].is_number_integer() && s.image_height <= 0) {
            p.add(where, "field 'height' must be positive");
            ok = false;
        }
        if (ok) {
            if (!(s.target.area() > 0.0)) {
                p.add(where, "field 'bbox' has zero area");
                ok = false;
            }
            if (s.target.x1 < 0 || s.target.y1 < 0 || s.target.x2 > s.image_width || s.target.y2 > s.image_height) {
                p.add(where, "field 'bbox' lies outside the image");
                ok = false;
            }
            if (!m.registry.contains(s.category)) {
                p.add(where, "field 'category': '" + s.category + "' is not in the registry");
                ok = false;
            } else if (m.registry.is_novel(s.category) != s.is_novel && !(m.registry.is_base(s.category) &&
                                                                           m.registry.is_novel(s.category))) {
                p.add(where, "field 'is_novel' disagrees with the registry for '" + s.category + "'");
                ok = false;
            }
        }
        if (ok) m.vg.push_back(std::move(s));
    }
}

void read_pl_records(const json& root, DatasetManifest& m, Problems& p) {
    std::map<std::string, std::vector<bool>> flags;
    const auto& records = root["records"];
    for (std::size_t i = 0; i < records.size(); ++i) {
        const json& r = records[i];
        const std::string where = record_tag(i);
        if (!r.is_object()) {
            p.add(where, "must be an object");
            continue;
        }
        PLSample s;
        bool ok = read_string(r, "image_id", s.image_id, p, where);
        ok &= read_string(r, "sentence", s.sentence, p, where);
        ok &= read_bool(r, "uses_novel", s.uses_novel, p, where);

        auto chains = r.find("chains");
        if (chains == r.end() || !chains->is_object()) {
            p.add(where, "field 'chains' must be an object");
            ok = false;
        } else {
            for (auto it = chains->begin(); it != chains->end(); ++it) {
                int id = 0;
                try {
                    std::size_t used = 0;
                    id = std::stoi(it.key(), &used);
                    if (used != it.key().size()) throw std::invalid_argument(it.key());
                } catch (const std::exception&) {
                    p.add(where, "field 'chains': key '" + it.key() + "' is not an integer");
                    ok = false;
                    continue;
                }
                if (!it.value().is_array()) {
                    p.add(where, "field 'chains." + it.key() + "' must be an array of boxes");
                    ok = false;
                    continue;
                }
                auto& boxes = s.chains[id];
                for (const auto& b : it.value()) {
                    BBox box;
                    if (read_box(b, box, p, where, "chains." + it.key())) boxes.push_back(box);
                    else ok = false;
                }
            }
        }

        auto chunks = r.find("chunks");
        if (chunks == r.end() || !chunks->is_array()) {
            p.add(where, "field 'chunks' must be an array");
            ok = false;
        } else {
            for (std::size_t c = 0; c < chunks->size(); ++c) {
                const json& cj = (*chunks)[c];
                const std::string cw = where + " chunk " + std::to_string(c);
                if (!cj.is_object()) {
                    p.add(cw, "must be an object");
                    ok = false;
                    continue;
                }
                PhraseChunk pc;
                bool cok = read_int(cj, "start", pc.start, p, cw);
                cok &= read_int(cj, "end", pc.end, p, cw);
                cok &= read_int(cj, "chain", pc.chain, p, cw);
                if (cok && (pc.start < 0 || pc.end <= pc.start || pc.end > static_cast<int>(s.sentence.size()))) {
                    p.add(cw, "span [" + std::to_string(pc.start) + ", " + std::to_string(pc.end) +
                                  ") lies outside the sentence");
                    cok = false;
                }
                if (cok && chains != r.end() && chains->is_object() && !s.chains.count(pc.chain)) {
                    p.add(cw, "field 'chain': id " + std::to_string(pc.chain) + " has no entry in 'chains'");
                    cok = false;
                }
                if (cok) s.chunks.push_back(pc);
                else ok = false;
            }
            auto sorted = s.chunks;
            std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
            for (std::size_t c = 1; c < sorted.size(); ++c)
                if (sorted[c].start < sorted[c - 1].end) {
                    p.add(where, "field 'chunks': spans overlap");
                    ok = false;
                    break;
                }
        }
        if (!s.image_id.empty() && r.contains("uses_novel") && r["uses_novel"].is_boolean())
            flags[s.image_id].push_back(s.uses_novel);
        if (ok) m.pl.push_back(std::move(s));
    }
    for (const auto& [id, f] : flags) {
        if (f.size() != 2 || f[0] == f[1])
            p.add("image '" + id + "'",
                  "needs exactly two sentences, one base-only and one with novel categories (found " +
                      std::to_string(f.size()) + ")");
    }
}

DatasetManifest parse_kind(const std::string& text, int expected) {
    const json root = parse_json(text);
    DatasetManifest m;
    Problems p;
    read_header(root, m, p);
    std::string kind = root.value("kind", std::string{});
    if (kind.empty()) kind = expected == 1 ? "pl" : "vg";
    if (kind == "vg") m.kind = ManifestKind::vg;
    else if (kind == "pl") m.kind = ManifestKind::pl;
    else {
        p.add("manifest", "field 'kind' must be 'vg' or 'pl'");
        p.raise();
    }
    if (expected == 0 && m.kind != ManifestKind::vg) p.add("manifest", "expected a grounding (vg) manifest");
    if (expected == 1 && m.kind != ManifestKind::pl) p.add("manifest", "expected a phrase-localization (pl) manifest");
    if (!p.empty()) p.raise();
    if (m.kind == ManifestKind::vg) read_vg_records(root, m, p);
    else read_pl_records(root, m, p);
    if (!p.empty()) p.raise();
    return m;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ordered_json box_json(const BBox& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text) { return parse_kind(json_text, -1); }
DatasetManifest parse_vg_manifest(const std::string& json_text) { return parse_kind(json_text, 0); }
DatasetManifest parse_pl_manifest(const std::string& json_text) { return parse_kind(json_text, 1); }

DatasetManifest load_manifest(const std::filesystem::path& path) { return parse_manifest(read_file(path)); }
DatasetManifest load_vg_manifest(const std::filesystem::path& path) { return parse_vg_manifest(read_file(path)); }
DatasetManifest load_pl_manifest(const std::filesystem::path& path) { return parse_pl_manifest(read_file(path)); }

std::string serialize_manifest(const DatasetManifest& m) {
    ordered_json j;
    j["split"] = m.split;
    j["kind"] = m.kind == ManifestKind::vg ? "vg" : "pl";
    if (!m.image_dir.empty()) j["image_dir"] = m.image_dir;
    j["registry"] = {{"base", m.registry.base}, {"novel", m.registry.novel}};
    ordered_json records = ordered_json::array();
    for (const auto& s : m.vg) {
        ordered_json r;
        r["image_id"] = s.image_id;
        r["width"] = s.image_width;
        r["height"] = s.image_height;
        r["expression"] = s.expression;
        r["bbox"] = box_json(s.target);
        r["category"] = s.category;
        r["is_novel"] = s.is_novel;
        records.push_back(std::move(r));
    }
    for (const auto& s : m.pl) {
        ordered_json r;
        r["image_id"] = s.image_id;
        r["sentence"] = s.sentence;
        r["uses_novel"] = s.uses_novel;
        ordered_json chunks = ordered_json::array();
        for (const auto& c : s.chunks) chunks.push_back({{"start", c.start}, {"end", c.end}, {"chain", c.chain}});
        r["chunks"] = std::move(chunks);
        ordered_json chains = ordered_json::object();
        for (const auto& [id, boxes] : s.chains) {
            ordered_json list = ordered_json::array();
            for (const auto& b : boxes) list.push_back(box_json(b));
            chains[std::to_string(id)] = std::move(list);
        }
        r["chains"] = std::move(chains);
        records.push_back(std::move(r));
    }
    j["records"] = std::move(records);
    return j.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << serialize_manifest(m);
}

std::filesystem::path image_path(const std::filesystem::path& manifest_path, const DatasetManifest& m,
                                 const std::string& image_id) {
    return manifest_path.parent_path() / m.image_dir / (image_id + ".ppm");
}

std::string DisjointnessReport::to_json() const {
    ordered_json j;
    j["pass"] = pass();
    j["shared_image_ids"] = shared_image_ids;
    j["category_collisions"] = category_collisions;
    return j.dump(2) + "\n";
}

DisjointnessReport check_disjointness(const DatasetManifest& train, const DatasetManifest& eval) {
    DisjointnessReport r;
    const auto train_ids = train.image_ids();
    const auto eval_ids = eval.image_ids();
    std::set<std::string> a(train_ids.begin(), train_ids.end());
    std::set<std::string> b(eval_ids.begin(), eval_ids.end());
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r.shared_image_ids));

    std::set<std::string> base(train.registry.base.begin(), train.registry.base.end());
    base.insert(eval.registry.base.begin(), eval.registry.base.end());
    std::set<std::string> novel(train.registry.novel.begin(), train.registry.novel.end());
    novel.insert(eval.registry.novel.begin(), eval.registry.novel.end());
    std::set_intersection(base.begin(), base.end(), novel.begin(), novel.end(),
                          std::back_inserter(r.category_collisions));
    return r;
}

// ---- synthetic scenes -------------------------------------------------------

namespace {

struct Color {
    const char* name;
    int r, g, b;
};

constexpr Color kColors[] = {
    {"red", 220, 40, 40},   {"green", 40, 200, 60},  {"blue", 40, 80, 230},
    {"yellow", 230, 220, 40}, {"white", 240, 240, 240}, {"purple", 150, 50, 200},
};

enum class Shape { rect, ellipse };

struct ShapeKind {
    const char* name;
    Shape shape;
    double aspect;  // width / height
    bool novel;
};

constexpr ShapeKind kShapes[] = {
    {"square", Shape::rect, 1.0, false},   {"circle", Shape::ellipse, 1.0, false},
    {"bar", Shape::rect, 2.0, false},      {"oval", Shape::ellipse, 2.0, true},
    {"column", Shape::rect, 0.5, true},
};

struct Object {
    int color;
    int kind;
    BBox box;
};

constexpr int kBackground = 26;  // 8-bit gray level

struct Scene {
    std::vector<Object> objects;
};

bool overlaps(const BBox& a, const BBox& b, double margin) {
    return !(a.x2 + margin <= b.x1 || b.x2 + margin <= a.x1 || a.y2 + margin <= b.y1 || b.y2 + margin <= a.y1);
}

Scene make_scene(Rng& rng, const SyntheticOptions& o, const std::vector<int>& forced_kinds) {
    Scene sc;
    const int count = std::max(uniform_int(rng, o.min_objects, o.max_objects), static_cast<int>(forced_kinds.size()));
    std::set<std::pair<int, int>> used;
    for (int i = 0; i < count; ++i) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            Object obj;
            obj.kind = i < static_cast<int>(forced_kinds.size())
                           ? forced_kinds[static_cast<std::size_t>(i)]
                           : uniform_int(rng, 0, static_cast<int>(std::size(kShapes)) - 1);
            obj.color = uniform_int(rng, 0, static_cast<int>(std::size(kColors)) - 1);
            if (used.count({obj.color, obj.kind})) continue;
            const double aspect = kShapes[obj.kind].aspect;
            const int side = uniform_int(rng, o.min_size, o.max_size);
            int w = side, h = side;
            if (aspect > 1.0) h = std::max(2, static_cast<int>(std::lround(side / aspect)));
            if (aspect < 1.0) w = std::max(2, static_cast<int>(std::lround(side * aspect)));
            if (w >= o.canvas || h >= o.canvas) continue;
            const int x = uniform_int(rng, 0, o.canvas - w);
            const int y = uniform_int(rng, 0, o.canvas - h);
            obj.box = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + w),
                       static_cast<double>(y + h)};
            const bool clash = std::any_of(sc.objects.begin(), sc.objects.end(),
                                           [&](const Object& other) { return overlaps(obj.box, other.box, 2.0); });
            if (clash) continue;
            used.insert({obj.color, obj.kind});
            sc.objects.push_back(obj);
            break;
        }
    }
    return sc;
}

Image render(const Scene& sc, int canvas) {
    Image img(canvas, canvas, 3, kBackground / 255.0);
    for (const auto& obj : sc.objects) {
        const Color& c = kColors[obj.color];
        const double cx = (obj.box.x1 + obj.box.x2) / 2.0, cy = (obj.box.y1 + obj.box.y2) / 2.0;
        const double rx = obj.box.width() / 2.0, ry = obj.box.height() / 2.0;
        for (int y = static_cast<int>(obj.box.y1); y < static_cast<int>(obj.box.y2); ++y)
            for (int x = static_cast<int>(obj.box.x1); x < static_cast<int>(obj.box.x2); ++x) {
                if (kShapes[obj.kind].shape == Shape::ellipse) {
                    const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                    if (dx * dx + dy * dy > 1.0) continue;
                }
                img.at(y, x, 0) = c.r / 255.0;
                img.at(y, x, 1) = c.g / 255.0;
                img.at(y, x, 2) = c.b / 255.0;
            }
    }
    return img;
}

std::string describe(const Object& o) {
    return std::string("the ") + kColors[o.color].name + " " + kShapes[o.kind].name;
}

std::string relation(const Object& a, const Object& b) {
    const double dx = (a.box.x1 + a.box.x2) / 2 - (b.box.x1 + b.box.x2) / 2;
    const double dy = (a.box.y1 + a.box.y2) / 2 - (b.box.y1 + b.box.y2) / 2;
    if (std::abs(dx) >= std::abs(dy)) return dx < 0 ? "left of" : "right of";
    return dy < 0 ? "above" : "below";
}

std::string make_id(const std::string& prefix, std::uint64_t seed, int i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%llu_%05d", prefix.c_str(), static_cast<unsigned long long>(seed), i);
    return buf;
}

std::vector<int> kinds_where(bool novel) {
    std::vector<int> out;
    for (int k = 0; k < static_cast<int>(std::size(kShapes)); ++k)
        if (kShapes[k].novel == novel) out.push_back(k);
    return out;
}

}  // namespace

CategoryRegistry synthetic_registry() {
    CategoryRegistry r;
    for (const auto& s : kShapes) (s.novel ? r.novel : r.base).push_back(s.name);
    return r;
}

SyntheticDataset generate_synthetic(int n, const SyntheticOptions& options, std::uint64_t seed) {
    if (n < 1) throw InputError("synthetic dataset needs n >= 1");
    if (options.min_size < 2 || options.max_size < options.min_size || options.max_size >= options.canvas)
        throw InputError("synthetic size range must satisfy 2 <= min <= max < canvas");
    Rng rng = make_rng(seed);
    SyntheticDataset ds;
    ds.manifest.split = options.split;
    ds.manifest.kind = ManifestKind::vg;
    ds.manifest.registry = synthetic_registry();
    ds.manifest.image_dir = "images";
    const auto base_kinds = kinds_where(false);
    const auto novel_kinds = kinds_where(true);
    for (int i = 0; i < n; ++i) {
        const bool novel = uniform(rng, 0.0, 1.0) < options.novel_fraction;
        const auto& pool = novel ? novel_kinds : base_kinds;
        const int target_kind = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
        const Scene sc = make_scene(rng, options, {target_kind});
        const Object& target = sc.objects.front();
        std::string expr = describe(target);
        if (sc.objects.size() > 1 && uniform_int(rng, 0, 1) == 1) {
            const Object& other = sc.objects[static_cast<std::size_t>(
                uniform_int(rng, 1, static_cast<int>(sc.objects.size()) - 1))];
            expr += " " + relation(target, other) + " " + describe(other);
        }
        GroundingSample s;
        s.image_id = make_id("synth", seed, i);
        s.image_width = options.canvas;
        s.image_height = options.canvas;
        s.expression = expr;
        s.target = target.box;
        s.category = kShapes[target.kind].name;
        s.is_novel = kShapes[target.kind].novel;
        ds.images.emplace(s.image_id, render(sc, options.canvas));
        ds.manifest.vg.push_back(std::move(s));
    }
    return ds;
}

SyntheticDataset generate_synthetic_pl(int n, const SyntheticOptions& options, std::uint64_t seed) {
    if (n < 1) throw InputError("synthetic dataset needs n >= 1");
    Rng rng = make_rng(seed);
    SyntheticDataset ds;
    ds.manifest.split = options.split;
    ds.manifest.kind = ManifestKind::pl;
    ds.manifest.registry = synthetic_registry();
    ds.manifest.image_dir = "images";
    const auto base_kinds = kinds_where(false);
    const auto novel_kinds = kinds_where(true);
    auto pick = [&](const std::vector<int>& pool) {
        return pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
    };
    SyntheticOptions o = options;
    o.min_objects = std::max(o.min_objects, 3);
    o.max_objects = std::max(o.max_objects, o.min_objects);
    for (int i = 0; i < n; ++i) {
        const int b1 = pick(base_kinds);
        const Scene sc = make_scene(rng, o, {b1, pick(base_kinds), pick(novel_kinds)});
        const std::string id = make_id("synthpl", seed, i);
        std::vector<const Object*> base_objs, novel_objs;
        for (const auto& obj : sc.objects) (kShapes[obj.kind].novel ? novel_objs : base_objs).push_back(&obj);

        auto sentence_for = [&](const Object& a, const Object& b, bool uses_novel) {
            PLSample s;
            s.image_id = id;
            s.uses_novel = uses_novel;
            const std::string pa = describe(a), pb = describe(b);
            s.sentence = pa + " is " + relation(a, b) + " " + pb + " on the canvas";
            const int sa = 0;
            const int sb = static_cast<int>(s.sentence.find(pb, pa.size()));
            const int sc_start = static_cast<int>(s.sentence.rfind("the canvas"));
            s.chunks = {{sa, sa + static_cast<int>(pa.size()), 0},
                        {sb, sb + static_cast<int>(pb.size()), 1},
                        {sc_start, sc_start + 10, 2}};
            s.chains[0] = {a.box};
            s.chains[1] = {b.box};
            s.chains[2] = {};
            return s;
        };
        if (base_objs.size() >= 2) ds.manifest.pl.push_back(sentence_for(*base_objs[0], *base_objs[1], false));
        else ds.manifest.pl.push_back(sentence_for(*base_objs[0], *base_objs[0], false));
        if (!novel_objs.empty()) ds.manifest.pl.push_back(sentence_for(*novel_objs[0], *base_objs[0], true));
        else ds.manifest.pl.pop_back();
        if (ds.manifest.pl.empty() || ds.manifest.pl.back().image_id != id) continue;
        ds.images.emplace(id, render(sc, o.canvas));
    }
    return ds;
}

std::filesystem::path write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / ds.manifest.image_dir);
    for (const auto& [id, img] : ds.images) save_ppm(img, dir / ds.manifest.image_dir / (id + ".ppm"));
    const auto path = dir / "manifest.json";
    save_manifest(ds.manifest, path);
    return path;
}

}  // namespace ovg
