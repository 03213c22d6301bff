#include "wtal/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "wtal/errors.hpp"

namespace wtal {

namespace fs = std::filesystem;
using nlohmann::json;

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("manifest: cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("manifest '" + path + "': " + e.what());
    }
    if (!doc.is_array()) throw FormatError("manifest '" + path + "': expected a JSON array");

    Manifest m;
    m.base_dir = fs::path(path).parent_path().string();
    std::set<std::string> seen;
    for (const auto& item : doc) {
        ManifestEntry e;
        try {
            e.id = item.at("id").get<std::string>();
            e.path = item.at("path").get<std::string>();
            e.label = label_from_string(item.at("label").get<std::string>());
            if (item.contains("severity") && !item.at("severity").is_null()) {
                e.severity = item.at("severity").get<int>();
            }
            e.split = split_from_string(item.at("split").get<std::string>());
        } catch (const json::exception& ex) {
            throw FormatError("manifest '" + path + "': bad entry: " + ex.what());
        }
        if (!seen.insert(e.id).second) {
            throw DataError("manifest '" + path + "': duplicate id '" + e.id + "'");
        }
        if (!fs::exists(m.resolve_path(e))) {
            throw DataError("manifest '" + path + "': missing feature file '" + e.path +
                            "' for id '" + e.id + "'");
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::string Manifest::resolve_path(const ManifestEntry& entry) const {
    fs::path p(entry.path);
    if (p.is_absolute() || base_dir.empty()) return entry.path;
    return (fs::path(base_dir) / p).string();
}

void Manifest::save(const std::string& path) const {
    json doc = json::array();
    for (const auto& e : entries) {
        json item;
        item["id"] = e.id;
        item["path"] = e.path;
        item["label"] = to_string(e.label);
        if (e.severity.has_value()) {
            item["severity"] = *e.severity;
        } else {
            item["severity"] = nullptr;
        }
        item["split"] = to_string(e.split);
        doc.push_back(std::move(item));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("manifest: cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
}

std::vector<std::size_t> Manifest::select(Split split, std::optional<Label> label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].split != split) continue;
        if (label.has_value() && entries[i].label != *label) continue;
        out.push_back(i);
    }
    return out;
}

FeatureSequence Manifest::load_sequence(std::size_t index) const {
    const ManifestEntry& e = entries.at(index);
    FeatureSequence seq = load_feature_file(resolve_path(e));
    seq.id = e.id;
    seq.label = e.label;
    seq.severity = e.severity;
    seq.split = e.split;
    seq.validate();
    return seq;
}

BatchPair make_batches(const Manifest& manifest, std::size_t batch_size, BatchMode mode,
                       RngStream& rng) {
    if (batch_size == 0) throw ArgumentError("make_batches: batch size must be >= 1");
    std::vector<std::size_t> typical = manifest.select(Split::train, Label::typical);
    std::vector<std::size_t> atypical = manifest.select(Split::train, Label::atypical);
    std::vector<std::size_t> all = manifest.select(Split::train);

    if (typical.size() < batch_size) {
        throw DataError("make_batches: need " + std::to_string(batch_size) +
                        " typical train sequences, have " + std::to_string(typical.size()));
    }
    if (all.size() < batch_size) {
        throw DataError("make_batches: need " + std::to_string(batch_size) +
                        " train sequences, have " + std::to_string(all.size()));
    }

    BatchPair out;
    rng.shuffle(typical);
    out.typical.assign(typical.begin(), typical.begin() + static_cast<long>(batch_size));

    if (mode == BatchMode::any) {
        rng.shuffle(all);
        out.mixed.assign(all.begin(), all.begin() + static_cast<long>(batch_size));
    } else {
        const std::size_t n_atyp = batch_size / 2;
        const std::size_t n_typ = batch_size - n_atyp;
        if (atypical.size() < n_atyp || typical.size() < n_typ) {
            throw DataError("make_batches: paired mode needs " + std::to_string(n_typ) +
                            " typical and " + std::to_string(n_atyp) + " atypical sequences");
        }
        std::vector<std::size_t> typ2 = manifest.select(Split::train, Label::typical);
        rng.shuffle(typ2);
        rng.shuffle(atypical);
        out.mixed.assign(typ2.begin(), typ2.begin() + static_cast<long>(n_typ));
        out.mixed.insert(out.mixed.end(), atypical.begin(),
                         atypical.begin() + static_cast<long>(n_atyp));
    }
    return out;
}

}  // namespace wtal
