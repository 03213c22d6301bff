#include "wtal/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "wtal/errors.hpp"

namespace wtal {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
    if (t_tokens < 1 || dims < 1) throw ConfigError("synth: T and D must be >= 1");
    for (int level = 0; level < 4; ++level) {
        const auto& b = level_budget[level];
        if (b[0] > b[1]) throw ConfigError("synth: budget range inverted at level " +
                                           std::to_string(level));
        if (b[1] > static_cast<int>(t_tokens)) {
            throw ConfigError("synth: level " + std::to_string(level) +
                              " budget exceeds T=" + std::to_string(t_tokens));
        }
        if (level > 0 && b[0] <= level_budget[level - 1][1]) {
            throw ConfigError("synth: level budgets must increase monotonically");
        }
    }
    if (short_burst[0] < 1 || short_burst[0] > short_burst[1]) {
        throw ConfigError("synth: bad short burst range");
    }
    if (long_burst[0] <= short_burst[1] || long_burst[0] > long_burst[1]) {
        throw ConfigError("synth: bad long burst range");
    }
}

namespace {

// Burst lengths summing exactly to `budget`, biased to include a long burst
// when the budget allows one.
std::vector<int> draw_burst_lengths(int budget, const SynthConfig& cfg, RngStream& rng) {
    std::vector<int> lengths;
    int remaining = budget;
    while (remaining > 0) {
        int len;
        if (remaining >= cfg.long_burst[0] && rng.uniform() < 0.5) {
            len = cfg.long_burst[0] +
                  static_cast<int>(rng.uniform_int(
                      static_cast<std::uint64_t>(cfg.long_burst[1] - cfg.long_burst[0] + 1)));
        } else {
            len = cfg.short_burst[0] +
                  static_cast<int>(rng.uniform_int(
                      static_cast<std::uint64_t>(cfg.short_burst[1] - cfg.short_burst[0] + 1)));
        }
        len = std::min(len, remaining);
        lengths.push_back(len);
        remaining -= len;
    }
    return lengths;
}

// Greedy fallback composition guaranteed to fit: max-length long bursts first.
std::vector<int> greedy_burst_lengths(int budget, const SynthConfig& cfg) {
    std::vector<int> lengths;
    int remaining = budget;
    while (remaining >= cfg.long_burst[0]) {
        int len = std::min(cfg.long_burst[1], remaining);
        lengths.push_back(len);
        remaining -= len;
    }
    while (remaining > 0) {
        int len = std::min(cfg.short_burst[1], remaining);
        lengths.push_back(len);
        remaining -= len;
    }
    return lengths;
}

// Place bursts with at least one clear token between them so mask run
// lengths equal burst lengths. Returns a 0/1 mask of length T.
std::vector<int> place_bursts(const std::vector<int>& lengths, std::size_t t_tokens,
                              RngStream& rng) {
    const int k = static_cast<int>(lengths.size());
    std::vector<int> mask(t_tokens, 0);
    if (k == 0) return mask;
    int occupied = 0;
    for (int len : lengths) occupied += len;
    int slack = static_cast<int>(t_tokens) - occupied - (k - 1);
    if (slack < 0) throw ConfigError("synth: burst composition does not fit T");

    std::vector<int> order(lengths.begin(), lengths.end());
    rng.shuffle(order);
    // Distribute the slack across the k+1 gaps.
    std::vector<int> extra(static_cast<std::size_t>(k) + 1, 0);
    for (int s = 0; s < slack; ++s) {
        extra[rng.uniform_int(static_cast<std::uint64_t>(k + 1))] += 1;
    }
    std::size_t pos = 0;
    for (int b = 0; b < k; ++b) {
        pos += static_cast<std::size_t>(extra[b]);
        if (b > 0) pos += 1;  // mandatory gap
        for (int i = 0; i < order[b]; ++i) mask[pos + static_cast<std::size_t>(i)] = 1;
        pos += static_cast<std::size_t>(order[b]);
    }
    return mask;
}

void write_mask(const std::string& path, const std::string& id, const std::vector<int>& mask) {
    json doc;
    doc["id"] = id;
    doc["mask"] = mask;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("synth: cannot write mask '" + path + "'");
    out << doc.dump() << "\n";
}

}  // namespace

SynthResult synth_dataset(const SynthConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);

    Manifest manifest;
    manifest.base_dir = out_dir;

    const std::size_t t = config.t_tokens;
    const std::size_t d = config.dims;
    const std::size_t n_shift = (d + 3) / 4;  // ceil(D/4)

    std::uint64_t video_stream = 1;
    for (int level = 0; level < 4; ++level) {
        for (int phase = 0; phase < 2; ++phase) {
            const Split split = phase == 0 ? Split::train : Split::test;
            const int count = phase == 0 ? config.train_per_level[level]
                                         : config.test_per_level[level];
            for (int v = 0; v < count; ++v) {
                RngStream rng(config.seed, video_stream++);
                char idbuf[64];
                std::snprintf(idbuf, sizeof(idbuf), "lvl%d_%s_%03d", level,
                              to_string(split).c_str(), v);
                const std::string id = idbuf;

                // Anomaly mask from the level budget.
                std::vector<int> mask(t, 0);
                const auto& budget_range = config.level_budget[level];
                int budget = budget_range[0];
                if (budget_range[1] > budget_range[0]) {
                    budget += static_cast<int>(rng.uniform_int(
                        static_cast<std::uint64_t>(budget_range[1] - budget_range[0] + 1)));
                }
                if (budget > 0) {
                    std::vector<int> lengths;
                    bool placed = false;
                    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
                        lengths = draw_burst_lengths(budget, config, rng);
                        int occupied = 0;
                        for (int len : lengths) occupied += len;
                        occupied += static_cast<int>(lengths.size()) - 1;
                        if (occupied <= static_cast<int>(t)) placed = true;
                    }
                    if (!placed) lengths = greedy_burst_lengths(budget, config);
                    mask = place_bursts(lengths, t, rng);
                }

                // Shifted dim subset, fixed per video.
                std::vector<std::size_t> dim_order(d);
                for (std::size_t i = 0; i < d; ++i) dim_order[i] = i;
                rng.shuffle(dim_order);

                // Smooth per-video base walk + noise, plus the burst shift.
                Matrix features(t, d);
                std::vector<double> base(d);
                for (std::size_t j = 0; j < d; ++j) base[j] = config.base_sigma * rng.normal();
                for (std::size_t i = 0; i < t; ++i) {
                    if (i > 0) {
                        for (std::size_t j = 0; j < d; ++j) {
                            base[j] += config.walk_sigma * rng.normal();
                        }
                    }
                    for (std::size_t j = 0; j < d; ++j) {
                        features.at(i, j) = base[j] + config.noise_sigma * rng.normal();
                    }
                    if (mask[i] == 1) {
                        for (std::size_t s = 0; s < n_shift; ++s) {
                            features.at(i, dim_order[s]) += config.burst_shift;
                        }
                    }
                }

                FeatureSequence seq;
                seq.id = id;
                seq.features = std::move(features);
                seq.label = level == 0 ? Label::typical : Label::atypical;
                seq.severity = level;
                seq.split = split;

                const std::string feat_name = id + ".wtf";
                write_feature_file((fs::path(out_dir) / feat_name).string(), seq);
                write_mask((fs::path(out_dir) / (id + ".mask.json")).string(), id, mask);

                ManifestEntry entry;
                entry.id = id;
                entry.path = feat_name;
                entry.label = seq.label;
                entry.severity = level;
                entry.split = split;
                manifest.entries.push_back(std::move(entry));
            }
        }
    }

    SynthResult result;
    result.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    manifest.save(result.manifest_path);
    result.manifest = std::move(manifest);
    return result;
}

std::vector<int> load_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_mask: cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("mask '" + path + "': " + e.what());
    }
    std::vector<int> mask;
    for (const auto& v : doc.at("mask")) {
        const int b = v.get<int>();
        if (b != 0 && b != 1) throw FormatError("mask '" + path + "': entries must be 0/1");
        mask.push_back(b);
    }
    return mask;
}

std::string mask_path_for(const Manifest& manifest, std::size_t index) {
    const std::string feat = manifest.resolve_path(manifest.entries.at(index));
    fs::path p(feat);
    p.replace_extension();  // drop .wtf
    return p.string() + ".mask.json";
}

}  // namespace wtal
