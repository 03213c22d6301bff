#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wtal/manifest.hpp"

namespace wtal {

// Synthetic benchmark generator. Typical tokens follow a smooth per-video
// random walk plus Gaussian noise; anomalous tokens are additionally shifted
// by +burst_shift on a per-video subset of ceil(D/4) dims. Severity level
// sets the per-video anomalous-token budget.
struct SynthConfig {
    std::array<int, 4> train_per_level{40, 14, 13, 13};
    std::array<int, 4> test_per_level{10, 4, 3, 3};
    std::size_t t_tokens = 32;
    std::size_t dims = 64;
    double burst_shift = 1.0;                       // mean shift on anomalous tokens
    std::array<int, 2> short_burst{1, 2};           // token-length range
    std::array<int, 2> long_burst{8, 16};
    std::array<std::array<int, 2>, 4> level_budget{{{0, 0}, {1, 2}, {4, 8}, {12, 20}}};
    double noise_sigma = 0.1;
    double walk_sigma = 0.05;
    double base_sigma = 0.15;                       // spread of per-video walk start
    std::uint64_t seed = 7;

    void validate() const;   // budgets monotone, within T; throws ConfigError
};

struct SynthResult {
    Manifest manifest;
    std::string manifest_path;
};

// Writes feature files, per-video ground-truth mask JSONs and manifest.json
// under out_dir. Fixed seed => bit-identical files.
SynthResult synth_dataset(const SynthConfig& config, const std::string& out_dir);

// Per-video mask files: {"id": ..., "mask": [0/1 x T]}.
std::vector<int> load_mask(const std::string& path);
std::string mask_path_for(const Manifest& manifest, std::size_t index);

}  // namespace wtal
