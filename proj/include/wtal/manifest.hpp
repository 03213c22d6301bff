#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wtal/feature_io.hpp"
#include "wtal/rng.hpp"

namespace wtal {

struct ManifestEntry {
    std::string id;
    std::string path;               // relative paths resolve against the manifest dir
    Label label = Label::typical;
    std::optional<int> severity;
    Split split = Split::train;
};

// JSON array of {"id","path","label","severity","split"} records.
class Manifest {
public:
    static Manifest load(const std::string& path);   // checks ids unique + files exist
    void save(const std::string& path) const;

    std::vector<ManifestEntry> entries;
    std::string base_dir;

    std::string resolve_path(const ManifestEntry& entry) const;
    std::vector<std::size_t> select(Split split,
                                    std::optional<Label> label = std::nullopt) const;
    FeatureSequence load_sequence(std::size_t index) const;
};

enum class BatchMode {
    any,     // F_M drawn from the union of labels
    paired,  // F_M drawn half typical / half atypical so Eq.-style score pairs exist
};

struct BatchPair {
    std::vector<std::size_t> typical;  // F_O: indices of typical train sequences
    std::vector<std::size_t> mixed;    // F_M: indices from the train union
};

// Draw one (F_O, F_M) batch pair of size B each from the train split.
BatchPair make_batches(const Manifest& manifest, std::size_t batch_size, BatchMode mode,
                       RngStream& rng);

}  // namespace wtal
