#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wtal/adam.hpp"
#include "wtal/matrix.hpp"

namespace wtal {

std::uint64_t fnv1a64(const std::string& bytes);

// Versioned binary container for named parameter blobs plus two JSON
// documents: the architecture config (hashed, verified on load) and the
// training provenance (seed, epochs, loss-history tail). Parameter data is
// stored as little-endian f32; save(load(x)) is byte-identical.
struct Checkpoint {
    std::string arch_json;
    std::string provenance_json;
    std::vector<std::pair<std::string, Matrix>> tensors;

    std::uint64_t arch_hash() const { return fnv1a64(arch_json); }
    const Matrix* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Collect every parameter of the given sets, in order.
std::vector<std::pair<std::string, Matrix>> snapshot_params(
    const std::vector<const ParamSet*>& sets);

// Copy tensors back into parameter sets by name; CheckpointError on a
// missing name or shape mismatch.
void restore_params(const Checkpoint& checkpoint, const std::vector<ParamSet*>& sets);

}  // namespace wtal
