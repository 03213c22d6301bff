#pragma once

#include <optional>
#include <string>

#include "wtal/matrix.hpp"

namespace wtal {

enum class Label { typical, atypical };
enum class Split { train, test };

std::string to_string(Label label);
std::string to_string(Split split);
Label label_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// One untrimmed video as a T x D matrix of per-segment features plus the
// video-level annotations carried by the manifest.
struct FeatureSequence {
    std::string id;
    Matrix features;                // T x D
    Label label = Label::typical;
    std::optional<int> severity;    // ordinal 0..K-1, 0 <=> typical
    Split split = Split::train;

    void validate() const;          // invariants; throws DataError
};

// Binary feature file, little-endian:
//   magic "WTALFT01" (8 bytes), u32 T, u32 D, u32 dtype tag (0 = f32),
//   then T*D f32 row-major.
void write_feature_file(const std::string& path, const FeatureSequence& seq);
FeatureSequence load_feature_file(const std::string& path);

// Average T_raw rows into t_target near-equal contiguous bins; bin k spans
// raw rows [k*T_raw/t_target, (k+1)*T_raw/t_target). Shorter inputs are
// padded by replicating the last row before binning.
Matrix temporal_resample(const Matrix& raw, std::size_t t_target);

}  // namespace wtal
