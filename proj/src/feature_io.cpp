#include "wtal/feature_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "wtal/errors.hpp"

namespace wtal {

namespace {

constexpr char kMagic[8] = {'W', 'T', 'A', 'L', 'F', 'T', '0', '1'};
constexpr std::uint32_t kDtypeF32 = 0;

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(const std::string& buf, std::size_t offset) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 3])) << 24);
}

float get_f32(const std::string& buf, std::size_t offset) {
    std::uint32_t bits = get_u32(buf, offset);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

std::string to_string(Label label) {
    return label == Label::typical ? "typical" : "atypical";
}

std::string to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

Label label_from_string(const std::string& s) {
    if (s == "typical") return Label::typical;
    if (s == "atypical") return Label::atypical;
    throw FormatError("unknown label '" + s + "'");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw FormatError("unknown split '" + s + "'");
}

void FeatureSequence::validate() const {
    if (features.rows() < 1 || features.cols() < 1) {
        throw DataError("sequence '" + id + "': features must be at least 1x1");
    }
    if (!features.all_finite()) {
        throw DataError("sequence '" + id + "': non-finite feature values");
    }
    if (severity.has_value()) {
        if (*severity < 0) throw DataError("sequence '" + id + "': negative severity");
        const bool sev_typical = (*severity == 0);
        if (sev_typical != (label == Label::typical)) {
            throw DataError("sequence '" + id + "': severity " + std::to_string(*severity) +
                            " inconsistent with label " + to_string(label));
        }
    }
}

void write_feature_file(const std::string& path, const FeatureSequence& seq) {
    if (!seq.features.all_finite()) {
        throw ArgumentError("write_feature_file: non-finite features for '" + seq.id + "'");
    }
    const Matrix& f = seq.features;
    std::string buf;
    buf.reserve(20 + f.size() * 4);
    buf.append(kMagic, 8);
    put_u32(buf, static_cast<std::uint32_t>(f.rows()));
    put_u32(buf, static_cast<std::uint32_t>(f.cols()));
    put_u32(buf, kDtypeF32);
    for (std::size_t i = 0; i < f.size(); ++i) put_f32(buf, static_cast<float>(f[i]));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("write_feature_file: cannot open '" + path + "'");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write_feature_file: write failed for '" + path + "'");
}

FeatureSequence load_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_feature_file: cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 8) != 0) {
        throw FormatError("'" + path + "': bad magic at byte offset 0");
    }
    if (buf.size() < 20) {
        throw FormatError("'" + path + "': truncated header at byte offset " +
                          std::to_string(buf.size()));
    }
    const std::uint32_t t = get_u32(buf, 8);
    const std::uint32_t d = get_u32(buf, 12);
    const std::uint32_t dtype = get_u32(buf, 16);
    if (dtype != kDtypeF32) {
        throw FormatError("'" + path + "': unsupported dtype tag " + std::to_string(dtype) +
                          " at byte offset 16");
    }
    const std::size_t need = 20 + static_cast<std::size_t>(t) * d * 4;
    if (buf.size() != need) {
        throw FormatError("'" + path + "': expected " + std::to_string(need) +
                          " bytes, got " + std::to_string(buf.size()) +
                          " (payload at byte offset 20)");
    }
    std::vector<double> values(static_cast<std::size_t>(t) * d);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<double>(get_f32(buf, 20 + i * 4));
    }
    FeatureSequence seq;
    seq.id = std::filesystem::path(path).stem().string();
    seq.features = Matrix::checked(t, d, std::move(values));
    return seq;
}

Matrix temporal_resample(const Matrix& raw, std::size_t t_target) {
    if (raw.rows() == 0 || raw.cols() == 0) {
        throw ArgumentError("temporal_resample: empty input");
    }
    if (t_target == 0) throw ArgumentError("temporal_resample: t_target must be >= 1");

    const Matrix* src = &raw;
    Matrix padded;
    if (raw.rows() < t_target) {
        // Edge-replicate the last row up to the target length.
        padded = Matrix(t_target, raw.cols());
        for (std::size_t i = 0; i < t_target; ++i) {
            const std::size_t s = std::min(i, raw.rows() - 1);
            for (std::size_t j = 0; j < raw.cols(); ++j) padded.at(i, j) = raw.at(s, j);
        }
        src = &padded;
    }
    const std::size_t t_raw = src->rows();
    Matrix out(t_target, raw.cols());
    for (std::size_t k = 0; k < t_target; ++k) {
        const std::size_t lo = (k * t_raw) / t_target;
        const std::size_t hi = ((k + 1) * t_raw) / t_target;  // exclusive
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (std::size_t j = 0; j < raw.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) acc += src->at(i, j);
            out.at(k, j) = acc * inv;
        }
    }
    return out;
}

}  // namespace wtal
