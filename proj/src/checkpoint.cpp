#include "wtal/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "wtal/errors.hpp"

namespace wtal {

namespace {

constexpr char kMagic[8] = {'W', 'T', 'A', 'L', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(std::string buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    float f32() {
        need(4);
        std::uint32_t bits = 0;
        for (int i = 0; i < 4; ++i) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size()) {
            throw CheckpointError("'" + path_ + "': truncated at byte offset " +
                                  std::to_string(pos_));
        }
    }
    std::string buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

const Matrix* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
        if (n == name) return &m;
    }
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::string buf;
    buf.append(kMagic, 8);
    put_u32(buf, kVersion);
    put_u64(buf, checkpoint.arch_hash());
    put_u32(buf, static_cast<std::uint32_t>(checkpoint.arch_json.size()));
    buf.append(checkpoint.arch_json);
    put_u32(buf, static_cast<std::uint32_t>(checkpoint.provenance_json.size()));
    buf.append(checkpoint.provenance_json);
    put_u32(buf, static_cast<std::uint32_t>(checkpoint.tensors.size()));
    for (const auto& [name, tensor] : checkpoint.tensors) {
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.append(name);
        put_u32(buf, static_cast<std::uint32_t>(tensor.rows()));
        put_u32(buf, static_cast<std::uint32_t>(tensor.cols()));
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const float f = static_cast<float>(tensor[i]);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(buf, bits);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "'");
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 8 || std::memcmp(raw.data(), kMagic, 8) != 0) {
        throw CheckpointError("'" + path + "': bad magic at byte offset 0");
    }
    Reader reader(std::move(raw), path);
    reader.bytes(8);  // magic
    const std::uint32_t version = reader.u32();
    if (version != kVersion) {
        throw CheckpointError("'" + path + "': unsupported version " + std::to_string(version));
    }
    const std::uint64_t stored_hash = reader.u64();
    Checkpoint ckpt;
    ckpt.arch_json = reader.bytes(reader.u32());
    if (fnv1a64(ckpt.arch_json) != stored_hash) {
        throw CheckpointError("'" + path + "': architecture config hash mismatch");
    }
    ckpt.provenance_json = reader.bytes(reader.u32());
    const std::uint32_t n_tensors = reader.u32();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = reader.bytes(reader.u32());
        const std::uint32_t rows = reader.u32();
        const std::uint32_t cols = reader.u32();
        std::vector<double> values(static_cast<std::size_t>(rows) * cols);
        for (double& v : values) v = static_cast<double>(reader.f32());
        ckpt.tensors.emplace_back(std::move(name), Matrix(rows, cols, std::move(values)));
    }
    if (reader.remaining() != 0) {
        throw CheckpointError("'" + path + "': trailing bytes at offset " +
                              std::to_string(reader.pos()));
    }
    return ckpt;
}

std::vector<std::pair<std::string, Matrix>> snapshot_params(
    const std::vector<const ParamSet*>& sets) {
    std::vector<std::pair<std::string, Matrix>> out;
    for (const ParamSet* set : sets) {
        for (std::size_t i = 0; i < set->size(); ++i) {
            out.emplace_back((*set)[i].name, (*set)[i].value);
        }
    }
    return out;
}

void restore_params(const Checkpoint& checkpoint, const std::vector<ParamSet*>& sets) {
    for (ParamSet* set : sets) {
        for (std::size_t i = 0; i < set->size(); ++i) {
            Param& p = (*set)[i];
            const Matrix* stored = checkpoint.find(p.name);
            if (stored == nullptr) {
                throw CheckpointError("checkpoint is missing tensor '" + p.name + "'");
            }
            if (!stored->same_shape(p.value)) {
                throw CheckpointError("checkpoint tensor '" + p.name + "' has shape " +
                                      std::to_string(stored->rows()) + "x" +
                                      std::to_string(stored->cols()) + ", expected " +
                                      std::to_string(p.value.rows()) + "x" +
                                      std::to_string(p.value.cols()));
            }
            p.value = *stored;
        }
    }
}

}  // namespace wtal
