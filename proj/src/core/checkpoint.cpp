#include "load/core/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace load::core {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

template <typename U>
bool get_le(std::istream& in, U& v) {
    std::array<unsigned char, sizeof(U)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) return false;
    v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return true;
}

[[noreturn]] void truncated(const std::string& what) {
    throw std::runtime_error("checkpoint truncated while reading " + what);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamGroup& params) {
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    for (const auto& [name, t] : params.values()) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (Real v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
    }
    if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const ParamGroup& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    write_checkpoint(out, params);
}

ParamGroup read_checkpoint(std::istream& in) {
    char magic[sizeof(kCheckpointMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("not a checkpoint: bad magic");
    }
    std::uint32_t version = 0;
    if (!get_le(in, version)) truncated("version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    ParamGroup params;
    while (true) {
        std::uint32_t name_len = 0;
        if (!get_le(in, name_len)) {
            if (in.eof() && in.gcount() == 0) break;
            truncated("record header");
        }
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) truncated("name");
        std::uint32_t rank = 0;
        if (!get_le(in, rank)) truncated("rank of '" + name + "'");
        if (rank > 8) throw std::runtime_error("implausible rank for '" + name + "'");
        Shape shape(rank);
        for (auto& d : shape) {
            std::uint32_t v = 0;
            if (!get_le(in, v)) truncated("dims of '" + name + "'");
            d = static_cast<int>(v);
        }
        Tensor t(shape);
        for (Real& v : t.data()) {
            std::uint64_t bits = 0;
            if (!get_le(in, bits)) truncated("values of '" + name + "'");
            v = static_cast<Real>(std::bit_cast<double>(bits));
        }
        params.add(name, std::move(t));
    }
    return params;
}

ParamGroup load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    return read_checkpoint(in);
}

}  // namespace load::core
