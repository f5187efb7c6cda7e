#include "ppnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ppnet/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace ppnet {

namespace {

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError(path.string() + ": truncated checkpoint");
    return v;
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write("PPNC", 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, fingerprint);
    put<uint64_t>(out, step);
    put<uint64_t>(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        put<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<uint32_t>(out, static_cast<uint32_t>(t.rank()));
        for (size_t d : t.shape) put<uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw IoError(path.string() + ": write failed");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PPNC", 4) != 0)
        throw IoError(path.string() + ": bad checkpoint magic");
    const uint32_t version = get<uint32_t>(in, path);
    if (version != kVersion)
        throw IoError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
    Checkpoint ck;
    ck.fingerprint = get<uint64_t>(in, path);
    ck.step = get<uint64_t>(in, path);
    const uint64_t count = get<uint64_t>(in, path);
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t nlen = get<uint32_t>(in, path);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        const uint32_t rank = get<uint32_t>(in, path);
        std::vector<size_t> shape(rank);
        for (auto& d : shape) d = static_cast<size_t>(get<uint64_t>(in, path));
        TensorF t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!in) throw IoError(path.string() + ": truncated tensor record '" + name + "'");
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

const TensorF* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ppnet
