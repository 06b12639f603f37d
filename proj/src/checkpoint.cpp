#include "picat/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace picat {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CheckpointError("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

float read_f32(std::istream& is) {
    std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open for writing: " + path);
    os.write("PICT", 4);
    write_u32(os, kPictVersion);
    write_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
        for (int e : t.shape()) write_u32(os, static_cast<std::uint32_t>(e));
        for (double v : t.data()) write_f32(os, static_cast<float>(v));
    }
    if (!os) throw CheckpointError("write failed: " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PICT", 4) != 0)
        throw CheckpointError("bad magic (not a PICT container): " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kPictVersion)
        throw CheckpointError("unsupported PICT version " + std::to_string(version));
    const std::uint32_t count = read_u32(is);
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(is);
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<int>(read_u32(is));
        const int64_t n = shape_numel(shape);
        std::vector<double> data(static_cast<size_t>(n));
        for (auto& v : data) v = read_f32(is);
        if (!is) throw CheckpointError("truncated checkpoint: " + path);
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

void save_checkpoint(const std::string& path, const ParamSet& params) {
    save_checkpoint(path, params.items);
}

void load_checkpoint_into(const std::string& path, ParamSet& params) {
    auto stored = load_checkpoint(path);
    if (stored.size() != params.items.size())
        throw CheckpointError("checkpoint tensor count mismatch");
    for (size_t i = 0; i < stored.size(); ++i) {
        auto& [name, t] = params.items[i];
        if (stored[i].first != name)
            throw CheckpointError("checkpoint name mismatch: expected " + name +
                                  ", found " + stored[i].first);
        if (stored[i].second.shape() != t.shape())
            throw CheckpointError("checkpoint shape mismatch for " + name);
        t.data() = stored[i].second.data();
    }
}

} // namespace picat
