#include "svkit/serialize.hpp"

#include <cstring>
#include <fstream>

namespace svkit {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void write_tensor_record(std::ostream& os, const Tensor& t) {
    os.write("TNSR", 4);
    os.put(static_cast<char>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    for (float v : t.data()) put_f32(os, v);
}

Tensor read_tensor_record(std::istream& is, const std::string& path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "TNSR", 4) != 0)
        throw DataError(msg(path, ": not a TNSR tensor file"));
    const int rank = is.get();
    if (rank <= 0 || rank > 8) throw DataError(msg(path, ": bad tensor rank ", rank));
    Shape shape(static_cast<std::size_t>(rank));
    for (auto& d : shape) d = get_u32(is);
    if (!is) throw DataError(msg(path, ": truncated tensor header"));
    std::vector<float> values(numel(shape));
    for (auto& v : values) v = get_f32(is);
    if (!is) throw DataError(msg(path, ": truncated tensor data"));
    return Tensor::from_vector(std::move(shape), std::move(values));
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(msg("cannot write ", path));
    write_tensor_record(os, t);
    if (!os) throw DataError(msg("write failed for ", path));
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(msg("cannot open ", path));
    return read_tensor_record(is, path);
}

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor<float>>& state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(msg("cannot write ", path));
    for (const auto& entry : state) {
        put_u32(os, static_cast<std::uint32_t>(entry.name.size()));
        os.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
        write_tensor_record(os, entry.tensor);
    }
    if (!os) throw DataError(msg("write failed for ", path));
}

std::map<std::string, Tensor> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(msg("cannot open ", path));
    std::map<std::string, Tensor> out;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t len = get_u32(is);
        if (!is || len == 0 || len > 4096)
            throw DataError(msg(path, ": corrupt checkpoint entry name"));
        std::string name(len, '\0');
        is.read(name.data(), len);
        out.emplace(name, read_tensor_record(is, path));
    }
    return out;
}

void load_state(const std::string& path, std::vector<NamedTensor<float>> state) {
    auto loaded = read_checkpoint(path);
    for (auto& entry : state) {
        auto it = loaded.find(entry.name);
        if (it == loaded.end())
            throw DataError(msg(path, ": checkpoint is missing tensor \"", entry.name, "\""));
        if (it->second.shape() != entry.tensor.shape())
            throw DataError(msg(path, ": tensor \"", entry.name, "\" has shape ",
                                shape_str(it->second.shape()), ", model expects ",
                                shape_str(entry.tensor.shape())));
        std::copy(it->second.data().begin(), it->second.data().end(),
                  entry.tensor.data().begin());
    }
}

}  // namespace svkit
