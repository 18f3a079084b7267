#include "mud/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "mud/error.hpp"

namespace mud {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'U', 'D', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError("truncated checkpoint: " + path.string());
    return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(tensor.shape().size()));
        for (int d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
        throw DataError("not a weight checkpoint: " + path.string());
    }
    const std::uint32_t version = get_u32(in, path);
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version) +
                        ": " + path.string());
    }
    const std::uint32_t count = get_u32(in, path);
    NamedTensors tensors;
    tensors.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = get_u32(in, path);
        if (name_len > 4096) throw DataError("corrupt checkpoint (name length): " + path.string());
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = get_u32(in, path);
        if (rank > 8) throw DataError("corrupt checkpoint (rank): " + path.string());
        std::vector<int> shape(rank);
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(get_u32(in, path));
            n *= static_cast<std::size_t>(shape[d]);
        }
        std::vector<float> values(n);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw IoError("truncated checkpoint: " + path.string());
        tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return tensors;
}

void write_key_values(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& [k, v] : pairs) out << k << "=" << v << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::map<std::string, std::string> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("malformed config line in " + path.string() + ": " + line);
        }
        pairs[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return pairs;
}

}  // namespace mud
