#include "ock/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ock {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'K', 'T'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff),
    };
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& context, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) {
        throw std::runtime_error(context + ": truncated header while reading " + what);
    }
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& out, const torch::Tensor& t) {
    if (t.dim() > kMaxTensorRank) {
        throw std::runtime_error("tensor rank " + std::to_string(t.dim()) + " exceeds maximum " +
                                 std::to_string(kMaxTensorRank));
    }
    torch::Tensor f = t.to(torch::kCPU, torch::kFloat32).contiguous();
    out.write(kMagic, 4);
    put_u32(out, kTensorFormatVersion);
    put_u32(out, static_cast<uint32_t>(f.dim()));
    for (int64_t i = 0; i < f.dim(); ++i) {
        put_u32(out, static_cast<uint32_t>(f.size(i)));
    }
    // Host is little-endian x86/ARM in practice; raw f32 write matches the format.
    out.write(reinterpret_cast<const char*>(f.data_ptr<float>()),
              static_cast<std::streamsize>(f.numel() * sizeof(float)));
    if (!out) {
        throw std::runtime_error("failed writing tensor payload");
    }
}

void write_tensor_file(const std::string& path, const torch::Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    write_tensor(out, t);
}

torch::Tensor read_tensor(std::istream& in, const std::string& context) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(context + ": bad or missing OCKT magic");
    }
    const uint32_t version = get_u32(in, context, "version");
    if (version != kTensorFormatVersion) {
        throw std::runtime_error(context + ": unsupported tensor format version " +
                                 std::to_string(version));
    }
    const uint32_t rank = get_u32(in, context, "rank");
    if (rank > kMaxTensorRank) {
        throw std::runtime_error(context + ": implausible rank " + std::to_string(rank));
    }
    std::vector<int64_t> dims(rank);
    int64_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        dims[i] = get_u32(in, context, "dims");
        numel *= dims[i];
    }
    torch::Tensor t = torch::empty(dims, torch::kFloat32);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (!in) {
        throw std::runtime_error(context + ": truncated payload, expected " +
                                 std::to_string(numel) + " floats");
    }
    return t;
}

torch::Tensor read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open for reading: " + path);
    }
    return read_tensor(in, path);
}

}  // namespace ock
