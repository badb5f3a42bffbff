#include "dsal/segmenter.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dsal {

namespace {

constexpr const char* kMagic = "DSAL-CHECKPOINT";
constexpr int kVersion = 1;

std::string shape_string(const std::vector<int>& shape) {
    std::string s;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (d) s += 'x';
        s += std::to_string(shape[d]);
    }
    return s;
}

void put_le64(std::ostream& os, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_le64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("checkpoint: truncated data section");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

std::string next_line(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error("checkpoint: truncated header");
    return line;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SegmenterParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write checkpoint " + path.string());
    const auto& layout = SegmenterParams::layout();
    os << kMagic << ' ' << kVersion << '\n';
    os << "tensors " << layout.size() << '\n';
    for (const auto& s : layout) os << s.name << ' ' << shape_string(s.shape) << ' ' << s.count << '\n';
    os << "data " << SegmenterParams::parameter_count() << '\n';
    for (double v : params.values()) put_le64(os, v);
    if (!os) throw Error("failed writing checkpoint " + path.string());
}

SegmenterParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint " + path.string());

    {
        std::istringstream hdr(next_line(is));
        std::string magic;
        int version = 0;
        hdr >> magic >> version;
        if (magic != kMagic || version != kVersion)
            throw Error("checkpoint " + path.string() + ": unrecognized header");
    }
    const auto& layout = SegmenterParams::layout();
    {
        std::istringstream hdr(next_line(is));
        std::string key;
        std::size_t n = 0;
        hdr >> key >> n;
        if (key != "tensors" || n != layout.size())
            throw Error("checkpoint " + path.string() + ": tensor count does not match this architecture");
    }
    for (const auto& s : layout) {
        std::istringstream hdr(next_line(is));
        std::string name, shape;
        std::size_t count = 0;
        hdr >> name >> shape >> count;
        if (name != s.name || shape != shape_string(s.shape) || count != s.count)
            throw Error("checkpoint " + path.string() + ": tensor '" + name + "' does not match expected '" + s.name +
                        "' " + shape_string(s.shape));
    }
    {
        std::istringstream hdr(next_line(is));
        std::string key;
        std::size_t n = 0;
        hdr >> key >> n;
        if (key != "data" || n != SegmenterParams::parameter_count())
            throw Error("checkpoint " + path.string() + ": bad data header");
    }
    SegmenterParams params;
    for (double& v : params.values()) v = get_le64(is);
    return params;
}

}  // namespace dsal
