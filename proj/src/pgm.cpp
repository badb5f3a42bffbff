#include "dsal/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace dsal {

namespace {

struct RawImage {
    int height = 0;
    int width = 0;
    int channels = 1;
    int maxval = 255;
    std::vector<unsigned char> bytes;
};

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& is, const std::filesystem::path& path) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok += static_cast<char>(c);
    }
    if (tok.empty()) throw Error(path.string() + ": truncated PNM header");
    return tok;
}

int header_int(std::istream& is, const std::filesystem::path& path) {
    const auto tok = header_token(is, path);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw Error(path.string() + ": bad header value '" + tok + "'");
    }
}

RawImage read_pnm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    const auto magic = header_token(is, path);
    RawImage raw;
    if (magic == "P5")
        raw.channels = 1;
    else if (magic == "P6")
        raw.channels = 3;
    else
        throw Error(path.string() + ": unsupported format '" + magic + "' (expected P5 or P6)");
    raw.width = header_int(is, path);
    raw.height = header_int(is, path);
    raw.maxval = header_int(is, path);
    if (raw.maxval > 255) throw Error(path.string() + ": only 8-bit images are supported");
    raw.bytes.resize(static_cast<std::size_t>(raw.height) * raw.width * raw.channels);
    if (!is.read(reinterpret_cast<char*>(raw.bytes.data()), static_cast<std::streamsize>(raw.bytes.size())))
        throw Error(path.string() + ": truncated pixel data");
    return raw;
}

std::vector<double> gray_levels(const RawImage& raw) {
    const std::size_t n = static_cast<std::size_t>(raw.height) * raw.width;
    std::vector<double> v(n);
    const double scale = 1.0 / raw.maxval;
    for (std::size_t i = 0; i < n; ++i) {
        if (raw.channels == 1) {
            v[i] = raw.bytes[i] * scale;
        } else {
            const auto* px = &raw.bytes[3 * i];
            v[i] = std::clamp((0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) * scale, 0.0, 1.0);
        }
    }
    return v;
}

void write_pgm(const std::filesystem::path& path, int height, int width, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << "P5\n" << width << ' ' << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("failed writing " + path.string());
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

ImageGrid read_image(const std::filesystem::path& path) {
    const auto raw = read_pnm(path);
    return ImageGrid(raw.height, raw.width, gray_levels(raw));
}

BinaryMask read_mask(const std::filesystem::path& path) {
    const auto raw = read_pnm(path);
    const auto g = gray_levels(raw);
    std::vector<std::uint8_t> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = g[i] >= 128.0 / 255.0 ? 1 : 0;
    return BinaryMask(raw.height, raw.width, std::move(v));
}

ProbMap read_prob_map(const std::filesystem::path& path) {
    const auto raw = read_pnm(path);
    return ProbMap(raw.height, raw.width, gray_levels(raw));
}

void write_image(const std::filesystem::path& path, const ImageGrid& image) {
    std::vector<unsigned char> b(image.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = to_byte(image[i]);
    write_pgm(path, image.height(), image.width(), b);
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
    std::vector<unsigned char> b(mask.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = mask[i] ? 255 : 0;
    write_pgm(path, mask.height(), mask.width(), b);
}

void write_prob_map(const std::filesystem::path& path, const ProbMap& p) {
    std::vector<unsigned char> b(p.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = to_byte(p[i]);
    write_pgm(path, p.height(), p.width(), b);
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path images = dir / "images";
    const fs::path masks = dir / "masks";
    if (!fs::is_directory(images)) throw Error(dir.string() + ": missing images/ directory");

    std::vector<std::string> ids;
    const fs::path manifest = dir / "manifest.txt";
    if (fs::exists(manifest)) {
        std::ifstream is(manifest);
        std::string line;
        while (std::getline(is, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) ids.push_back(line);
        }
    } else {
        for (const auto& entry : fs::directory_iterator(images))
            if (entry.is_regular_file() && (entry.path().extension() == ".pgm" || entry.path().extension() == ".ppm"))
                ids.push_back(entry.path().stem().string());
        std::sort(ids.begin(), ids.end());
    }

    std::vector<Sample> samples;
    samples.reserve(ids.size());
    for (const auto& id : ids) {
        fs::path img = images / (id + ".pgm");
        if (!fs::exists(img)) img = images / (id + ".ppm");
        if (!fs::exists(img)) throw Error(dir.string() + ": no image for id '" + id + "'");
        std::optional<BinaryMask> gt;
        if (fs::exists(masks / (id + ".pgm"))) gt = read_mask(masks / (id + ".pgm"));
        samples.emplace_back(id, read_image(img), std::move(gt));
    }
    return samples;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw Error("cannot write " + (dir / "manifest.txt").string());
    for (const auto& s : samples) {
        write_image(dir / "images" / (s.id() + ".pgm"), s.image());
        if (s.has_ground_truth()) write_mask(dir / "masks" / (s.id() + ".pgm"), s.ground_truth());
        manifest << s.id() << '\n';
    }
}

}  // namespace dsal
