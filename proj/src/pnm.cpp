#include <cmath>
#include <fstream>

#include "ppnet/data.hpp"
#include "ppnet/errors.hpp"

namespace ppnet {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
// Reports the byte offset of the failure on malformed input.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF)
        throw IoError(path.string() + ": truncated PNM header at byte offset " +
                      std::to_string(in.tellg() == -1 ? 0 : static_cast<long>(in.tellg())));
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok;
}

size_t parse_dim(const std::string& tok, std::istream& in, const std::filesystem::path& path) {
    try {
        const long v = std::stol(tok);
        if (v <= 0) throw std::invalid_argument("nonpositive");
        return static_cast<size_t>(v);
    } catch (const std::exception&) {
        throw IoError(path.string() + ": bad PNM header field '" + tok + "' near byte offset " +
                      std::to_string(static_cast<long>(in.tellg())));
    }
}

}  // namespace

TensorF read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open");
    const std::string magic = next_token(in, path);
    size_t channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw IoError(path.string() + ": unsupported PNM magic '" + magic +
                      "' at byte offset 0 (want P5 or P6)");
    const size_t w = parse_dim(next_token(in, path), in, path);
    const size_t h = parse_dim(next_token(in, path), in, path);
    const size_t maxval = parse_dim(next_token(in, path), in, path);
    if (maxval != 255)
        throw IoError(path.string() + ": maxval " + std::to_string(maxval) +
                      " rejected (only 255 supported)");
    // header tokenizer consumed exactly one whitespace byte after maxval
    std::vector<unsigned char> raw(w * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw IoError(path.string() + ": truncated pixel data, expected " +
                      std::to_string(raw.size()) + " bytes");
    TensorF out({channels, h, w});
    // interleaved (P6) -> planar
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t c = 0; c < channels; ++c)
                out.at3(c, y, x) = static_cast<float>(raw[(y * w + x) * channels + c]) / 255.0f;
    return out;
}

void write_pnm(const std::filesystem::path& path, const TensorF& frame) {
    if (frame.rank() != 3 || (frame.dim(0) != 1 && frame.dim(0) != 3))
        throw ContractError("write_pnm: expected (1,H,W) or (3,H,W), got " + frame.shape_str());
    const size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(w * h * c);
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t ch = 0; ch < c; ++ch) {
                float v = frame.at3(ch, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                raw[(y * w + x) * c + ch] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace ppnet
