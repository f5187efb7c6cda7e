#include "ppnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ppnet/errors.hpp"
#include "ppnet/rng.hpp"

namespace ppnet {

namespace {

struct Shape {
    bool disc = false;
    double cx = 0, cy = 0;  // center
    double half = 0;        // half-extent (rect) or radius (disc)
    int vx = 0, vy = 0;
    double intensity = 1.0;
};

void render(const Shape& s, float* plane, size_t H, size_t W) {
    const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.half - 1)));
    const int y1 = std::min(static_cast<int>(H) - 1, static_cast<int>(std::ceil(s.cy + s.half + 1)));
    const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.half - 1)));
    const int x1 = std::min(static_cast<int>(W) - 1, static_cast<int>(std::ceil(s.cx + s.half + 1)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            float v = 0.0f;
            if (s.disc) {
                // soft 1px edge; translation-equivariant under integer shifts
                const double d = std::hypot(x - s.cx, y - s.cy);
                const double t = s.half + 0.5 - d;
                v = static_cast<float>(std::clamp(t, 0.0, 1.0) * s.intensity);
            } else {
                if (std::abs(x - s.cx) <= s.half && std::abs(y - s.cy) <= s.half)
                    v = static_cast<float>(s.intensity);
            }
            float& px = plane[static_cast<size_t>(y) * W + x];
            px = std::max(px, v);
        }
}

}  // namespace

SequenceSet gen_moving_shapes(uint64_t seed, size_t count, size_t T, size_t height, size_t width,
                              size_t num_shapes, int speed_min, int speed_max) {
    if (T < 1 || count < 1) throw ContractError("gen_moving_shapes: count and T must be >= 1");
    if (speed_min < 0 || speed_max < speed_min)
        throw ContractError("gen_moving_shapes: bad speed range");
    SequenceSet set;
    set.meta.source = "synthetic";
    set.meta.seed = seed;
    set.meta.algorithm = Rng::kAlgorithm;
    {
        std::ostringstream os;
        os << "moving_shapes count=" << count << " T=" << T << " size=" << height << "x" << width
           << " num_shapes=" << num_shapes << " speed=[" << speed_min << "," << speed_max << "]";
        set.meta.params = os.str();
    }
    Rng base(seed);
    for (size_t s = 0; s < count; ++s) {
        Rng rng = base.fork(s);
        std::vector<Shape> shapes(num_shapes);
        const double max_half = std::min(height, width) / 5.0;
        for (auto& sh : shapes) {
            sh.disc = rng.uniform_int(0, 1) == 1;
            sh.half = rng.uniform(2.0, std::max(2.5, max_half));
            sh.intensity = rng.uniform(0.6, 1.0);
            auto speed = [&] {
                const int sp = static_cast<int>(rng.uniform_int(speed_min, speed_max));
                return rng.uniform_int(0, 1) ? sp : -sp;
            };
            sh.vx = speed();
            sh.vy = speed();
            // leave one full step of margin so early frames never bounce
            const double mx = sh.half + std::abs(sh.vx) + 1;
            const double my = sh.half + std::abs(sh.vy) + 1;
            if (2 * mx >= width || 2 * my >= height)
                throw ContractError("gen_moving_shapes: shape does not fit in the frame");
            sh.cx = std::floor(rng.uniform(mx, width - 1 - mx));
            sh.cy = std::floor(rng.uniform(my, height - 1 - my));
        }
        TensorF seq({T, 1, height, width});
        for (size_t t = 0; t < T; ++t) {
            float* plane = seq.data.data() + t * height * width;
            for (auto& sh : shapes) {
                render(sh, plane, height, width);
                // advance with reflection
                sh.cx += sh.vx;
                sh.cy += sh.vy;
                if (sh.cx < sh.half) { sh.cx = 2 * sh.half - sh.cx; sh.vx = -sh.vx; }
                if (sh.cx > width - 1 - sh.half) { sh.cx = 2 * (width - 1 - sh.half) - sh.cx; sh.vx = -sh.vx; }
                if (sh.cy < sh.half) { sh.cy = 2 * sh.half - sh.cy; sh.vy = -sh.vy; }
                if (sh.cy > height - 1 - sh.half) { sh.cy = 2 * (height - 1 - sh.half) - sh.cy; sh.vy = -sh.vy; }
            }
        }
        set.sequences.push_back(std::move(seq));
    }
    return set;
}

std::vector<TensorF> load_frames(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError(dir.string() + ": not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError(dir.string() + ": no .pgm/.ppm frames found");
    std::vector<TensorF> frames;
    std::string offenders;
    for (const auto& f : files) {
        try {
            frames.push_back(read_pnm(f));
        } catch (const IoError& e) {
            offenders += std::string(offenders.empty() ? "" : "; ") + e.what();
        }
    }
    if (!offenders.empty()) throw IoError(dir.string() + ": unreadable frames: " + offenders);
    for (size_t i = 1; i < frames.size(); ++i)
        if (!frames[i].same_shape(frames[0]))
            throw IoError(files[i].string() + ": frame shape " + frames[i].shape_str() +
                          " differs from first frame " + frames[0].shape_str());
    return frames;
}

namespace {

TensorF center_crop(const TensorF& img, size_t ch, size_t cw) {
    const size_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (ch > H || cw > W)
        throw IoError("center crop " + std::to_string(ch) + "x" + std::to_string(cw) +
                      " larger than frame " + img.shape_str());
    const size_t y0 = (H - ch) / 2, x0 = (W - cw) / 2;
    TensorF out({C, ch, cw});
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < ch; ++y)
            for (size_t x = 0; x < cw; ++x) out.at3(c, y, x) = img.at3(c, y0 + y, x0 + x);
    return out;
}

TensorF resize_nearest(const TensorF& img, size_t rh, size_t rw) {
    const size_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (rh == H && rw == W) return img;
    TensorF out({C, rh, rw});
    for (size_t c = 0; c < C; ++c)
        for (size_t y = 0; y < rh; ++y) {
            const size_t sy = std::min(H - 1, y * H / rh);
            for (size_t x = 0; x < rw; ++x)
                out.at3(c, y, x) = img.at3(c, sy, std::min(W - 1, x * W / rw));
        }
    return out;
}

}  // namespace

SequenceSet load_frame_dir(const std::filesystem::path& dir,
                           std::optional<std::pair<size_t, size_t>> crop,
                           std::pair<size_t, size_t> resize, size_t stride, size_t seq_len) {
    if (seq_len < 1 || stride < 1) throw ContractError("load_frame_dir: seq_len and stride >= 1");
    std::vector<TensorF> frames = load_frames(dir);
    for (auto& f : frames) {
        if (crop) f = center_crop(f, crop->first, crop->second);
        f = resize_nearest(f, resize.first, resize.second);
    }
    SequenceSet set;
    set.meta.source = dir.string();
    set.meta.algorithm = "none";
    set.meta.params = "seq_len=" + std::to_string(seq_len) + " stride=" + std::to_string(stride);
    if (frames.size() < seq_len)
        throw IoError(dir.string() + ": " + std::to_string(frames.size()) +
                      " frames < seq_len " + std::to_string(seq_len));
    const size_t C = frames[0].dim(0), H = frames[0].dim(1), W = frames[0].dim(2);
    for (size_t start = 0; start + seq_len <= frames.size(); start += stride) {
        TensorF seq({seq_len, C, H, W});
        for (size_t t = 0; t < seq_len; ++t)
            std::copy(frames[start + t].data.begin(), frames[start + t].data.end(),
                      seq.data.begin() + t * C * H * W);
        set.sequences.push_back(std::move(seq));
    }
    return set;
}

std::pair<std::vector<TensorF>, std::vector<TensorF>> frame_variation(
    const std::vector<TensorF>& seq) {
    if (seq.size() < 2) throw ContractError("frame_variation: need at least two frames");
    std::vector<TensorF> pos, neg;
    for (size_t t = 0; t + 1 < seq.size(); ++t) {
        require_same_shape(seq[t], seq[t + 1], "frame_variation");
        TensorF p(seq[t].shape), n(seq[t].shape);
        for (size_t i = 0; i < p.size(); ++i) {
            const float d = seq[t + 1].data[i] - seq[t].data[i];
            p.data[i] = d > 0 ? d : 0.0f;
            n.data[i] = d < 0 ? -d : 0.0f;
        }
        pos.push_back(std::move(p));
        neg.push_back(std::move(n));
    }
    return {std::move(pos), std::move(neg)};
}

std::vector<TensorF> split_frames(const TensorF& seq) {
    if (seq.rank() != 4) throw ContractError("split_frames: expected (T,C,H,W)");
    const size_t T = seq.dim(0), n = seq.dim(1) * seq.dim(2) * seq.dim(3);
    std::vector<TensorF> out;
    out.reserve(T);
    for (size_t t = 0; t < T; ++t) {
        TensorF f({seq.dim(1), seq.dim(2), seq.dim(3)});
        std::copy_n(seq.data.begin() + t * n, n, f.data.begin());
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace ppnet
