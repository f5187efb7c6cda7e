#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ppnet/tensor.hpp"

namespace ppnet {

struct SequenceSet {
    std::vector<TensorF> sequences;  // each (T,C,H,W), values in [0,1]
    struct Meta {
        std::string source;     // "synthetic" | directory path
        uint64_t seed = 0;
        std::string params;     // human-readable generation parameters
        std::string algorithm;  // PRNG identifier
    } meta;
};

// Deterministic synthetic video: rectangles and antialiased discs translating
// with a constant integer per-sequence velocity, reflecting off borders.
// Initial positions leave room for the first step, so frame 1 is always an
// exact shift of frame 0. Background 0, shapes composited by max.
SequenceSet gen_moving_shapes(uint64_t seed, size_t count, size_t T, size_t height, size_t width,
                              size_t num_shapes = 2, int speed_min = 1, int speed_max = 2);

// Binary PNM: P5 (grayscale) or P6 (RGB), maxval 255 only. Read returns
// (C,H,W) in [0,1]; write quantizes with round(v*255).
TensorF read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const TensorF& frame);

// Frames of one directory (lexicographic *.pgm/*.ppm order), optionally
// center-cropped then nearest-neighbor resized, windowed into sequences.
SequenceSet load_frame_dir(const std::filesystem::path& dir,
                           std::optional<std::pair<size_t, size_t>> center_crop,
                           std::pair<size_t, size_t> resize, size_t stride, size_t seq_len);

// All frames of a directory as a single (T,C,H,W) tensor list, no windowing.
std::vector<TensorF> load_frames(const std::filesystem::path& dir);

// positive_t = relu(x_{t+1} - x_t), negative_t = relu(x_t - x_{t+1}).
std::pair<std::vector<TensorF>, std::vector<TensorF>> frame_variation(
    const std::vector<TensorF>& seq);

// (T,C,H,W) sequence tensor -> per-frame (C,H,W) views and back.
std::vector<TensorF> split_frames(const TensorF& seq);

}  // namespace ppnet
