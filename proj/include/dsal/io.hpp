#pragma once

#include "dsal/core.hpp"

#include <filesystem>
#include <vector>

namespace dsal {

/// Reads binary PGM (P5) or PPM (P6) with maxval <= 255. Color is converted
/// to grayscale with Rec. 601 luma weights; values are scaled to [0,1].
ImageGrid read_image(const std::filesystem::path& path);

/// Mask PGM: 0 is background, any value >= 128 is foreground.
BinaryMask read_mask(const std::filesystem::path& path);

/// Probability map stored as an 8-bit PGM (p * 255).
ProbMap read_prob_map(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const ImageGrid& image);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
void write_prob_map(const std::filesystem::path& path, const ProbMap& p);

/// Dataset layout: images/<id>.pgm, masks/<id>.pgm (optional per sample),
/// and an optional manifest.txt listing ids one per line. Without a manifest
/// the ids are the image file stems in lexicographic order.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

}  // namespace dsal
