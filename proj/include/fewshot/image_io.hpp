#pragma once

#include <filesystem>

#include "fewshot/image.hpp"

namespace fewshot {

/// Decodes png/jpg/bmp into RGB in [0,1]. Throws IoError if undecodable.
Image read_image(const std::filesystem::path& path);

/// Writes 8-bit RGB; the format follows the file extension.
void write_image(const std::filesystem::path& path, const Image& img);

bool is_image_file(const std::filesystem::path& path);

} // namespace fewshot
