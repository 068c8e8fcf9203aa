#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panosum/image.hpp"

namespace panosum::io {

enum class ImageFormat { PPM, PNG };

/// Decode binary PPM (P6), PGM (P5) or PNG from memory. PGM decodes to one
/// channel, P6 and color PNG to three; grayscale PNG stays one channel.
Image decode_image(const std::vector<std::uint8_t>& bytes);

/// Encode losslessly; decode_image(encode_image(x, f)) == x bit-exactly.
/// ImageFormat::PPM writes P5 for 1-channel images so the round trip holds.
std::vector<std::uint8_t> encode_image(const Image& image, ImageFormat format);

Image read_image_file(const std::string& path);
void write_image_file(const std::string& path, const Image& image,
                      ImageFormat format);

/// Load every file under `directory` whose name matches `glob_pattern`
/// (shell-style * ? [] wildcards) and has a supported extension
/// (.ppm/.pgm/.png, case-insensitive). Files are ordered by byte-wise
/// lexicographic name comparison and indexed 0..n-1. All frames must agree
/// on width/height/channels.
std::vector<Frame> load_frame_sequence(const std::string& directory,
                                       const std::string& glob_pattern = "*");

/// Parse the intrinsics document: a JSON object with exactly the keys
/// fx, fy, cx, cy (numbers, pixels).
CameraIntrinsics load_intrinsics(const std::string& path);
CameraIntrinsics parse_intrinsics(const std::string& json_text);

}  // namespace panosum::io
