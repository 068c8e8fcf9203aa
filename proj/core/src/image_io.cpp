#include "panosum/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "panosum/errors.hpp"

namespace fs = std::filesystem;

namespace panosum::io {

namespace {

// ---------------------------------------------------------------- PNM

bool is_pnm_space(int c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

/// Reads one whitespace/comment-delimited unsigned integer from a PNM header.
int read_pnm_int(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  // skip whitespace and '#' comments
  while (pos < b.size()) {
    if (is_pnm_space(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size() || !std::isdigit(b[pos]))
    throw MalformedImage("invalid PNM header");
  long v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > 1 << 30) throw MalformedImage("PNM header value out of range");
    ++pos;
  }
  return static_cast<int>(v);
}

Image decode_pnm(const std::vector<std::uint8_t>& bytes, int channels) {
  std::size_t pos = 2;
  const int w = read_pnm_int(bytes, pos);
  const int h = read_pnm_int(bytes, pos);
  const int maxval = read_pnm_int(bytes, pos);
  if (w < 1 || h < 1) throw MalformedImage("non-positive PNM dimensions");
  if (maxval != 255)
    throw MalformedImage("only 8-bit PNM (maxval 255) is supported");
  if (pos >= bytes.size() || !is_pnm_space(bytes[pos]))
    throw MalformedImage("missing separator before PNM payload");
  ++pos;  // exactly one whitespace byte before the raster

  Image img(w, h, channels);
  const std::size_t need = img.pixels.size();
  if (bytes.size() - pos < need) throw MalformedImage("truncated PNM payload");
  std::memcpy(img.pixels.data(), bytes.data() + pos, need);
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
  char header[64];
  const int n = std::snprintf(header, sizeof header, "%s\n%d %d\n255\n",
                              img.channels == 1 ? "P5" : "P6", img.width,
                              img.height);
  std::vector<std::uint8_t> out(header, header + n);
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// ---------------------------------------------------------------- PNG

constexpr unsigned char kPngSignature[8] = {0x89, 0x50, 0x4E, 0x47,
                                            0x0D, 0x0A, 0x1A, 0x0A};

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw MalformedImage(std::string("PNG: ") + png.message);

  // Keep grayscale files single-channel; everything else becomes RGB.
  const bool gray = (png.format & (PNG_FORMAT_FLAG_COLOR |
                                   PNG_FORMAT_FLAG_COLORMAP)) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  Image img(static_cast<int>(png.width), static_cast<int>(png.height),
            gray ? 1 : 3);
  // Alpha, if present, is composited onto black.
  const png_color black{0, 0, 0};
  if (!png_image_finish_read(&png, &black, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw MalformedImage(std::string("PNG: ") + png.message);
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.pixels.data(), 0,
                                 nullptr))
    throw IoError(std::string("PNG encode: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.pixels.data(),
                                 0, nullptr))
    throw IoError(std::string("PNG encode: ") + png.message);
  out.resize(size);
  return out;
}

// ---------------------------------------------------------------- glob

/// Shell-style wildcard match supporting *, ? and [...] classes.
bool glob_match(const char* pat, const char* str) {
  if (*pat == '\0') return *str == '\0';
  if (*pat == '*') {
    for (const char* s = str;; ++s) {
      if (glob_match(pat + 1, s)) return true;
      if (*s == '\0') return false;
    }
  }
  if (*str == '\0') return false;
  if (*pat == '[') {
    const char* p = pat + 1;
    bool negate = (*p == '!' || *p == '^');
    if (negate) ++p;
    bool matched = false;
    bool first = true;
    char prev = 0;
    for (; *p && (*p != ']' || first); ++p, first = false) {
      if (*p == '-' && !first && p[1] && p[1] != ']') {
        ++p;
        if (*str >= prev && *str <= *p) matched = true;
      } else {
        if (*str == *p) matched = true;
        prev = *p;
      }
    }
    if (*p != ']') return false;  // unterminated class: no match
    if (matched == negate) return false;
    return glob_match(p + 1, str + 1);
  }
  if (*pat == '?' || *pat == *str) return glob_match(pat + 1, str + 1);
  return false;
}

bool has_supported_extension(const std::string& name) {
  const auto dot = name.rfind('.');
  if (dot == std::string::npos) return false;
  std::string ext = name.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == "ppm" || ext == "pgm" || ext == "png";
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path);
  return bytes;
}

}  // namespace

Image decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0)
    return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') {
    if (bytes[1] == '6') return decode_pnm(bytes, 3);
    if (bytes[1] == '5') return decode_pnm(bytes, 1);
  }
  throw UnsupportedFormat("unknown image magic");
}

std::vector<std::uint8_t> encode_image(const Image& image, ImageFormat format) {
  if (!image.valid()) throw InvalidValue("invalid image");
  switch (format) {
    case ImageFormat::PPM:
      return encode_pnm(image);
    case ImageFormat::PNG:
      return encode_png(image);
  }
  throw UnsupportedFormat("unknown encode format");
}

Image read_image_file(const std::string& path) {
  return decode_image(read_file_bytes(path));
}

void write_image_file(const std::string& path, const Image& image,
                      ImageFormat format) {
  const auto bytes = encode_image(image, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<Frame> load_frame_sequence(const std::string& directory,
                                       const std::string& glob_pattern) {
  if (!fs::is_directory(directory))
    throw IoError("not a directory: " + directory);

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (!glob_match(glob_pattern.c_str(), name.c_str())) continue;
    if (!has_supported_extension(name)) continue;
    names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw EmptySequence("no frames in " + directory);

  std::vector<Frame> frames;
  frames.reserve(names.size());
  for (const std::string& name : names) {
    Frame f;
    f.index = static_cast<int>(frames.size());
    f.source_name = name;
    f.image = read_image_file((fs::path(directory) / name).string());
    if (!frames.empty()) {
      const Image& first = frames.front().image;
      if (f.image.width != first.width || f.image.height != first.height ||
          f.image.channels != first.channels)
        throw DimensionMismatch("frame " + name +
                                " differs in size from the first frame");
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

CameraIntrinsics parse_intrinsics(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidValue(std::string("intrinsics: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidValue("intrinsics: not a JSON object");

  for (const char* key : {"fx", "fy", "cx", "cy"})
    if (!doc.contains(key))
      throw MissingField(std::string("intrinsics: missing ") + key);
  for (const auto& [key, value] : doc.items()) {
    if (key != "fx" && key != "fy" && key != "cx" && key != "cy")
      throw InvalidValue("intrinsics: unexpected key " + key);
    if (!value.is_number())
      throw InvalidValue("intrinsics: " + key + " is not a number");
  }

  CameraIntrinsics k;
  k.fx = doc["fx"].get<double>();
  k.fy = doc["fy"].get<double>();
  k.cx = doc["cx"].get<double>();
  k.cy = doc["cy"].get<double>();
  if (!(k.fx > 0) || !(k.fy > 0))
    throw InvalidValue("intrinsics: focal lengths must be positive");
  if (!std::isfinite(k.cx) || !std::isfinite(k.cy))
    throw InvalidValue("intrinsics: principal point must be finite");
  return k;
}

CameraIntrinsics load_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_intrinsics(text);
}

}  // namespace panosum::io
