#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

// jpeglib.h relies on FILE and size_t being declared first
#include <jpeglib.h>

#include "taxa/assist.hpp"
#include "taxa/error.hpp"

namespace taxa {

namespace {

[[noreturn]] void decode_fail(const std::string& why) { throw Error(ErrorCode::DecodeError, why); }

// ---- PNM (P2/P3/P5/P6) -----------------------------------------------------

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> b) : b_(b) {}

  Raster read() {
    if (b_.size() < 2 || b_[0] != 'P') decode_fail("not a PNM image");
    const char kind = static_cast<char>(b_[1]);
    pos_ = 2;
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') decode_fail("unsupported PNM variant");
    const bool color = kind == '3' || kind == '6';
    const bool binary = kind == '5' || kind == '6';
    Raster r;
    r.width = static_cast<std::uint32_t>(number());
    r.height = static_cast<std::uint32_t>(number());
    const auto maxval = number();
    if (r.width == 0 || r.height == 0 || maxval == 0 || maxval > 65535) decode_fail("bad PNM header");
    if (static_cast<std::uint64_t>(r.width) * r.height > (1ull << 28)) decode_fail("PNM image too large");
    const std::size_t samples = static_cast<std::size_t>(r.width) * r.height * (color ? 3 : 1);
    std::vector<unsigned> raw(samples);
    if (binary) {
      ++pos_;  // single whitespace after maxval
      const std::size_t bytes = maxval > 255 ? 2 : 1;
      if (pos_ + samples * bytes > b_.size()) decode_fail("truncated PNM data");
      for (std::size_t i = 0; i < samples; ++i) {
        raw[i] = bytes == 1 ? b_[pos_ + i] : (static_cast<unsigned>(b_[pos_ + 2 * i]) << 8) | b_[pos_ + 2 * i + 1];
      }
    } else {
      for (auto& v : raw) v = static_cast<unsigned>(number());
    }
    r.rgb.resize(static_cast<std::size_t>(r.width) * r.height * 3);
    for (std::size_t px = 0; px < static_cast<std::size_t>(r.width) * r.height; ++px) {
      for (std::size_t c = 0; c < 3; ++c) {
        const unsigned v = raw[color ? 3 * px + c : px];
        if (v > maxval) decode_fail("PNM sample exceeds maxval");
        r.rgb[3 * px + c] = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
      }
    }
    return r;
  }

 private:
  unsigned long number() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) decode_fail("malformed PNM header");
    unsigned long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (1ul << 31)) decode_fail("PNM number out of range");
    }
    return v;
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

// ---- PNG -------------------------------------------------------------------

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    decode_fail(std::string("PNG: ") + img.message);
  img.format = PNG_FORMAT_RGB;
  Raster r;
  r.width = img.width;
  r.height = img.height;
  r.rgb.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, r.rgb.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    decode_fail("PNG: " + msg);
  }
  return r;
}

// ---- JPEG ------------------------------------------------------------------

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_on_error(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct info;
  JpegError err;
  info.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_on_error;
  Raster r;
  // no C++ objects with destructors may be created between setjmp and the
  // last libjpeg call; `r` is declared above
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    decode_fail(std::string("JPEG: ") + err.message);
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  r.width = info.output_width;
  r.height = info.output_height;
  r.rgb.resize(static_cast<std::size_t>(r.width) * r.height * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = r.rgb.data() + static_cast<std::size_t>(info.output_scanline) * r.width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return r;
}

}  // namespace

Raster decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return PnmReader(bytes).read();
  decode_fail("unrecognised image format");
}

Raster decode_image_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + file.string() + "'", {file.string()});
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.what(), {file.string()});
  }
}

}  // namespace taxa
