#include "chartex/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace chartex {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Image from_rgb8(const std::vector<unsigned char>& buf, int h, int w) {
  Image img;
  img.h = h;
  img.w = w;
  img.px.resize(static_cast<size_t>(h) * w * 3);
  for (size_t i = 0; i < img.px.size(); ++i) img.px[i] = buf[i] / 255.0;
  return img;
}

Image load_png_file(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_palette_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = &buf[static_cast<size_t>(y) * w * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rgb8(buf, h, w);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Image load_jpeg_file(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path);
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("corrupt JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = &buf[static_cast<size_t>(cinfo.output_scanline) * w * 3];
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_rgb8(buf, h, w);
}

bool has_suffix(const std::string& s, const std::string& suf) {
  if (s.size() < suf.size()) return false;
  std::string tail = s.substr(s.size() - suf.size());
  std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
  return tail == suf;
}

}  // namespace

Image load_image(const std::string& path) {
  if (has_suffix(path, ".png")) return load_png_file(path);
  if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) return load_jpeg_file(path);
  // Unknown extension: sniff the magic bytes.
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path);
  unsigned char magic[4] = {0, 0, 0, 0};
  const size_t n = std::fread(magic, 1, 4, fp.get());
  fp.reset();
  if (n >= 4 && magic[0] == 0x89 && magic[1] == 'P') return load_png_file(path);
  if (n >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg_file(path);
  throw DataError("unsupported image format: " + path);
}

void save_png(const Image& img, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<size_t>(img.w) * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        row[static_cast<size_t>(x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace chartex
