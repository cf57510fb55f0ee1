#include "deepfd/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "deepfd/error.hpp"

namespace deepfd {
namespace {

// Parses the "P? width height maxval" header of a binary netpbm file and
// returns the offset of the first payload byte.
struct NetpbmHeader {
  std::size_t width = 0, height = 0, maxval = 0, payload = 0;
};

NetpbmHeader parse_header(std::span<const std::uint8_t> bytes, char magic, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<std::uint8_t>(magic))
    throw LoadError(name + ": not a binary P" + std::string(1, magic) + " file");
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw LoadError(name + ": malformed header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
      if (v > 1'000'000) throw LoadError(name + ": header value out of range");
    }
    return v;
  };
  NetpbmHeader h;
  h.width = number();
  h.height = number();
  h.maxval = number();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw LoadError(name + ": malformed header");
  h.payload = pos + 1;
  if (h.width == 0 || h.height == 0) throw LoadError(name + ": zero image dimension");
  if (h.maxval != 255) throw LoadError(name + ": maxval must be 255, got " + std::to_string(h.maxval));
  return h;
}

std::vector<std::uint8_t> with_header(const char* magic, std::size_t w, std::size_t h,
                                      std::span<const std::uint8_t> payload) {
  const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " +
                             std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  return with_header("P6", image.width, image.height, image.rgb);
}

Image decode_ppm(std::span<const std::uint8_t> bytes, const std::string& name) {
  const NetpbmHeader h = parse_header(bytes, '6', name);
  const std::size_t expected = h.width * h.height * 3;
  if (bytes.size() - h.payload < expected) throw LoadError(name + ": truncated pixel data");
  Image image(h.width, h.height);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload), expected, image.rgb.begin());
  return image;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  return with_header("P5", image.width, image.height, image.values);
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes, const std::string& name) {
  const NetpbmHeader h = parse_header(bytes, '5', name);
  const std::size_t expected = h.width * h.height;
  if (bytes.size() - h.payload < expected) throw LoadError(name + ": truncated pixel data");
  GrayImage image{h.width, h.height, {}};
  image.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload),
                      bytes.begin() + static_cast<std::ptrdiff_t>(h.payload + expected));
  return image;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw IoError(path.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(path.string() + ": rename failed");
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  return decode_ppm(read_file(path), path.string());
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_ppm(image));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  return decode_pgm(read_file(path), path.string());
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file_atomic(path, encode_pgm(image));
}

template <typename T>
Tensor<T> normalize_image(const Image& image) {
  const Image* one[] = {&image};
  Tensor<T> t = stack_images<T>(one);
  t.reshape({3, image.height, image.width});
  return t;
}

template <typename T>
Tensor<T> stack_images(std::span<const Image* const> images) {
  if (images.empty()) throw ArgumentError("stack_images: no images");
  const std::size_t w = images[0]->width, h = images[0]->height, plane = w * h;
  Tensor<T> out(Dims{images.size(), 3, h, w});
  T* dst = out.storage().data();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.width != w || img.height != h) throw ShapeError("stack_images: mixed image sizes");
    for (std::size_t p = 0; p < plane; ++p)
      for (std::size_t c = 0; c < 3; ++c)
        dst[(n * 3 + c) * plane + p] = static_cast<T>(img.rgb[p * 3 + c]) / T(127.5) - T(1);
  }
  return out;
}

template Tensor<float> normalize_image<float>(const Image&);
template Tensor<double> normalize_image<double>(const Image&);
template Tensor<float> stack_images<float>(std::span<const Image* const>);
template Tensor<double> stack_images<double>(std::span<const Image* const>);

}  // namespace deepfd
