#include "batchlab/idx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "batchlab/error.hpp"

namespace batchlab {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803u;
constexpr std::uint32_t kLabelsMagic = 0x00000801u;

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IoError("idx: truncated header in " + path);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open " + images_path);
  if (read_be32(img, images_path) != kImagesMagic)
    throw FormatError("idx: bad image magic in " + images_path);
  const std::uint32_t n_images = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);
  if (n_images == 0 || rows == 0 || cols == 0)
    throw FormatError("idx: degenerate image dimensions in " + images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open " + labels_path);
  if (read_be32(lab, labels_path) != kLabelsMagic)
    throw FormatError("idx: bad label magic in " + labels_path);
  const std::uint32_t n_labels = read_be32(lab, labels_path);
  if (n_labels != n_images)
    throw ConsistencyError("idx: image/label counts disagree (" + std::to_string(n_images) +
                           " vs " + std::to_string(n_labels) + ")");

  const std::size_t d = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(n_images) * d);
  if (!img.read(reinterpret_cast<char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size())))
    throw IoError("idx: truncated image payload in " + images_path);
  std::vector<unsigned char> raw_labels(n_labels);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                static_cast<std::streamsize>(raw_labels.size())))
    throw IoError("idx: truncated label payload in " + labels_path);

  Dataset ds;
  ds.inputs = Tensor::zeros({n_images, d});
  ds.labels.resize(n_labels);
  double* out = ds.inputs.data();
  for (std::size_t i = 0; i < pixels.size(); ++i)
    out[i] = static_cast<double>(pixels[i]) / 255.0;
  int top = 0;
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    ds.labels[i] = static_cast<int>(raw_labels[i]);
    top = std::max(top, ds.labels[i]);
  }
  ds.num_classes = std::max(2, top + 1);
  validate_dataset(ds);
  return ds;
}

void save_mnist_idx(const Dataset& ds, const std::string& images_path,
                    const std::string& labels_path, std::size_t rows, std::size_t cols) {
  validate_dataset(ds);
  if (rows * cols != ds.dim())
    throw DimensionError("idx: rows*cols must equal the feature dimension");
  if (ds.num_classes > 256) throw ParameterError("idx: labels exceed one byte");

  std::vector<unsigned char> pixels(ds.size() * ds.dim());
  const double* in = ds.inputs.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double scaled = in[i] * 255.0;
    const double rounded = std::round(scaled);
    if (rounded < 0.0 || rounded > 255.0 || std::abs(scaled - rounded) > 1e-9)
      throw NumericError("idx: pixel value is not an exact 8-bit gray level");
    pixels[i] = static_cast<unsigned char>(rounded);
  }

  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open " + images_path + " for writing");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!img) throw IoError("idx: write failed for " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open " + labels_path + " for writing");
  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  std::vector<unsigned char> raw(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) raw[i] = static_cast<unsigned char>(ds.labels[i]);
  lab.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!lab) throw IoError("idx: write failed for " + labels_path);
}

}  // namespace batchlab
