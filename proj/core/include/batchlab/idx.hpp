#pragma once

#include <string>

#include "batchlab/dataset.hpp"

namespace batchlab {

// IDX image/label files (the MNIST container format): big-endian headers,
// magic 0x00000803 for u8 image cubes and 0x00000801 for u8 label vectors.
//
// Loading scales pixels to [0,1] (divide by 255) and flattens rows*cols
// features. Errors: wrong magic -> FormatError, truncated payload ->
// IoError, image/label count disagreement -> ConsistencyError.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_mnist_idx. Every input value must be k/255 for integer
// k in [0,255]; anything else would not survive the 8-bit round trip and is
// rejected (NumericError). rows*cols must equal the feature dimension.
void save_mnist_idx(const Dataset& ds, const std::string& images_path,
                    const std::string& labels_path, std::size_t rows, std::size_t cols);

}  // namespace batchlab
