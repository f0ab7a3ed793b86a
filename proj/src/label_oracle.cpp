#include "olar/label_oracle.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "olar/error.hpp"

namespace olar {

double LabelOracle::query(std::size_t row) {
  if (row >= size()) fail(ErrorCode::InvalidArgument, "label index " + std::to_string(row) + " out of range");
  const double y = fetch(row);
  revealed_.push_back(row);
  return y;
}

double VectorLabelOracle::fetch(std::size_t row) { return labels_[row]; }

FileLabelOracle::FileLabelOracle(std::string path, std::uint64_t label_offset, std::size_t n)
    : path_(std::move(path)), offset_(label_offset), n_(n), in_(path_, std::ios::binary) {
  if (!in_) fail(ErrorCode::Io, "cannot open " + path_);
}

double FileLabelOracle::fetch(std::size_t row) {
  const std::uint64_t at = offset_ + 8ULL * row;
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(at));
  unsigned char raw[8];
  if (!in_.read(reinterpret_cast<char*>(raw), 8))
    throw DataError(ErrorCode::UnexpectedEof, "label section truncated", row, at);
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | raw[i];
  return std::bit_cast<double>(bits);
}

}  // namespace olar
