#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "olar/label_oracle.hpp"
#include "olar/linalg.hpp"

namespace olar {

/// Feature rows in arrival order. Labels are not part of a stream; they sit
/// behind a LabelOracle.
class RowStream {
 public:
  virtual ~RowStream() = default;
  virtual Index dim() const = 0;
  /// Declared stream length n.
  virtual std::size_t size() const = 0;
  /// Index of the next row to be delivered.
  virtual std::size_t position() const = 0;
  /// Writes the next row into `row` (length dim()); false at the end.
  virtual bool next(Eigen::Ref<Vector> row) = 0;
  virtual void rewind() = 0;
};

class MemoryStream final : public RowStream {
 public:
  explicit MemoryStream(Matrix a) : a_(std::move(a)) {}
  Index dim() const override { return a_.cols(); }
  std::size_t size() const override { return static_cast<std::size_t>(a_.rows()); }
  std::size_t position() const override { return pos_; }
  bool next(Eigen::Ref<Vector> row) override;
  void rewind() override { pos_ = 0; }
  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
  std::size_t pos_ = 0;
};

inline constexpr std::uint16_t kStreamVersion = 1;
inline constexpr std::size_t kHeaderBytes = 19;

struct StreamHeader {
  std::uint16_t version = kStreamVersion;
  std::uint64_t n = 0;
  std::uint32_t d = 0;
  bool has_labels = false;

  std::uint64_t label_offset() const { return kHeaderBytes + 8ULL * n * d; }
  std::uint64_t file_bytes() const { return label_offset() + (has_labels ? 8ULL * n : 0); }
};

/// Validates magic, version and the file length against (n, d).
StreamHeader read_header(const std::string& path);

class BinaryFileStream final : public RowStream {
 public:
  explicit BinaryFileStream(const std::string& path);
  Index dim() const override { return static_cast<Index>(header_.d); }
  std::size_t size() const override { return header_.n; }
  std::size_t position() const override { return pos_; }
  bool next(Eigen::Ref<Vector> row) override;
  void rewind() override;
  const StreamHeader& header() const { return header_; }

 private:
  std::string path_;
  StreamHeader header_;
  std::ifstream in_;
  std::size_t pos_ = 0;
  std::vector<unsigned char> buf_;
};

/// CSV with the label in the last column. Opening scans the file once to
/// check its shape and remember where each label field starts; features are
/// parsed as rows are pulled, labels only when the oracle is asked.
class CsvFileStream final : public RowStream {
 public:
  explicit CsvFileStream(const std::string& path);
  Index dim() const override { return dim_; }
  std::size_t size() const override { return line_offsets_.size(); }
  std::size_t position() const override { return pos_; }
  bool next(Eigen::Ref<Vector> row) override;
  void rewind() override;

  std::unique_ptr<LabelOracle> make_oracle() const;

 private:
  std::string path_;
  Index dim_ = 0;
  std::vector<std::uint64_t> line_offsets_;
  std::vector<std::uint64_t> label_offsets_;
  std::ifstream in_;
  std::size_t pos_ = 0;
};

struct OpenedStream {
  std::unique_ptr<RowStream> stream;
  std::unique_ptr<LabelOracle> oracle;
};

/// Binary if the file starts with the stream magic, CSV otherwise.
OpenedStream open_stream(const std::string& path);

/// Everything in memory, labels included. Evaluation only: algorithms get a
/// stream and an oracle, never this.
struct Dataset {
  Matrix a;
  Vector b;
};
Dataset load_dataset(const std::string& path);

void write_binary_stream(const std::string& path, const MatrixRef& a, const std::optional<Vector>& b);
void write_csv_stream(const std::string& path, const MatrixRef& a, const VectorRef& b, bool header = false);

struct SyntheticSpec {
  std::size_t n = 1000;
  Index d = 10;
  double noise_std = 1.0;
  double p = 2.0;
  std::uint64_t seed = 0;
  /// Rows scaled up by inflate_factor; defaults to d rows.
  std::optional<std::size_t> inflate_count;
  /// Defaults to n^{1/p}.
  std::optional<double> inflate_factor;
};

struct SyntheticData {
  Matrix a;
  Vector b;
  Vector x_star;
  std::vector<std::size_t> inflated;
};

/// Gaussian rows, Gaussian planted x*, b = A x* + noise computed after the
/// chosen rows are inflated.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// Standard normal from the counter generator (Box-Muller on two draws).
double counter_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// stream.olar, x_star.csv and manifest.json under `dir`.
void write_synthetic(const std::string& dir, const SyntheticSpec& spec, const SyntheticData& data);

struct IngestReport {
  std::size_t rows = 0;
  Index d = 0;
  std::vector<double> mean;
  std::vector<double> std;
};

/// CSV -> binary stream. Columns are header names or 0-based indices; empty
/// feature list means every column except the label. With `normalize`,
/// each feature is standardized (std floored at 1e-12) and the statistics
/// go to `<out>.norm.json`.
IngestReport ingest_csv_dataset(const std::string& path, const std::vector<std::string>& feature_cols,
                                const std::string& label_col, bool normalize, const std::string& out_path);

}  // namespace olar
