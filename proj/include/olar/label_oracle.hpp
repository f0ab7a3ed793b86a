#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace olar {

/// The only path by which an algorithm may see a label. Every call to
/// `query` is one revealed label: it is counted and logged, so tests can
/// compare the log against the sampling decisions.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;

  double query(std::size_t row);

  std::size_t invocations() const { return revealed_.size(); }
  const std::vector<std::size_t>& revealed() const { return revealed_; }
  virtual std::size_t size() const = 0;

 protected:
  virtual double fetch(std::size_t row) = 0;

 private:
  std::vector<std::size_t> revealed_;
};

class VectorLabelOracle final : public LabelOracle {
 public:
  explicit VectorLabelOracle(std::vector<double> labels) : labels_(std::move(labels)) {}
  std::size_t size() const override { return labels_.size(); }

 protected:
  double fetch(std::size_t row) override;

 private:
  std::vector<double> labels_;
};

/// Reads label i by seeking into the label section of a binary stream file;
/// feature bytes are never touched.
class FileLabelOracle final : public LabelOracle {
 public:
  FileLabelOracle(std::string path, std::uint64_t label_offset, std::size_t n);
  std::size_t size() const override { return n_; }

 protected:
  double fetch(std::size_t row) override;

 private:
  std::string path_;
  std::uint64_t offset_;
  std::size_t n_;
  std::ifstream in_;
};

}  // namespace olar
