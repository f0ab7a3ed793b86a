#include "olar/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <string_view>

#include "json.hpp"

#include "bytes.hpp"
#include "olar/sampling.hpp"

namespace olar {
namespace {

constexpr char kMagic[5] = "OLAR";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t c = line.find(',', start);
    if (c == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, c - start));
    start = c + 1;
  }
}

bool all_numeric(const std::vector<std::string_view>& fields) {
  double v;
  return std::all_of(fields.begin(), fields.end(), [&](std::string_view f) { return parse_double(f, v); });
}

bool blank(std::string_view line) { return trim(line).empty(); }

double parse_field(std::string_view f, std::size_t row, std::uint64_t offset) {
  double v;
  if (!parse_double(f, v))
    throw DataError(ErrorCode::NonNumeric, "non-numeric field '" + std::string(trim(f)) + "'",
                    static_cast<std::int64_t>(row), static_cast<std::int64_t>(offset));
  if (!std::isfinite(v))
    throw DataError(ErrorCode::NonFiniteEntry, "non-finite entry", static_cast<std::int64_t>(row),
                    static_cast<std::int64_t>(offset));
  return v;
}

class CsvLabelOracle final : public LabelOracle {
 public:
  CsvLabelOracle(std::string path, std::vector<std::uint64_t> offsets)
      : path_(std::move(path)), offsets_(std::move(offsets)), in_(path_, std::ios::binary) {
    if (!in_) fail(ErrorCode::Io, "cannot open " + path_);
  }
  std::size_t size() const override { return offsets_.size(); }

 protected:
  double fetch(std::size_t row) override {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(offsets_[row]));
    std::string field;
    std::getline(in_, field);
    return parse_field(field, row, offsets_[row]);
  }

 private:
  std::string path_;
  std::vector<std::uint64_t> offsets_;
  std::ifstream in_;
};

void write_all(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool MemoryStream::next(Eigen::Ref<Vector> row) {
  if (pos_ >= size()) return false;
  row = a_.row(static_cast<Index>(pos_++)).transpose();
  return true;
}

StreamHeader read_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> head(kHeaderBytes);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(kHeaderBytes));
  if (size < 4 || std::memcmp(head.data(), kMagic, 4) != 0)
    throw DataError(ErrorCode::BadHeader, "missing OLAR magic in " + path, -1, 0);
  if (size < kHeaderBytes)
    throw DataError(ErrorCode::UnexpectedEof, "header truncated in " + path, -1, static_cast<std::int64_t>(size));
  bytes::Reader r(head);
  r.expect_magic("OLAR");
  StreamHeader h;
  h.version = r.get<std::uint16_t>();
  if (h.version != kStreamVersion)
    throw DataError(ErrorCode::BadHeader, "unsupported stream version " + std::to_string(h.version), -1, 4);
  h.n = r.get<std::uint64_t>();
  h.d = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint8_t>();
  if (flags & ~1u) throw DataError(ErrorCode::BadHeader, "unknown flag bits", -1, 18);
  h.has_labels = flags & 1u;
  if (h.d == 0) throw DataError(ErrorCode::BadHeader, "zero feature dimension", -1, 14);
  if (size < h.file_bytes())
    throw DataError(ErrorCode::UnexpectedEof,
                    "file holds " + std::to_string(size) + " bytes, header promises " + std::to_string(h.file_bytes()),
                    static_cast<std::int64_t>(size > kHeaderBytes ? (size - kHeaderBytes) / (8ULL * h.d) : 0),
                    static_cast<std::int64_t>(size));
  return h;
}

BinaryFileStream::BinaryFileStream(const std::string& path)
    : path_(path), header_(read_header(path)), in_(path, std::ios::binary) {
  if (!in_) fail(ErrorCode::Io, "cannot open " + path);
  buf_.resize(8ULL * header_.d);
  rewind();
}

void BinaryFileStream::rewind() {
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(kHeaderBytes));
  pos_ = 0;
}

bool BinaryFileStream::next(Eigen::Ref<Vector> row) {
  if (pos_ >= header_.n) return false;
  const std::uint64_t at = kHeaderBytes + 8ULL * header_.d * pos_;
  if (!in_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size())))
    throw DataError(ErrorCode::UnexpectedEof, "feature section truncated", static_cast<std::int64_t>(pos_),
                    static_cast<std::int64_t>(at));
  for (std::uint32_t j = 0; j < header_.d; ++j) {
    const double v = bytes::load_f64(buf_.data() + 8 * j);
    if (!std::isfinite(v))
      throw DataError(ErrorCode::NonFiniteEntry, "non-finite feature", static_cast<std::int64_t>(pos_),
                      static_cast<std::int64_t>(at + 8 * j));
    row[j] = v;
  }
  ++pos_;
  return true;
}

CsvFileStream::CsvFileStream(const std::string& path) : path_(path) {
  std::ifstream scan(path, std::ios::binary);
  if (!scan) fail(ErrorCode::Io, "cannot open " + path);
  std::string line;
  std::uint64_t offset = 0;
  std::size_t expected = 0;
  bool first = true;
  while (std::getline(scan, line)) {
    const std::uint64_t start = offset;
    offset += line.size() + 1;
    if (blank(line)) continue;
    const auto fields = split(line);
    if (first) {
      first = false;
      expected = fields.size();
      if (expected < 2) throw DataError(ErrorCode::RaggedRow, "CSV needs at least one feature and a label", 0, 0);
      if (!all_numeric(fields)) continue;  // header row
    }
    if (fields.size() != expected)
      throw DataError(ErrorCode::RaggedRow,
                      "expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()),
                      static_cast<std::int64_t>(line_offsets_.size()), static_cast<std::int64_t>(start));
    line_offsets_.push_back(start);
    const std::size_t label_pos = static_cast<std::size_t>(fields.back().data() - line.data());
    label_offsets_.push_back(start + label_pos);
  }
  dim_ = static_cast<Index>(expected) - 1;
  in_.open(path, std::ios::binary);
  rewind();
}

void CsvFileStream::rewind() {
  in_.clear();
  in_.seekg(0);
  pos_ = 0;
}

bool CsvFileStream::next(Eigen::Ref<Vector> row) {
  if (pos_ >= line_offsets_.size()) return false;
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(line_offsets_[pos_]));
  std::string line;
  std::getline(in_, line);
  const auto fields = split(line);
  for (Index j = 0; j < dim_; ++j) row[j] = parse_field(fields[static_cast<std::size_t>(j)], pos_, line_offsets_[pos_]);
  ++pos_;
  return true;
}

std::unique_ptr<LabelOracle> CsvFileStream::make_oracle() const {
  return std::make_unique<CsvLabelOracle>(path_, label_offsets_);
}

OpenedStream open_stream(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(ErrorCode::Io, "cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  OpenedStream out;
  if (probe.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0) {
    auto s = std::make_unique<BinaryFileStream>(path);
    if (!s->header().has_labels) fail(ErrorCode::MissingColumn, path + " carries no labels");
    out.oracle = std::make_unique<FileLabelOracle>(path, s->header().label_offset(), s->size());
    out.stream = std::move(s);
  } else {
    auto s = std::make_unique<CsvFileStream>(path);
    out.oracle = s->make_oracle();
    out.stream = std::move(s);
  }
  return out;
}

Dataset load_dataset(const std::string& path) {
  OpenedStream s = open_stream(path);
  Dataset d;
  d.a.resize(static_cast<Index>(s.stream->size()), s.stream->dim());
  d.b.resize(d.a.rows());
  Vector row(s.stream->dim());
  for (Index i = 0; s.stream->next(row); ++i) {
    d.a.row(i) = row.transpose();
    d.b[i] = s.oracle->query(static_cast<std::size_t>(i));
  }
  return d;
}

void write_binary_stream(const std::string& path, const MatrixRef& a, const std::optional<Vector>& b) {
  if (b && b->size() != a.rows()) fail(ErrorCode::DimensionMismatch, "label count");
  if (!a.allFinite() || (b && !b->allFinite())) fail(ErrorCode::NonFinite, "stream contents");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 8 * static_cast<std::size_t>(a.size() + a.rows()));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(kMagic[i]));
  bytes::put<std::uint16_t>(out, kStreamVersion);
  bytes::put<std::uint64_t>(out, static_cast<std::uint64_t>(a.rows()));
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.cols()));
  bytes::put<std::uint8_t>(out, b ? 1 : 0);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) bytes::put<double>(out, a(i, j));
  if (b)
    for (Index i = 0; i < b->size(); ++i) bytes::put<double>(out, (*b)[i]);
  write_all(path, out);
}

void write_csv_stream(const std::string& path, const MatrixRef& a, const VectorRef& b, bool header) {
  if (b.size() != a.rows()) fail(ErrorCode::DimensionMismatch, "label count");
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  if (header) {
    for (Index j = 0; j < a.cols(); ++j) out << "x" << j << ",";
    out << "y\n";
  }
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out << fmt17(a(i, j)) << ",";
    out << fmt17(b[i]) << "\n";
  }
}

double counter_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const CounterRng rng(seed);
  // u1 in (0,1] so the log is finite
  const double u1 = 1.0 - rng.uniform(stream, 2 * index);
  const double u2 = rng.uniform(stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  if (spec.d < 1 || spec.n <= static_cast<std::size_t>(spec.d))
    fail(ErrorCode::InvalidArgument, "synthetic data needs n > d >= 1");
  if (!(spec.p >= 1.0 && spec.p <= 2.0)) fail(ErrorCode::InvalidArgument, "synthetic p must lie in [1,2]");
  if (!(spec.noise_std >= 0.0)) fail(ErrorCode::InvalidArgument, "noise std must be non-negative");
  const std::size_t inflate = spec.inflate_count.value_or(static_cast<std::size_t>(spec.d));
  if (inflate > spec.n) fail(ErrorCode::InvalidArgument, "inflate_count exceeds n");
  const double factor = spec.inflate_factor.value_or(std::pow(static_cast<double>(spec.n), 1.0 / spec.p));

  const auto n = static_cast<Index>(spec.n);
  const Index d = spec.d;
  const std::uint64_t s_rows = stream_id(StreamId::Synthetic, 0);
  const std::uint64_t s_x = stream_id(StreamId::Synthetic, 1);
  const std::uint64_t s_noise = stream_id(StreamId::Synthetic, 2);
  const std::uint64_t s_pick = stream_id(StreamId::Synthetic, 3);

  SyntheticData out;
  out.a.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      out.a(i, j) = counter_gaussian(spec.seed, s_rows, static_cast<std::uint64_t>(i * d + j));
  out.x_star.resize(d);
  for (Index j = 0; j < d; ++j) out.x_star[j] = counter_gaussian(spec.seed, s_x, static_cast<std::uint64_t>(j));

  // partial Fisher-Yates for a uniform inflate-sized subset
  std::vector<std::size_t> idx(spec.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const CounterRng rng(spec.seed);
  for (std::size_t k = 0; k < inflate; ++k) {
    const std::size_t r = k + static_cast<std::size_t>(rng.bits(s_pick, k) % (spec.n - k));
    std::swap(idx[k], idx[r]);
  }
  out.inflated.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(inflate));
  std::sort(out.inflated.begin(), out.inflated.end());
  for (std::size_t i : out.inflated) out.a.row(static_cast<Index>(i)) *= factor;

  out.b = out.a * out.x_star;
  if (spec.noise_std > 0.0)
    for (Index i = 0; i < n; ++i)
      out.b[i] += spec.noise_std * counter_gaussian(spec.seed, s_noise, static_cast<std::uint64_t>(i));
  return out;
}

void write_synthetic(const std::string& dir, const SyntheticSpec& spec, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  write_binary_stream((root / "stream.olar").string(), data.a, data.b);
  {
    std::ofstream xs(root / "x_star.csv", std::ios::trunc);
    if (!xs) fail(ErrorCode::Io, "cannot write x_star.csv");
    for (Index j = 0; j < data.x_star.size(); ++j) xs << fmt17(data.x_star[j]) << "\n";
  }
  nlohmann::ordered_json m;
  m["format"] = "olar-stream";
  m["version"] = kStreamVersion;
  m["n"] = spec.n;
  m["d"] = spec.d;
  m["p"] = spec.p;
  m["noise_std"] = spec.noise_std;
  m["seed"] = spec.seed;
  m["inflate_count"] = data.inflated.size();
  m["inflate_factor"] = spec.inflate_factor.value_or(std::pow(static_cast<double>(spec.n), 1.0 / spec.p));
  m["inflated_rows"] = data.inflated;
  m["files"] = {{"stream", "stream.olar"}, {"x_star", "x_star.csv"}};
  std::ofstream mf(root / "manifest.json", std::ios::trunc);
  if (!mf) fail(ErrorCode::Io, "cannot write manifest.json");
  mf << m.dump(2) << "\n";
}

IngestReport ingest_csv_dataset(const std::string& path, const std::vector<std::string>& feature_cols,
                                const std::string& label_col, bool normalize, const std::string& out_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::vector<std::string> lines;
  std::vector<std::uint64_t> offsets;
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    const std::uint64_t start = offset;
    offset += line.size() + 1;
    if (blank(line)) continue;
    lines.push_back(line);
    offsets.push_back(start);
  }
  if (lines.empty()) throw DataError(ErrorCode::UnexpectedEof, "empty CSV", -1, 0);

  const auto first = split(lines[0]);
  const std::size_t width = first.size();
  std::vector<std::string> names;
  const bool has_header = !all_numeric(first);
  if (has_header)
    for (auto f : first) names.emplace_back(trim(f));

  auto resolve = [&](const std::string& col) -> std::size_t {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == col) return j;
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(col.data(), col.data() + col.size(), idx);
    if (ec != std::errc() || ptr != col.data() + col.size() || idx >= width)
      fail(ErrorCode::MissingColumn, "no column '" + col + "'");
    return idx;
  };
  const std::size_t label = label_col.empty() ? width - 1 : resolve(label_col);
  std::vector<std::size_t> feats;
  if (feature_cols.empty()) {
    for (std::size_t j = 0; j < width; ++j)
      if (j != label) feats.push_back(j);
  } else {
    for (const std::string& c : feature_cols) feats.push_back(resolve(c));
  }
  if (feats.empty()) fail(ErrorCode::MissingColumn, "no feature columns");

  const std::size_t start = has_header ? 1 : 0;
  const auto n = static_cast<Index>(lines.size() - start);
  const auto d = static_cast<Index>(feats.size());
  Matrix a(n, d);
  Vector b(n);
  for (Index i = 0; i < n; ++i) {
    const std::size_t li = start + static_cast<std::size_t>(i);
    const auto fields = split(lines[li]);
    if (fields.size() != width)
      throw DataError(ErrorCode::RaggedRow, "expected " + std::to_string(width) + " fields", i,
                      static_cast<std::int64_t>(offsets[li]));
    for (Index j = 0; j < d; ++j) a(i, j) = parse_field(fields[feats[static_cast<std::size_t>(j)]], static_cast<std::size_t>(i), offsets[li]);
    b[i] = parse_field(fields[label], static_cast<std::size_t>(i), offsets[li]);
  }

  IngestReport rep;
  rep.rows = static_cast<std::size_t>(n);
  rep.d = d;
  if (normalize) {
    for (Index j = 0; j < d; ++j) {
      const double mean = n ? a.col(j).mean() : 0.0;
      const double var = n ? (a.col(j).array() - mean).square().mean() : 0.0;
      const double sd = std::max(std::sqrt(var), 1e-12);
      a.col(j) = (a.col(j).array() - mean) / sd;
      rep.mean.push_back(mean);
      rep.std.push_back(sd);
    }
    nlohmann::ordered_json side;
    side["source"] = std::filesystem::path(path).filename().string();
    side["label_column"] = label;
    side["feature_columns"] = feats;
    side["mean"] = rep.mean;
    side["std"] = rep.std;
    std::ofstream sf(out_path + ".norm.json", std::ios::trunc);
    if (!sf) fail(ErrorCode::Io, "cannot write normalization sidecar");
    sf << side.dump(2) << "\n";
  }
  write_binary_stream(out_path, a, b);
  return rep;
}

}  // namespace olar
