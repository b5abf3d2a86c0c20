#ifndef SADL_DATA_IO_HPP_
#define SADL_DATA_IO_HPP_

// Dataset ingestion and generation.
//
// Matrix files come in two formats:
//   CSV     UTF-8 text, one matrix row per line, comma separated, '.' decimal
//           point, values written in the shortest form that reads back exactly.
//   SADL1   binary: the 5 ASCII bytes "SADL1", u32 rows, u32 cols (both
//           little-endian), then rows*cols little-endian IEEE-754 doubles in
//           column-major order, so each sample (column) is contiguous.
// Label files hold one 1-based integer class label per line.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "sadl/error.hpp"
#include "sadl/model.hpp"
#include "sadl/random.hpp"

namespace sadl {

struct LabeledDataset {
  Matrix x;       // m x n
  Labels labels;  // length n, values in [1..c]
  int class_count = 0;

  Eigen::Index samples() const { return x.cols(); }

  void validate() const {
    if (static_cast<std::size_t>(x.cols()) != labels.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "dataset has " + std::to_string(x.cols()) + " samples but " +
                                                     std::to_string(labels.size()) + " labels");
    }
    std::vector<int> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
    for (int l : labels) {
      if (l < 1 || l > class_count) {
        throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(l) + " outside [1.." +
                                                     std::to_string(class_count) + "]");
      }
      ++counts[static_cast<std::size_t>(l - 1)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (counts[k] == 0) throw Error(ErrorKind::kClassTooSmall, "class " + std::to_string(k + 1) + " has no samples");
    }
  }
};

inline std::vector<int> class_counts(const Labels& labels, int c) {
  std::vector<int> counts(static_cast<std::size_t>(c), 0);
  for (int l : labels) {
    if (l < 1 || l > c) throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(l) + " outside [1.." + std::to_string(c) + "]");
    ++counts[static_cast<std::size_t>(l - 1)];
  }
  return counts;
}

inline int max_label(const Labels& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

//! Builds H. With neither argument given, s = n and class k gets as many rows
//! as it has samples. With only `total_rows`, rows are split as evenly as
//! possible (earlier classes take the remainder). `rows_per_class`, when
//! given, must sum to `total_rows` if that is also given.
inline StructureTarget build_structure_target(const Labels& labels,
                                              const std::optional<std::vector<Eigen::Index>>& rows_per_class = std::nullopt,
                                              std::optional<Eigen::Index> total_rows = std::nullopt,
                                              std::optional<int> classes = std::nullopt) {
  const int c = classes.value_or(max_label(labels));
  if (c < 1) throw Error(ErrorKind::kInvalidBlockSpec, "no classes");
  std::vector<Eigen::Index> sizes;
  if (rows_per_class) {
    sizes = *rows_per_class;
    if (static_cast<int>(sizes.size()) != c) {
      throw Error(ErrorKind::kInvalidBlockSpec, "need one row count per class");
    }
    const Eigen::Index sum = std::accumulate(sizes.begin(), sizes.end(), Eigen::Index{0});
    if (total_rows && *total_rows != sum) {
      throw Error(ErrorKind::kInvalidBlockSpec, "row counts sum to " + std::to_string(sum) + ", not " +
                                                    std::to_string(*total_rows));
    }
  } else if (total_rows) {
    if (*total_rows < c) throw Error(ErrorKind::kInvalidBlockSpec, "need at least one row per class");
    sizes.assign(static_cast<std::size_t>(c), *total_rows / c);
    for (Eigen::Index k = 0; k < *total_rows % c; ++k) ++sizes[static_cast<std::size_t>(k)];
  } else {
    const auto counts = class_counts(labels, c);
    sizes.assign(counts.begin(), counts.end());
  }
  std::vector<RowBlock> blocks;
  Eigen::Index offset = 0;
  for (Eigen::Index sz : sizes) {
    if (sz < 1) throw Error(ErrorKind::kInvalidBlockSpec, "every class needs at least one row");
    blocks.push_back({offset, sz});
    offset += sz;
  }
  return StructureTarget(labels, std::move(blocks));
}

inline LabelMatrix one_hot_labels(const Labels& labels, int c) {
  Matrix y = Matrix::Zero(c, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int l = labels[j];
    if (l < 1 || l > c) {
      throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(l) + " outside [1.." + std::to_string(c) + "]");
    }
    y(l - 1, static_cast<Eigen::Index>(j)) = 1.0;
  }
  return LabelMatrix(std::move(y));
}

//! Gaussian d x m matrix with unit-norm rows.
inline Matrix projection_matrix(Eigen::Index d, Eigen::Index m, std::uint64_t seed) {
  if (d < 1 || m < 1) throw Error(ErrorKind::kInvalidDims, "projection dims must be positive");
  Rng rng(seed);
  Matrix p = gaussian_matrix(d, m, rng);
  p.rowwise().normalize();
  return p;
}

inline Matrix random_projection(const Matrix& x, Eigen::Index d, std::uint64_t seed) {
  return projection_matrix(d, x.rows(), seed) * x;
}

//! Scales every nonzero column to unit l2 norm.
inline void normalize_columns(Matrix& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double n = x.col(j).norm();
    if (n > 0) x.col(j) /= n;
  }
}

struct SynthParams {
  int classes = 3;
  int subspace_dim = 5;
  int ambient_dim = 60;
  int per_class = 100;
  double noise_sigma = 0.05;
  std::uint64_t seed = 42;
  bool orthogonal = false;  // mutually orthogonal class subspaces
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

namespace detail {

inline Matrix orthonormal_basis(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

inline LabeledDataset take_columns(const LabeledDataset& ds, const std::vector<Eigen::Index>& cols) {
  LabeledDataset out;
  out.class_count = ds.class_count;
  out.x.resize(ds.x.rows(), static_cast<Eigen::Index>(cols.size()));
  out.labels.reserve(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.x.col(static_cast<Eigen::Index>(j)) = ds.x.col(cols[j]);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(cols[j])]);
  }
  return out;
}

}  // namespace detail

//! Stratified split. Per class, `train_count(class_size)` samples go to
//! training; each side must keep at least one sample of every class.
template <typename TrainCount>
TrainTestSplit split_by(const LabeledDataset& ds, TrainCount train_count, std::uint64_t seed) {
  ds.validate();
  Rng rng(seed);
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(ds.class_count));
  for (std::size_t j = 0; j < ds.labels.size(); ++j) {
    by_class[static_cast<std::size_t>(ds.labels[j] - 1)].push_back(static_cast<Eigen::Index>(j));
  }
  std::vector<Eigen::Index> train_cols, test_cols;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& idx = by_class[k];
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(train_count(static_cast<int>(idx.size())));
    if (n_train < 1 || n_train >= idx.size()) {
      throw Error(ErrorKind::kClassTooSmall, "class " + std::to_string(k + 1) + " with " + std::to_string(idx.size()) +
                                                 " samples cannot be split with " + std::to_string(n_train) +
                                                 " for training");
    }
    train_cols.insert(train_cols.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_cols.insert(test_cols.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(train_cols.begin(), train_cols.end());
  std::sort(test_cols.begin(), test_cols.end());
  return {detail::take_columns(ds, train_cols), detail::take_columns(ds, test_cols)};
}

inline TrainTestSplit split(const LabeledDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw Error(ErrorKind::kInvalidDims, "train fraction must be in (0, 1)");
  }
  return split_by(ds, [train_fraction](int size) { return static_cast<int>(std::lround(train_fraction * size)); }, seed);
}

inline TrainTestSplit split_per_class(const LabeledDataset& ds, int per_class_count, std::uint64_t seed) {
  return split_by(ds, [per_class_count](int) { return per_class_count; }, seed);
}

//! Union-of-subspaces benchmark. Class k draws an orthonormal basis B_k
//! (ambient x subspace_dim); a sample is B_k |a| + sigma * noise with a and
//! noise standard normal. Folding the coefficients into the positive orthant
//! keeps each class inside a cone of its subspace, which a linear scorer can
//! separate (a full subspace through the origin cannot be, since x and -x
//! share a class). Returned split is stratified 50/50.
inline TrainTestSplit synth_dataset(const SynthParams& p) {
  if (p.classes < 2 || p.subspace_dim < 1 || p.per_class < 2 || !(p.noise_sigma >= 0) ||
      p.subspace_dim >= p.ambient_dim) {
    throw Error(ErrorKind::kInvalidDims, "synthetic dataset needs classes >= 2, per_class >= 2, noise >= 0 and "
                                         "0 < subspace_dim < ambient_dim");
  }
  if (p.orthogonal && p.classes * p.subspace_dim > p.ambient_dim) {
    throw Error(ErrorKind::kInvalidDims, "orthogonal subspaces need classes * subspace_dim <= ambient_dim");
  }
  Rng rng(p.seed);
  const Eigen::Index m = p.ambient_dim, k = p.subspace_dim;
  std::vector<Matrix> bases;
  if (p.orthogonal) {
    const Matrix all = detail::orthonormal_basis(gaussian_matrix(m, k * p.classes, rng));
    for (int c = 0; c < p.classes; ++c) bases.push_back(all.middleCols(c * k, k));
  } else {
    for (int c = 0; c < p.classes; ++c) bases.push_back(detail::orthonormal_basis(gaussian_matrix(m, k, rng)));
  }
  LabeledDataset ds;
  ds.class_count = p.classes;
  ds.x.resize(m, static_cast<Eigen::Index>(p.classes) * p.per_class);
  Eigen::Index col = 0;
  for (int c = 0; c < p.classes; ++c) {
    const Matrix coeffs = gaussian_matrix(k, p.per_class, rng).cwiseAbs();
    const Matrix noise = gaussian_matrix(m, p.per_class, rng);
    ds.x.middleCols(col, p.per_class) = bases[static_cast<std::size_t>(c)] * coeffs + p.noise_sigma * noise;
    ds.labels.insert(ds.labels.end(), static_cast<std::size_t>(p.per_class), c + 1);
    col += p.per_class;
  }
  return split(ds, 0.5, p.seed + 1);
}

// ---------------------------------------------------------------------------
// File formats

enum class MatrixFormat { kCsv, kBinary };

inline MatrixFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return (ext == ".csv" || ext == ".txt") ? MatrixFormat::kCsv : MatrixFormat::kBinary;
}

inline constexpr std::array<char, 5> kBinaryMagic = {'S', 'A', 'D', 'L', '1'};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIoError, "short write to " + path.string());
}

//! Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace detail

inline std::string encode_binary(const Matrix& a) {
  std::string out(kBinaryMagic.begin(), kBinaryMagic.end());
  out.reserve(out.size() + 8 + static_cast<std::size_t>(a.size()) * 8);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) detail::put_le<double>(out, a(i, j));
  }
  return out;
}

inline Matrix decode_binary(std::string_view bytes) {
  if (bytes.size() < kBinaryMagic.size() ||
      !std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::kMagicMismatch, "missing SADL1 header");
  }
  if (bytes.size() < 13) throw Error(ErrorKind::kParseError, "truncated SADL1 header");
  const auto rows = detail::get_le<std::uint32_t>(bytes.data() + 5);
  const auto cols = detail::get_le<std::uint32_t>(bytes.data() + 9);
  const std::uint64_t expected = 13 + std::uint64_t{rows} * cols * 8;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kParseError, "SADL1 payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                                            std::to_string(expected));
  }
  Matrix a(rows, cols);
  const char* p = bytes.data() + 13;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i, p += 8) a(i, j) = detail::get_le<double>(p);
  }
  return a;
}

inline std::string encode_csv(const Matrix& a) {
  std::string out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out += ',';
      out += detail::format_double(a(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Matrix decode_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t col_no = 0;
    std::size_t pos = 0;
    while (true) {
      ++col_no;
      const auto comma = line.find(',', pos);
      std::string_view field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      double v = 0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw Error(ErrorKind::kParseError, "line " + std::to_string(line_no) + ", column " + std::to_string(col_no) +
                                                ": cannot parse '" + std::string(field) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::kParseError, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(rows.front().size()) + " columns, got " +
                                              std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::kParseError, "empty matrix file");
  Matrix a(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return a;
}

inline Matrix load_matrix(const std::filesystem::path& path, std::optional<MatrixFormat> format = std::nullopt) {
  const std::string bytes = detail::read_file(path);
  try {
    return format.value_or(format_for_path(path)) == MatrixFormat::kCsv ? decode_csv(bytes) : decode_binary(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.message());
  }
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& a,
                        std::optional<MatrixFormat> format = std::nullopt) {
  detail::write_file(path, format.value_or(format_for_path(path)) == MatrixFormat::kCsv ? encode_csv(a) : encode_binary(a));
}

inline Labels load_labels(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  Labels labels;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    while (!sv.empty() && (sv.back() == '\r' || sv.back() == ' ')) sv.remove_suffix(1);
    while (!sv.empty() && sv.front() == ' ') sv.remove_prefix(1);
    if (sv.empty()) continue;
    int v = 0;
    const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (res.ec != std::errc{} || res.ptr != sv.data() + sv.size()) {
      throw Error(ErrorKind::kParseError, path.string() + ": line " + std::to_string(line_no) + ", column 1: bad label '" +
                                              std::string(sv) + "'");
    }
    if (v < 1) {
      throw Error(ErrorKind::kLabelOutOfRange, path.string() + ": line " + std::to_string(line_no) + ": labels are 1-based");
    }
    labels.push_back(v);
  }
  return labels;
}

inline void save_labels(const std::filesystem::path& path, const Labels& labels) {
  std::string out;
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace sadl

#endif  // SADL_DATA_IO_HPP_
