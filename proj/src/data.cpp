#include "kcca/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "kcca/errors.hpp"

namespace kcca {

namespace {

constexpr char kMagic[4] = {'K', 'C', 'M', '1'};

void validate_values(const RowMatrix& values) {
  if (values.rows() < 1 || values.cols() < 1) {
    throw ShapeError("matrix must have at least one row and one column, got " +
                     std::to_string(values.rows()) + "x" + std::to_string(values.cols()));
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (!std::isfinite(values(i, j))) {
        throw NumericError("non-finite value at row " + std::to_string(i + 1) + ", column " +
                           std::to_string(j + 1));
      }
    }
  }
}

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in, const std::filesystem::path& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw IoError(path.string() + ": truncated header");
  }
  return to_little_endian(v);
}

RowMatrix read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path.string() + ": malformed header (expected magic KCM1)");
  }
  const std::uint64_t rows = get_u64(in, path);
  const std::uint64_t cols = get_u64(in, path);
  if (rows == 0 || cols == 0) {
    throw IoError(path.string() + ": malformed header (empty shape " + std::to_string(rows) +
                  "x" + std::to_string(cols) + ")");
  }
  // Reject absurd shapes before allocating.
  const auto start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload = static_cast<std::uint64_t>(in.tellg() - start);
  in.seekg(start);
  if (cols > payload / 8 || rows > payload / 8 / cols || rows * cols * 8 != payload) {
    throw IoError(path.string() + ": payload size does not match header shape " +
                  std::to_string(rows) + "x" + std::to_string(cols));
  }
  RowMatrix values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(payload));
  if (!in) throw IoError(path.string() + ": truncated payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (Eigen::Index k = 0; k < values.size(); ++k) values.data()[k] = to_little_endian(values.data()[k]);
  }
  return values;
}

void write_binary(const RowMatrix& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(kMagic, 4);
  put_u64(out, static_cast<std::uint64_t>(values.rows()));
  put_u64(out, static_cast<std::uint64_t>(values.cols()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      const double v = to_little_endian(values.data()[k]);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

RowMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    ++rows;
    std::size_t col = 0;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view field = trim(rest.substr(0, comma));
      ++col;
      double v = 0.0;
      // from_chars does not accept a leading '+'.
      std::string_view digits = field;
      if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      const std::string where = " at row " + std::to_string(rows) + ", column " + std::to_string(col);
      if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
        throw IoError(path.string() + ": cannot parse '" + std::string(field) + "'" + where);
      }
      if (!std::isfinite(v)) {
        throw IoError(path.string() + ": non-finite value" + where);
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (rows == 1) {
      cols = col;
    } else if (col != cols) {
      throw IoError(path.string() + ": ragged row " + std::to_string(rows) + " has " +
                    std::to_string(col) + " columns, expected " + std::to_string(cols));
    }
  }
  if (rows == 0) throw IoError(path.string() + ": empty matrix");
  return Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(cols));
}

void write_csv(const RowMatrix& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  char buf[32];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out.put(',');
      const auto res = std::to_chars(buf, buf + sizeof buf, values(i, j),
                                     std::chars_format::general, 17);
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace

DataMatrix::DataMatrix(RowMatrix values) : values_(std::move(values)) { validate_values(values_); }

DataMatrix::DataMatrix(std::size_t rows, std::size_t cols, std::span<const double> row_major) {
  if (row_major.size() != rows * cols) {
    throw ShapeError("expected " + std::to_string(rows * cols) + " values for a " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " matrix, got " +
                     std::to_string(row_major.size()));
  }
  values_ = Eigen::Map<const RowMatrix>(row_major.data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(cols));
  validate_values(values_);
}

DataMatrix DataMatrix::from(const Eigen::Ref<const Matrix>& values) { return DataMatrix(RowMatrix(values)); }

bool DataMatrix::operator==(const DataMatrix& other) const {
  return values_.rows() == other.values_.rows() && values_.cols() == other.values_.cols() &&
         values_ == other.values_;
}

ViewPair::ViewPair(DataMatrix x, DataMatrix y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.rows()) {
    throw ShapeError("views must have the same number of rows: " + std::to_string(x_.rows()) +
                     " vs " + std::to_string(y_.rows()));
  }
}

MatrixFormat parse_format(const std::string& name) {
  if (name == "csv") return MatrixFormat::csv;
  if (name == "binary" || name == "bin") return MatrixFormat::binary;
  throw ParameterError("unknown matrix format '" + name + "' (expected csv or binary)");
}

DataMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  RowMatrix values = format == MatrixFormat::binary ? read_binary(path) : read_csv(path);
  try {
    return DataMatrix(std::move(values));
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_matrix(const DataMatrix& m, const std::filesystem::path& path, MatrixFormat format) {
  if (format == MatrixFormat::binary) {
    write_binary(m.values(), path);
  } else {
    write_csv(m.values(), path);
  }
}

void write_matrix(const Eigen::Ref<const Matrix>& m, const std::filesystem::path& path,
                  MatrixFormat format) {
  write_matrix(DataMatrix::from(m), path, format);
}

Matrix read_dense(const std::filesystem::path& path, MatrixFormat format) {
  return read_matrix(path, format).values();
}

ViewPair split_image_views(const DataMatrix& images, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0 || width % 2 != 0) {
    throw ShapeError("image width must be even and positive, got " + std::to_string(width));
  }
  if (images.cols() != width * height) {
    throw ShapeError("image rows have " + std::to_string(images.cols()) + " pixels, expected " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  const std::size_t half = width / 2;
  RowMatrix left(images.rows(), static_cast<Eigen::Index>(half * height));
  RowMatrix right(images.rows(), static_cast<Eigen::Index>(half * height));
  const auto& v = images.values();
  for (std::size_t r = 0; r < height; ++r) {
    const auto src = static_cast<Eigen::Index>(r * width);
    const auto dst = static_cast<Eigen::Index>(r * half);
    const auto h = static_cast<Eigen::Index>(half);
    left.middleCols(dst, h) = v.middleCols(src, h);
    right.middleCols(dst, h) = v.middleCols(src + h, h);
  }
  return ViewPair(DataMatrix(std::move(left)), DataMatrix(std::move(right)));
}

SyntheticPair make_synthetic_pair(std::size_t n, std::size_t dx, std::size_t dy,
                                  std::size_t latent, double noise, std::uint64_t seed) {
  if (n < 1 || latent < 1) throw ParameterError("synthetic pair needs n >= 1 and latent >= 1");
  if (latent > std::min(dx, dy)) {
    throw ParameterError("latent dimension " + std::to_string(latent) +
                         " exceeds min(dx, dy) = " + std::to_string(std::min(dx, dy)));
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ParameterError("noise must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto L = static_cast<Eigen::Index>(latent);

  auto orthonormal = [&](std::size_t d) {
    Matrix g(static_cast<Eigen::Index>(d), L);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return Matrix(qr.householderQ() * Matrix::Identity(g.rows(), L));
  };
  Vector scale(L);
  for (Eigen::Index l = 0; l < L; ++l) scale(l) = 1.0 / std::sqrt(static_cast<double>(l + 1));
  const Matrix mix_x = orthonormal(dx) * scale.asDiagonal();
  const Matrix mix_y = orthonormal(dy) * scale.asDiagonal();

  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dx));
  RowMatrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dy));
  Vector z(L);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index l = 0; l < L; ++l) z(l) = normal(rng);
    x.row(i) = (mix_x * z).transpose();
    y.row(i) = (mix_y * z).transpose();
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += noise * normal(rng);
    for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) += noise * normal(rng);
  }

  Vector corr(L);
  for (Eigen::Index l = 0; l < L; ++l) corr(l) = 1.0 / (1.0 + noise * noise * static_cast<double>(l + 1));
  return {ViewPair(DataMatrix(std::move(x)), DataMatrix(std::move(y))), corr};
}

namespace {

// Polyline strokes of one glyph class in normalized [-1, 1]^2 coordinates.
using Stroke = std::vector<std::array<double, 2>>;

std::vector<Stroke> glyph_strokes(std::size_t cls) {
  // Class shapes are fixed, independent of the data seed.
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL + cls);
  std::uniform_real_distribution<double> coord(-0.75, 0.75);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Stroke> strokes;
  const int count = 2 + static_cast<int>(unit(rng) * 2.0);
  for (int s = 0; s < count; ++s) {
    Stroke stroke;
    if (unit(rng) < 0.5) {
      // Elliptic arc.
      const double cx = 0.4 * coord(rng), cy = 0.4 * coord(rng);
      const double rx = 0.25 + 0.45 * unit(rng), ry = 0.25 + 0.45 * unit(rng);
      const double a0 = 2.0 * std::numbers::pi * unit(rng);
      const double span = std::numbers::pi * (0.6 + 1.4 * unit(rng));
      for (int k = 0; k <= 16; ++k) {
        const double a = a0 + span * k / 16.0;
        stroke.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
      }
    } else {
      // Two-segment polyline.
      for (int k = 0; k < 3; ++k) stroke.push_back({coord(rng), coord(rng)});
    }
    strokes.push_back(std::move(stroke));
  }
  return strokes;
}

double segment_distance(double px, double py, const std::array<double, 2>& a,
                        const std::array<double, 2>& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - a[0] - t * dx, py - a[1] - t * dy);
}

}  // namespace

DataMatrix make_synthetic_images(std::size_t n, std::size_t width, std::size_t height,
                                 std::uint64_t seed) {
  if (n < 1 || width < 4 || height < 4) throw ParameterError("synthetic images need n >= 1 and sides >= 4");
  constexpr std::size_t kClasses = 10;
  std::vector<std::vector<Stroke>> classes;
  for (std::size_t c = 0; c < kClasses; ++c) classes.push_back(glyph_strokes(c));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> pixel_noise(0.0, 0.05);
  const double half_w = 0.5 * static_cast<double>(width);
  const double half_h = 0.5 * static_cast<double>(height);
  const double radius = 0.4 * static_cast<double>(std::min(width, height));

  RowMatrix images(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width * height));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& strokes = classes[std::min(kClasses - 1, static_cast<std::size_t>(unit(rng) * kClasses))];
    const double angle = 0.5 * (unit(rng) - 0.5);
    const double scale = radius * (0.8 + 0.3 * unit(rng));
    const double shift_x = 3.0 * (unit(rng) - 0.5);
    const double shift_y = 3.0 * (unit(rng) - 0.5);
    const double thickness = 0.8 + 0.7 * unit(rng);
    const double inv = 1.0 / (2.0 * thickness * thickness);
    const double ca = std::cos(angle), sa = std::sin(angle);

    // Map strokes into pixel coordinates once per image.
    std::vector<Stroke> placed;
    for (const auto& stroke : strokes) {
      Stroke p;
      for (const auto& pt : stroke) {
        p.push_back({half_w + shift_x + scale * (ca * pt[0] - sa * pt[1]),
                     half_h + shift_y + scale * (sa * pt[0] + ca * pt[1])});
      }
      placed.push_back(std::move(p));
    }
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double px = static_cast<double>(c) + 0.5;
        const double py = static_cast<double>(r) + 0.5;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& stroke : placed)
          for (std::size_t k = 0; k + 1 < stroke.size(); ++k)
            best = std::min(best, segment_distance(px, py, stroke[k], stroke[k + 1]));
        const double value = std::exp(-best * best * inv) + pixel_noise(rng);
        images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r * width + c)) =
            std::clamp(value, 0.0, 1.0);
      }
    }
  }
  return DataMatrix(std::move(images));
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) {
    throw ParameterError("cannot sample " + std::to_string(count) + " distinct rows out of " +
                         std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

DataMatrix select_rows(const DataMatrix& m, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= m.rows()) throw ShapeError("row index " + std::to_string(rows[k]) + " out of range");
    out.row(static_cast<Eigen::Index>(k)) = m.values().row(static_cast<Eigen::Index>(rows[k]));
  }
  return DataMatrix(std::move(out));
}

ViewPair select_rows(const ViewPair& pair, std::span<const std::size_t> rows) {
  return ViewPair(select_rows(pair.x(), rows), select_rows(pair.y(), rows));
}

std::uint64_t fingerprint_bytes(std::span<const unsigned char> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fingerprint(const DataMatrix& m) {
  const std::uint64_t shape[2] = {to_little_endian<std::uint64_t>(m.rows()),
                                  to_little_endian<std::uint64_t>(m.cols())};
  const std::uint64_t h =
      fingerprint_bytes({reinterpret_cast<const unsigned char*>(shape), sizeof shape});
  const auto* data = reinterpret_cast<const unsigned char*>(m.values().data());
  return fingerprint_bytes({data, m.rows() * m.cols() * sizeof(double)}, h);
}

}  // namespace kcca
