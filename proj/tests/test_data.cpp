#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <limits>
#include <cmath>
#include <fstream>
#include <set>

#include "kcca/cca.hpp"
#include "kcca/errors.hpp"
#include "support.hpp"

using namespace kcca;
using kcca::test::TempDir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("csv 2x2") {
    TempDir dir;
    write_file(dir / "m.csv", "1,2\n3,4\n");
    const DataMatrix m = read_matrix(dir / "m.csv", MatrixFormat::csv);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(0, 1) == 2.0);
    CHECK(m(1, 0) == 3.0);
    CHECK(m(1, 1) == 4.0);
  }

  TEST_CASE("binary round trip is bit exact") {
    TempDir dir;
    const DataMatrix m = test::gaussian_data(100, 5, 1);
    write_matrix(m, dir / "m.bin", MatrixFormat::binary);
    const DataMatrix back = read_matrix(dir / "m.bin", MatrixFormat::binary);
    REQUIRE(back.rows() == 100);
    REQUIRE(back.cols() == 5);
    CHECK(std::memcmp(back.values().data(), m.values().data(), 500 * sizeof(double)) == 0);
  }

  TEST_CASE("binary header layout") {
    TempDir dir;
    const RowMatrix v = (RowMatrix(1, 2) << 1.5, -2.0).finished();
    write_matrix(DataMatrix(v), dir / "m.bin", MatrixFormat::binary);
    std::ifstream in(dir / "m.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    REQUIRE(bytes.size() == 4 + 8 + 8 + 16);
    CHECK(bytes.substr(0, 4) == "KCM1");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[12]) == 2);
    double first = 0.0;
    std::memcpy(&first, bytes.data() + 20, 8);
    CHECK(first == 1.5);
  }

  TEST_CASE("csv round trip is value exact") {
    TempDir dir;
    const DataMatrix m = test::gaussian_data(100, 5, 2);
    write_matrix(m, dir / "m.csv", MatrixFormat::csv);
    CHECK(read_matrix(dir / "m.csv", MatrixFormat::csv) == m);
  }

  TEST_CASE("csv errors name the coordinates") {
    TempDir dir;
    write_file(dir / "nan.csv", "1,2\n3,nan\n");
    const std::string nan_msg = error_of([&] { read_matrix(dir / "nan.csv", MatrixFormat::csv); });
    CHECK(nan_msg.find("row 2, column 2") != std::string::npos);

    write_file(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(read_matrix(dir / "ragged.csv", MatrixFormat::csv), IoError);
    write_file(dir / "junk.csv", "1,x\n");
    CHECK(error_of([&] { read_matrix(dir / "junk.csv", MatrixFormat::csv); }).find("row 1, column 2") !=
          std::string::npos);
  }

  TEST_CASE("binary format errors") {
    TempDir dir;
    write_file(dir / "bad.bin", "XXXX0000000000000000");
    CHECK_THROWS_AS(read_matrix(dir / "bad.bin", MatrixFormat::binary), IoError);
    write_matrix(test::gaussian_data(3, 3, 0), dir / "ok.bin", MatrixFormat::binary);
    std::filesystem::resize_file(dir / "ok.bin", std::filesystem::file_size(dir / "ok.bin") - 8);
    CHECK_THROWS_AS(read_matrix(dir / "ok.bin", MatrixFormat::binary), IoError);
    CHECK_THROWS_AS(read_matrix(dir / "missing.bin", MatrixFormat::binary), IoError);
  }

  TEST_CASE("empty and non-finite matrices are unrepresentable") {
    CHECK_THROWS_AS(DataMatrix(RowMatrix(0, 3)), ShapeError);
    CHECK_THROWS_AS(DataMatrix(RowMatrix(3, 0)), ShapeError);
    RowMatrix bad = RowMatrix::Ones(2, 2);
    bad(1, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(DataMatrix{bad}, NumericError);
    CHECK_THROWS_AS(ViewPair(test::gaussian_data(3, 2, 0), test::gaussian_data(4, 2, 0)), ShapeError);
  }

  TEST_CASE("split_image_views on one 2x2 image") {
    const DataMatrix img(RowMatrix((RowMatrix(1, 4) << 1, 2, 3, 4).finished()));
    const ViewPair p = split_image_views(img, 2, 2);
    CHECK(p.x()(0, 0) == 1);
    CHECK(p.x()(0, 1) == 3);
    CHECK(p.y()(0, 0) == 2);
    CHECK(p.y()(0, 1) == 4);
  }

  TEST_CASE("split_image_views shapes and errors") {
    const ViewPair p = split_image_views(test::gaussian_data(3, 784, 3), 28, 28);
    CHECK(p.x().cols() == 392);
    CHECK(p.y().cols() == 392);
    CHECK_THROWS_AS(split_image_views(test::gaussian_data(2, 9, 0), 3, 3), ShapeError);
    CHECK_THROWS_AS(split_image_views(test::gaussian_data(2, 10, 0), 4, 4), ShapeError);
  }

  TEST_CASE("split_image_views is a column permutation") {
    const std::size_t w = 6, h = 4;
    const DataMatrix img = test::gaussian_data(5, w * h, 4);
    const ViewPair p = split_image_views(img, w, h);
    RowMatrix rebuilt(5, static_cast<Eigen::Index>(w * h));
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w / 2; ++c) {
        const auto k = static_cast<Eigen::Index>(r * (w / 2) + c);
        rebuilt.col(static_cast<Eigen::Index>(r * w + c)) = p.x().values().col(k);
        rebuilt.col(static_cast<Eigen::Index>(r * w + w / 2 + c)) = p.y().values().col(k);
      }
    }
    CHECK(DataMatrix(rebuilt) == img);
  }

  TEST_CASE("synthetic pair: noiseless correlations and determinism") {
    const SyntheticPair a = make_synthetic_pair(50, 6, 5, 3, 0.0, 9);
    CHECK(a.correlations.size() == 3);
    CHECK((a.correlations.array() == 1.0).all());
    const SyntheticPair b = make_synthetic_pair(50, 6, 5, 3, 0.0, 9);
    CHECK(a.pair.x() == b.pair.x());
    CHECK(a.pair.y() == b.pair.y());
    CHECK_THROWS_AS(make_synthetic_pair(50, 2, 5, 3, 0.1, 0), ParameterError);
    CHECK_THROWS_AS(make_synthetic_pair(50, 5, 5, 3, -0.1, 0), ParameterError);
  }

  TEST_CASE("synthetic pair matches its analytic spectrum") {
    const SyntheticPair s = make_synthetic_pair(5000, 10, 10, 3, 0.5, 11);
    for (Eigen::Index l = 0; l < 3; ++l) {
      CHECK(s.correlations(l) == doctest::Approx(1.0 / (1.0 + 0.25 * static_cast<double>(l + 1))));
    }
    const CcaSolution sol = solve_cca(estimate_covariances(s.pair, 0.0, 0.0, true), 3);
    for (Eigen::Index l = 0; l < 3; ++l) CHECK(std::abs(sol.sigma(l) - s.correlations(l)) <= 0.03);
  }

  TEST_CASE("synthetic images are deterministic and bounded") {
    const DataMatrix a = make_synthetic_images(20, 28, 28, 5);
    CHECK(a == make_synthetic_images(20, 28, 28, 5));
    CHECK(!(a == make_synthetic_images(20, 28, 28, 6)));
    CHECK(a.values().minCoeff() >= 0.0);
    CHECK(a.values().maxCoeff() <= 1.0);
  }

  TEST_CASE("sample_indices draws distinct rows") {
    const auto rows = sample_indices(60000, 5000, 3);
    CHECK(rows.size() == 5000);
    CHECK(std::set<std::size_t>(rows.begin(), rows.end()).size() == 5000);
    CHECK(*std::max_element(rows.begin(), rows.end()) < 60000);
    CHECK(rows == sample_indices(60000, 5000, 3));
    CHECK_THROWS_AS(sample_indices(10, 11, 0), ParameterError);
  }

  TEST_CASE("fingerprint separates shape and content") {
    const RowMatrix v = RowMatrix::Ones(2, 3);
    const RowMatrix t = RowMatrix::Ones(3, 2);
    CHECK(fingerprint(DataMatrix(v)) != fingerprint(DataMatrix(t)));
    RowMatrix w = v;
    w(1, 2) = std::nextafter(1.0, 2.0);
    CHECK(fingerprint(DataMatrix(v)) != fingerprint(DataMatrix(w)));
    CHECK(fingerprint(DataMatrix(v)) == fingerprint(DataMatrix(RowMatrix(v))));
  }
}
