#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "nli/envelope.hpp"
#include "nli/error.hpp"
#include "nli/kernelops.hpp"
#include "nli/strkern.hpp"
#include "test_util.hpp"

using namespace nli;
using nli::testing::TempDir;
using nli::testing::vec;

namespace {

std::vector<std::string> ids(std::size_t n, const std::string& prefix = "s") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

KernelSpec presence_spec() {
  KernelSpec s;
  s.kind = KernelKind::presence;
  s.p = PRange{2, 3};
  return s;
}

GramMatrix square(const Eigen::MatrixXd& m, KernelSpec spec = presence_spec()) {
  return GramMatrix(m, ids(m.rows()), ids(m.cols()), {spec}, true);
}

GramMatrix random_normalized(std::mt19937_64& rng, std::size_t n) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back(nli::testing::doc("d" + std::to_string(i), nli::testing::random_string(rng, 4, 60, 8)));
  }
  return blended_gram(docs, docs, StringKernelKind::presence, 1, 3);
}

}  // namespace

TEST_CASE("rbf_transform evaluates the formula") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.0, 0.0, 1.0;
  const auto g = rbf_transform(square(m), 1.0);
  CHECK(g(0, 0) == 1.0);
  CHECK(g(0, 1) == doctest::Approx(0.6065306597126334).epsilon(1e-15));
  CHECK(g.components().front().sigma == 1.0);

  Eigen::MatrixXd half(1, 1);
  half << 0.5;
  const GramMatrix h(half, {"a"}, {"b"}, {presence_spec()}, false);
  CHECK(rbf_transform(h, 0.5)(0, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
}

TEST_CASE("rbf_transform rejects entries outside [0, 1]") {
  Eigen::MatrixXd bad(1, 1);
  bad << 1.5;
  const GramMatrix g(bad, {"a"}, {"b"}, {presence_spec()}, false);
  CHECK_THROWS_AS(rbf_transform(g, 1.0), ContractError);
  Eigen::MatrixXd edge(1, 1);
  edge << 1.0 + 1e-10;
  CHECK(rbf_transform(GramMatrix(edge, {"a"}, {"b"}, {presence_spec()}, false), 1.0)(0, 0) == 1.0);
}

TEST_CASE("rbf_transform is strictly increasing in k") {
  Eigen::MatrixXd row(1, 101);
  for (int i = 0; i <= 100; ++i) row(0, i) = i / 100.0;
  const GramMatrix g(row, {"r"}, ids(101), {presence_spec()}, false);
  for (double sigma : {0.1, 0.5, 1.0, 3.0}) {
    const auto t = rbf_transform(g, sigma);
    for (int i = 0; i < 100; ++i) CHECK(t(0, i) < t(0, i + 1));
  }
}

TEST_CASE("ivector_gram worked examples") {
  const std::vector<FeatureVector> x{vec("x", {1, 0})}, y{vec("y", {0, 1})}, z{vec("z", {2, 0})};
  CHECK(ivector_gram(x, x, 1.0)(0, 0) == 1.0);
  CHECK(ivector_gram(x, y, 1.0)(0, 0) == doctest::Approx(0.4930686913952398).epsilon(1e-15));
  CHECK(ivector_gram(z, x, 1.0)(0, 0) == 1.0);
  const auto g = ivector_gram(x, y, 1.0);
  CHECK(g.components().front().kind == KernelKind::ivector_rbf);
  CHECK(g.components().front().modality == Modality::audio);
}

TEST_CASE("ivector_gram errors") {
  const std::vector<FeatureVector> zero{vec("zero", {0, 0})}, two{vec("a", {1, 2})}, three{vec("b", {1, 2, 3})};
  try {
    ivector_gram(zero, two, 1.0);
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zero") != std::string::npos);
  }
  CHECK_THROWS_AS(ivector_gram(two, three, 1.0), DimensionMismatchError);
}

TEST_CASE("ivector_gram is invariant to positive rescaling") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<FeatureVector> a, b;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> v(5);
    for (auto& x : v) x = n01(rng);
    a.push_back(vec("v" + std::to_string(i), v));
    const double c = 0.1 + 10.0 * (rng() % 1000) / 1000.0;
    for (auto& x : v) x *= c;
    b.push_back(vec("v" + std::to_string(i), v));
  }
  const auto ga = ivector_gram(a, a, 0.5);
  const auto gb = ivector_gram(b, b, 0.5);
  CHECK(ga.is_square_symmetric());
  CHECK((ga.values() - gb.values()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ga.has_unit_diagonal());
}

TEST_CASE("squared_kernel worked examples") {
  const auto id2 = squared_kernel(square(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(id2.train.values() == Eigen::MatrixXd::Identity(2, 2));

  Eigen::MatrixXd k(2, 2);
  k << 1, 0.5, 0.5, 1;
  KernelSpec spec = presence_spec();
  spec.sigma = 1.0;
  const auto train = square(k, spec);
  Eigen::MatrixXd e(1, 2);
  e << 0.5, 0.5;
  const GramMatrix eval(e, {"e0"}, train.row_ids(), {spec}, false);
  const auto sq = squared_kernel(train, &eval);
  Eigen::MatrixXd expected(2, 2);
  expected << 1.25, 1.0, 1.0, 1.25;
  CHECK(sq.train.values() == expected);
  REQUIRE(sq.eval);
  CHECK((*sq.eval)(0, 0) == 0.75);
  CHECK((*sq.eval)(0, 1) == 0.75);
  CHECK(sq.train.components().front().squared);
  CHECK(sq.eval->row_ids() == std::vector<std::string>{"e0"});
}

TEST_CASE("squared_kernel rejects misaligned eval blocks") {
  const auto train = square(Eigen::MatrixXd::Identity(2, 2));
  const GramMatrix eval(Eigen::MatrixXd::Ones(1, 2), {"e0"}, {"s1", "s0"}, {presence_spec()}, false);
  CHECK_THROWS_AS(squared_kernel(train, &eval), AlignmentError);
  const GramMatrix rect(Eigen::MatrixXd::Ones(1, 2), {"e0"}, {"s0", "s1"}, {presence_spec()}, false);
  CHECK_THROWS_AS(squared_kernel(rect), ContractError);
}

TEST_CASE("sum_kernels") {
  std::mt19937_64 rng(11);
  const auto k = random_normalized(rng, 8);
  const std::vector<GramMatrix> twice{k, k};
  CHECK(sum_kernels(twice).values() == 2.0 * k.values());
  CHECK(sum_kernels(twice).components().size() == 2);

  const GramMatrix zero(Eigen::MatrixXd::Zero(8, 8), k.row_ids(), k.col_ids(), {presence_spec()}, true);
  const std::vector<GramMatrix> with_zero{k, zero};
  CHECK(sum_kernels(with_zero).values() == k.values());

  const std::vector<GramMatrix> three{k, k, k};
  const auto s3 = sum_kernels(three);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(s3(i, i) == 3.0);

  const GramMatrix other(k.values(), ids(8, "t"), ids(8, "t"), {presence_spec()}, true);
  const std::vector<GramMatrix> bad{k, other};
  CHECK_THROWS_AS(sum_kernels(bad), AlignmentError);
  const GramMatrix small(Eigen::MatrixXd::Identity(2, 2), ids(2), ids(2), {presence_spec()}, true);
  const std::vector<GramMatrix> bad_shape{k, small};
  CHECK_THROWS_AS(sum_kernels(bad_shape), AlignmentError);
}

TEST_CASE("psd_check worked examples") {
  CHECK(psd_check(Eigen::MatrixXd::Identity(3, 3)).min_eigenvalue == doctest::Approx(1.0));
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  const auto r1 = psd_check(ones, 1e-9);
  CHECK(std::abs(r1.min_eigenvalue) < 1e-12);
  CHECK(r1.passed);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  const auto r2 = psd_check(indefinite, 1e-9);
  CHECK(r2.min_eigenvalue == doctest::Approx(-1.0));
  CHECK_FALSE(r2.passed);
  CHECK_THROWS_AS(psd_check(Eigen::MatrixXd::Ones(2, 3)), ContractError);
}

TEST_CASE("kernel constructions stay PSD on random inputs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto k = random_normalized(rng, 20);
    const auto rbf = rbf_transform(k, 0.7);
    const auto sq = squared_kernel(rbf).train;
    CHECK(psd_check(k, 1e-9).passed);
    CHECK(psd_check(rbf, 1e-9).passed);
    CHECK(psd_check(sq, 1e-9).passed);
    const std::vector<GramMatrix> parts{k, rbf, sq};
    CHECK(psd_check(sum_kernels(parts), 1e-9).passed);
  }
}

TEST_CASE("gram cache round trip and corruption detection") {
  TempDir dir;
  std::mt19937_64 rng(4);
  const auto k = rbf_transform(random_normalized(rng, 6), 0.9);
  const auto path = dir / "k.gram";
  save_gram(k, path);
  CHECK(load_gram(path) == k);

  // Truncate the file.
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  CHECK_THROWS_AS(load_gram(path), ChecksumError);

  // Flip one payload byte.
  save_gram(k, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size - 3));
    f.put('\x7f');
  }
  CHECK_THROWS_AS(load_gram(path), ChecksumError);

  // Future version.
  write_envelope(path, kGramMagic, 99, "whatever");
  CHECK_THROWS_AS(load_gram(path), VersionError);

  // Wrong kind of file.
  write_envelope(path, kModelMagic, 1, "x");
  CHECK_THROWS_AS(load_gram(path), DataError);
}

TEST_CASE("gram file header layout") {
  TempDir dir;
  Eigen::MatrixXd m(1, 2);
  m << 0.25, 1.0;
  save_gram(GramMatrix(m, {"a"}, {"b", "c"}, {presence_spec()}, false), dir / "g.gram");
  std::ifstream in(dir / "g.gram", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 32);
  CHECK(bytes.substr(0, 8) == std::string("NLIGRAM\0", 8));
  CHECK(bytes[8] == 1);  // version, little-endian
  // The last 8 bytes are the final value, 1.0, as a little-endian IEEE double.
  CHECK(bytes.substr(bytes.size() - 8) == std::string("\0\0\0\0\0\0\xF0\x3F", 8));
}
