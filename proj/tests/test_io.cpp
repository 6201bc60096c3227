#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <limits>

#include "hcembed/io.hpp"
#include "hcembed/rng.hpp"
#include "oracles.hpp"

using namespace hcembed;

namespace {

Embedding random_embedding(std::size_t n, std::size_t d, bool labels, SeedableRng& rng) {
  Embedding e{n, d, {}, std::nullopt};
  for (std::size_t i = 0; i < n * d; ++i) e.values.push_back(static_cast<float>(rng.normal() * 100.0));
  if (labels) {
    e.labels = std::vector<int>();
    for (std::size_t i = 0; i < n; ++i) e.labels->push_back(static_cast<int>(rng.below(10)) - 3);
  }
  return e;
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "hcembed_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("EMB1 layout") {
  const Embedding e{1, 2, {1.0f, -2.0f}, std::vector<int>{-1}};
  const auto bytes = encode_embedding(e);
  REQUIRE(bytes.size() == 4 + 12 + 8 + 1 + 4);
  CHECK(std::memcmp(bytes.data(), "EMB1", 4) == 0);
  CHECK(bytes[4] == 1);  // version, little-endian
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 1);   // n
  CHECK(bytes[12] == 2);  // d
  std::uint32_t first = 0;
  for (int b = 0; b < 4; ++b) first |= static_cast<std::uint32_t>(bytes[16 + b]) << (8 * b);
  CHECK(first == std::bit_cast<std::uint32_t>(1.0f));
  CHECK(bytes[24] == 1);  // label flag
  CHECK(bytes[25] == 0xff);
  CHECK(bytes[28] == 0xff);
}

TEST_CASE("EMB1 round trip is bitwise") {
  SeedableRng rng(1);
  for (bool labels : {false, true}) {
    const Embedding e = random_embedding(37, 5, labels, rng);
    const auto bytes = encode_embedding(e);
    const Embedding back = decode_embedding(bytes);
    CHECK(back == e);
    CHECK(encode_embedding(back) == bytes);
  }
  const auto path = temp_dir() / "rt.emb";
  const Embedding e = random_embedding(10, 3, true, rng);
  write_embedding(path, e);
  CHECK(read_embedding(path) == e);
}

TEST_CASE("EMB1 matrix conversion") {
  Matrix m(2, 2, {0.5, 1.25, -3.0, 8.0});
  const Embedding e = Embedding::from_matrix(m);
  CHECK(e.to_matrix() == m);
}

TEST_CASE("EMB1 errors") {
  SeedableRng rng(2);
  const Embedding e = random_embedding(4, 3, true, rng);
  const auto good = encode_embedding(e);

  SUBCASE("bad magic") {
    auto b = good;
    b[0] = 'X';
    CHECK_THROWS_AS(decode_embedding(b), IoError);
  }
  SUBCASE("bad version") {
    auto b = good;
    b[4] = 2;
    try {
      decode_embedding(b);
      FAIL("no error");
    } catch (const IoError& err) {
      CHECK(err.offset() == 4u);
    }
  }
  SUBCASE("truncation names the missing bytes") {
    auto b = good;
    b.resize(b.size() - 10);
    try {
      decode_embedding(b);
      FAIL("no error");
    } catch (const IoError& err) {
      const std::string msg = err.what();
      CHECK(msg.find("10 byte(s) missing") != std::string::npos);
    }
    const std::vector<std::uint8_t> tiny{'E', 'M'};
    CHECK_THROWS_WITH_AS(decode_embedding(tiny), doctest::Contains("2 byte(s) missing"), IoError);
  }
  SUBCASE("truncated coordinates") {
    auto b = good;
    b.resize(16 + 4 * 5);
    CHECK_THROWS_WITH_AS(decode_embedding(b), doctest::Contains("28 byte(s) missing"), IoError);
  }
  SUBCASE("NaN payload reports its offset") {
    auto b = good;
    const auto nan = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    for (int k = 0; k < 4; ++k) b[16 + 4 * 5 + k] = static_cast<std::uint8_t>(nan >> (8 * k));
    try {
      decode_embedding(b);
      FAIL("no error");
    } catch (const IoError& err) {
      CHECK(err.offset() == 36u);
    }
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.push_back(0);
    CHECK_THROWS_AS(decode_embedding(b), IoError);
  }
  SUBCASE("bad label flag") {
    auto b = good;
    b[16 + 4 * 12] = 7;
    CHECK_THROWS_AS(decode_embedding(b), IoError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_embedding(temp_dir() / "does_not_exist.emb"), IoError);
  }
}

TEST_CASE("labels CSV") {
  LabelTable t;
  t.flat = {3, 3, 1};
  CHECK(format_labels(t) == "index,label\n0,3\n1,3\n2,1\n");
  t.levels = LevelLabels{3, 2, {0, 0, 0, 0, 1, 2}};
  const std::string text = format_labels(t);
  CHECK(text == "index,label,l1,l2\n0,3,0,0\n1,3,0,0\n2,1,1,2\n");
  const LabelTable back = parse_labels(text);
  CHECK(back.flat == t.flat);
  REQUIRE(back.levels);
  CHECK(*back.levels == *t.levels);

  CHECK_THROWS_AS(parse_labels(""), IoError);
  CHECK_THROWS_AS(parse_labels("idx,label\n0,1\n"), IoError);
  CHECK_THROWS_AS(parse_labels("index,label\n0,1\n2,1\n"), IoError);
  CHECK_THROWS_AS(parse_labels("index,label\n0,x\n"), IoError);
  CHECK_THROWS_AS(parse_labels("index,label,l1\n0,1\n"), IoError);
  CHECK_THROWS_AS(parse_labels("index,label,l1,l2\n0,0,0,1\n1,0,1,1\n"), IoError);  // not nested
  CHECK(parse_labels("index,label\r\n0,4\r\n").flat == std::vector<int>{4});
}

TEST_CASE("GMM JSON") {
  GmmParams g;
  g.weights = {0.1, 0.2, 0.7};
  g.means = Matrix(3, 2, {0.1, 1.0 / 3.0, -2.5, 1e-300, 4.0, 5.0});
  g.variances = Matrix(3, 1, {1.0, 0.3, 2.0 / 7.0});
  const std::string text = format_gmm(g);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
  const GmmParams back = parse_gmm(text);
  CHECK(back.weights == g.weights);
  CHECK(back.means == g.means);
  CHECK(back.variances == g.variances);
  CHECK(format_gmm(back) == text);

  const auto path = temp_dir() / "g.json";
  write_gmm(path, g);
  CHECK(read_gmm(path).means == g.means);

  GmmParams bad = g;
  bad.weights = {0.1, 0.2, 0.6};
  CHECK_THROWS_AS(parse_gmm(format_gmm(bad)), IoError);
  bad.weights = {0.1, 0.2, 0.7 + 5e-7};
  CHECK_NOTHROW(parse_gmm(format_gmm(bad)));
  CHECK_THROWS_AS(parse_gmm("{\"k\": 1}"), IoError);
  CHECK_THROWS_AS(parse_gmm("not json"), IoError);
  CHECK_THROWS_AS(
      parse_gmm(R"({"k":2,"dim":1,"weights":[0.5,0.5],"means":[[0],[1,2]],"variances":[[1],[1]]})"), IoError);
}

TEST_CASE("dendrogram CSV round trip") {
  SeedableRng rng(3);
  const Dendrogram t = oracle::random_tree(25, rng);
  std::vector<Merge> m = t.merges();
  for (auto& x : m) x.height = x.height / 3.0;
  const Dendrogram u(25, m);
  CHECK(parse_dendrogram(format_dendrogram(u)) == u);
  CHECK_THROWS_AS(parse_dendrogram("left,right\n"), IoError);
  CHECK_THROWS_AS(parse_dendrogram("left,right,height,size\n0,0,1,2\n"), IoError);
  CHECK(format_double(0.1) == "0.10000000000000001");
}
