#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "ami/rng.hpp"
#include "ami/serial.hpp"
#include "ami/tensor.hpp"

using namespace ami;

TEST_CASE("tensor shape and data length must agree") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
  CHECK_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 0.0)));
  CHECK(Tensor({2, 3}).size() == 6);
  CHECK(Tensor(std::vector<std::size_t>{}).size() == 0);
}

TEST_CASE("tensor at() follows row-major layout") {
  Tensor t({2, 3});
  std::iota(t.data.begin(), t.data.end(), 0.0);
  CHECK(t.at(1, 2) == 5.0);

  Tensor r3({2, 3, 4});
  std::iota(r3.data.begin(), r3.data.end(), 0.0);
  CHECK(r3.at(1, 2, 3) == double((1 * 3 + 2) * 4 + 3));

  Tensor r4({2, 2, 3, 4});
  std::iota(r4.data.begin(), r4.data.end(), 0.0);
  CHECK(r4.at(1, 1, 2, 3) == double(((1 * 2 + 1) * 3 + 2) * 4 + 3));
}

TEST_CASE("tensor all_finite flags nan and inf") {
  Tensor t({3});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  t[1] = 1.0 / 0.0;
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(42), b(42), c(43);
  bool same = true, differ = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    same = same && va == b.next_u64();
    differ = differ || va != c.next_u64();
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("rng uniform stays in [0,1) and below() respects its bound") {
  Rng r(7);
  for (int i = 0; i < 4096; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(17) < 17);
  }
  CHECK(r.uniform(3.0, 5.0) >= 3.0);
}

TEST_CASE("rng shuffle is a deterministic permutation") {
  std::vector<int> v(25);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> w = v;
  Rng a(11), b(11);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::sort(w.begin(), w.end());
  std::vector<int> id(25);
  std::iota(id.begin(), id.end(), 0);
  CHECK(w == id);
}

TEST_CASE("rng mix derives distinct independent streams") {
  const auto s0 = Rng::mix(99, 0);
  const auto s1 = Rng::mix(99, 1);
  CHECK(s0 != s1);
  CHECK(s0 == Rng::mix(99, 0));
  CHECK(Rng(s0).next_u64() != Rng(s1).next_u64());
}

TEST_CASE("rng state round trip resumes the stream") {
  Rng r(3);
  r.next_u64();
  const auto snap = r.state();
  const auto expected = r.next_u64();
  Rng resumed = Rng::from_state(snap);
  CHECK(resumed.next_u64() == expected);
}

TEST_CASE("byte codec is little-endian") {
  Bytes out;
  put_u32(out, 0x01020304u);
  CHECK(out == Bytes{0x04, 0x03, 0x02, 0x01});

  out.clear();
  put_f64(out, 1.0);
  CHECK(out == Bytes{0, 0, 0, 0, 0, 0, 0xf0, 0x3f});

  out.clear();
  put_u64(out, 0x0102030405060708ull);
  ByteReader rd(out, "buf");
  CHECK(rd.u64() == 0x0102030405060708ull);
  CHECK(rd.done());
}

TEST_CASE("byte reader reports truncation with offset context") {
  Bytes buf{1, 2, 3};
  ByteReader rd(buf, "short.bin");
  try {
    rd.u64();
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("short.bin") != std::string::npos);
    CHECK(msg.find("truncated") != std::string::npos);
  }
}

TEST_CASE("fnv1a64 matches the reference vectors") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64({'a'}) == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0x1ull) == "0000000000000001");
  CHECK(digest_hex({'a'}) == "af63dc4c8601ec8c");
}

TEST_CASE("file io round trips and missing files raise IoError") {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / "ami_core_io_test.bin";
  const Bytes payload{0, 1, 2, 254, 255};
  write_file(p, payload);
  CHECK(read_file(p) == payload);
  fs::remove(p);
  CHECK_THROWS_AS(read_file(p), IoError);
}
