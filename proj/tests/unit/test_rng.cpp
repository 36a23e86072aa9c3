#include <doctest.h>

#include "cads/rng.hpp"

using namespace cads;

TEST_SUITE("rng") {

TEST_CASE("derived streams are reproducible") {
  RngStream a = RngStream::derive(42, 7, StreamPurpose::kAncestral);
  RngStream b = RngStream::derive(42, 7, StreamPurpose::kAncestral);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams differ across chain and purpose") {
  RngStream base = RngStream::derive(42, 7, StreamPurpose::kAncestral);
  RngStream other_chain = RngStream::derive(42, 8, StreamPurpose::kAncestral);
  RngStream other_purpose = RngStream::derive(42, 7, StreamPurpose::kConditionNoise);
  CHECK(base.next_u64() != other_chain.next_u64());
  RngStream base2 = RngStream::derive(42, 7, StreamPurpose::kAncestral);
  CHECK(base2.next_u64() != other_purpose.next_u64());
}

TEST_CASE("uniform01 range and normal moments") {
  RngStream rng(123);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("copying a stream replays the sequence") {
  RngStream rng(99);
  (void)rng.normal();
  RngStream copy = rng;
  CHECK(rng.normal() == copy.normal());
  CHECK(rng.uniform01() == copy.uniform01());
}

}  // TEST_SUITE
