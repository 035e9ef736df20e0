/* Copyright 2026 The LVW Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/errors.hpp"
#include "core/sha256.hpp"
#include "core/tensor.hpp"
#include "test_util.hpp"

using namespace lvw;

TEST_CASE("tensor shape and indexing") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  t.at3(1, 2, 3) = 7.5;
  CHECK(t[23] == 7.5);
  CHECK(t.shape_str() == "[2x3x4]");
  CHECK(t.min() == 0.0);
  CHECK(t.max() == 7.5);
}

TEST_CASE("tensor finite check") {
  Tensor t({2, 2});
  CHECK(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("tensor blob round trip is exact") {
  Rng rng(11);
  Tensor t = test::random_tensor({3, 5, 7}, rng, -100, 100);
  std::string dir = test::temp_dir("blob");
  std::string path = dir + "/t.bin";
  write_tensor_file(path, t);
  Tensor back = read_tensor_file(path);
  REQUIRE(back.same_shape(t));
  for (int64_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);

  // a second write of the loaded tensor is byte-identical
  std::string path2 = dir + "/t2.bin";
  write_tensor_file(path2, back);
  CHECK(test::files_identical(path, path2));
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // streaming matches one-shot
  Sha256 h;
  h.update("hello ");
  h.update("world");
  CHECK(h.hex_digest() == sha256_hex("hello world"));
}

TEST_CASE("rng determinism and serialization") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  std::string state = a.serialize();
  Rng c = Rng::deserialize(state);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == c.uniform());
}

TEST_CASE("rng uniform_int bounds") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    int64_t v = rng.uniform_int(7);
    CHECK(v >= 0);
    CHECK(v < 7);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), ArgumentError);
}
