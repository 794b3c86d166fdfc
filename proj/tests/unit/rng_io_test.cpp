/*
 * Copyright 2026 The PAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "pan/errors.hpp"
#include "pan/io.hpp"
#include "pan/rng.hpp"

namespace pan {
namespace {

TEST(Rng, DerivedSeedsAreStableAndLabelSpecific) {
  EXPECT_EQ(deriveSeed(42, "csm.init"), deriveSeed(42, "csm.init"));
  EXPECT_NE(deriveSeed(42, "csm.init"), deriveSeed(42, "encoder.init"));
  EXPECT_NE(deriveSeed(42, "csm.init"), deriveSeed(43, "csm.init"));
  Engine a = makeEngine(5, "x");
  Engine b = makeEngine(5, "x");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, UniformIndexCoversRange) {
  Engine e = makeEngine(1, "t");
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[uniformIndex(e, 7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 3.0 * std::sqrt(70000 * (1.0 / 7) * (6.0 / 7)));
  EXPECT_THROW(uniformIndex(e, 0), ContractError);
}

TEST(Rng, UnitAndNormalMoments) {
  Engine e = makeEngine(2, "t");
  const int n = 100000;
  double su = 0.0;
  double sn = 0.0;
  double sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = uniformUnit(e);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = standardNormal(e);
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sn / n, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(Io, FormatRealRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-5}) {
    EXPECT_EQ(std::stod(formatReal(v)), v) << formatReal(v);
  }
  EXPECT_EQ(formatReal(0.5), "0.5");
}

TEST(Io, HexFloatRoundTripsExactly) {
  for (double v : {0.1, -1.0 / 3.0, std::numeric_limits<double>::denorm_min(), 1e308, 0.0}) {
    EXPECT_EQ(fromHexFloat(toHexFloat(v)), v);
  }
  EXPECT_THROW(fromHexFloat("nonsense"), ParseError);
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(sha256Hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256Hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Io, CsvTrimsAndReportsLines) {
  const auto dir = std::filesystem::temp_directory_path() / "pan_io_csv";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "t.csv").string();
  writeTextFile(path, "a, b\n\n 1 ,2\n3,x\n");
  const CsvTable t = readCsv(path);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "1");
  EXPECT_EQ(parseIndex("12", path, 3), 12u);
  try {
    parseReal("x", path, 4);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parseIndex("-1", path, 2), ParseError);
  EXPECT_THROW(readTextFile((dir / "missing").string()), IoError);
}

}  // namespace
}  // namespace pan
