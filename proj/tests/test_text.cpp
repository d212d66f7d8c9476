#include <gtest/gtest.h>

#include <sstream>

#include "gradeforest/config.hpp"
#include "gradeforest/text.hpp"

using namespace gradeforest;

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(text::format_double(0.5), "0.5");
  EXPECT_EQ(text::format_double(2.0), "2");
  EXPECT_EQ(text::format_double(230.0 / 3.0), "76.66666666666667");
  for (double v : {0.1, 1e-300, 123456.789, -3.25, 1.0 / 7.0})
    EXPECT_EQ(*text::parse_double(text::format_double(v)), v);
}

TEST(ParseDouble, AcceptsPlusAndWhitespaceRejectsGarbage) {
  EXPECT_EQ(text::parse_double(" +2.5 "), 2.5);
  EXPECT_FALSE(text::parse_double("").has_value());
  EXPECT_FALSE(text::parse_double("1.5x").has_value());
  EXPECT_FALSE(text::parse_double("abc").has_value());
  EXPECT_EQ(text::parse_int<int>(" 42"), 42);
  EXPECT_FALSE(text::parse_int<unsigned>("-1").has_value());
}

TEST(Csv, QuotedFieldsAndEscaping) {
  const auto f = text::split_csv_line(R"(a,"b,c","d ""e""",)");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "b,c");
  EXPECT_EQ(f[2], "d \"e\"");
  EXPECT_EQ(f[3], "");
  EXPECT_EQ(text::csv_escape("plain"), "plain");
  EXPECT_EQ(text::split_csv_line(text::csv_escape("x,\"y\""))[0], "x,\"y\"");
}

TEST(Csv, NextLineStripsCarriageReturn) {
  std::istringstream in("a,b\r\nc\n");
  std::string line;
  ASSERT_TRUE(text::next_line(in, line));
  EXPECT_EQ(line, "a,b");
  ASSERT_TRUE(text::next_line(in, line));
  EXPECT_EQ(line, "c");
  EXPECT_FALSE(text::next_line(in, line));
}

TEST(KeyValues, ParseCommentsOverridesAndTypes) {
  std::istringstream in("# comment\nseed = 7\nbeta=50\n\nseed = 8\nflag = yes\nratio = 0.25\n");
  const auto kv = KeyValues::parse(in);
  EXPECT_EQ(kv.get_int<int>("seed", 0), 8);
  EXPECT_EQ(kv.get_int<int>("beta", 0), 50);
  EXPECT_TRUE(kv.get_bool("flag", false));
  EXPECT_DOUBLE_EQ(kv.get_double("ratio", 0), 0.25);
  EXPECT_EQ(kv.get_or("missing", "x"), "x");
  EXPECT_THROW(kv.get_int<int>("ratio", 0), ConfigError);
}

TEST(KeyValues, MalformedLineIsConfigError) {
  std::istringstream in("just words\n");
  EXPECT_THROW(KeyValues::parse(in), ConfigError);
}

TEST(KeyValues, WriteIsSortedAndReparses) {
  KeyValues kv;
  kv.set("b", "2");
  kv.set("a", "1");
  kv.set("grade_coefficient.LOWG", "-1");
  std::ostringstream out;
  kv.write(out);
  EXPECT_EQ(out.str(), "a = 1\nb = 2\ngrade_coefficient.LOWG = -1\n");
  std::istringstream in(out.str());
  EXPECT_EQ(KeyValues::parse(in).entries(), kv.entries());
  EXPECT_EQ(kv.with_prefix("grade_coefficient").at("LOWG"), "-1");
}
