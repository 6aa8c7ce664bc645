#include <gtest/gtest.h>

#include "hic/error.hpp"

namespace hic {
namespace {

TEST(Errc, NamesRoundTrip) {
  for (int i = 0; i <= static_cast<int>(Errc::kConfigError); ++i) {
    const auto code = static_cast<Errc>(i);
    Errc back{};
    ASSERT_TRUE(errc_from_string(to_string(code), back));
    EXPECT_EQ(back, code);
  }
}

TEST(Errc, UnknownNameIsRejected) {
  Errc out{};
  EXPECT_FALSE(errc_from_string("NoSuchCode", out));
}

TEST(Error, WhatCarriesCodeName) {
  const Error e(Errc::kNotFound, "service X");
  EXPECT_EQ(e.code(), Errc::kNotFound);
  EXPECT_STREQ(e.what(), "NotFound: service X");
}

TEST(ParseError, KeepsLineAndReason) {
  const ParseError e(Errc::kWellFormednessError, 12, "mismatched tag");
  EXPECT_EQ(e.code(), Errc::kWellFormednessError);
  EXPECT_EQ(e.line(), 12);
  EXPECT_EQ(e.reason(), "mismatched tag");
}

}  // namespace
}  // namespace hic
