#include <doctest.h>

#include <cstdint>
#include <string>

#include "gateward/flop.hpp"

using namespace gateward;

TEST_CASE("plain decimal strings parse exactly") {
    CHECK(Flop::parse("0") == Flop(0));
    CHECK(Flop::parse("123") == Flop(123));
    CHECK(Flop::parse("18446744073709551616") ==
          Flop(Flop::rep(1) << 64));  // 2^64, above any uint64_t
}

TEST_CASE("scientific forms expand to exact integers") {
    CHECK(Flop::parse("1e27") == Flop::pow10(27));
    CHECK(Flop::parse("2e25") == Flop::pow10(25) * 2);
    // 2.0105e25 = 20105 * 10^21
    CHECK(Flop::parse("2.0105e25") == Flop::pow10(21) * 20105);
    CHECK(Flop::parse("1.1e27") == Flop::pow10(26) * 11);
    CHECK(Flop::parse("1E27") == Flop::pow10(27));
}

TEST_CASE("inexact or malformed forms are rejected") {
    Flop out;
    CHECK_FALSE(Flop::try_parse("-5", out));        // signed
    CHECK_FALSE(Flop::try_parse("+5", out));
    CHECK_FALSE(Flop::try_parse("1.5", out));       // fractional, no exponent
    CHECK_FALSE(Flop::try_parse("1.23e1", out));    // 12.3 is not an integer
    CHECK_FALSE(Flop::try_parse("2.0105e3", out));  // 2010.5
    CHECK_FALSE(Flop::try_parse("", out));
    CHECK_FALSE(Flop::try_parse("e5", out));
    CHECK_FALSE(Flop::try_parse("1e", out));
    CHECK_FALSE(Flop::try_parse("12a", out));
    CHECK_FALSE(Flop::try_parse("1e-3", out));
    CHECK_FALSE(Flop::try_parse(" 1", out));
}

TEST_CASE("overflow past 128 bits is rejected") {
    Flop out;
    // 2^128 - 1 is the maximum representable value.
    CHECK(Flop::try_parse("340282366920938463463374607431768211455", out));
    CHECK_FALSE(Flop::try_parse("340282366920938463463374607431768211456", out));
    CHECK_FALSE(Flop::try_parse("1e39", out));
    CHECK(Flop::try_parse("1e38", out));
    CHECK(out == Flop::pow10(38));
}

TEST_CASE("str round-trips through parse") {
    for (const char* text : {"0", "1", "999", "1000000000000000000000000000",
                             "340282366920938463463374607431768211455"}) {
        CHECK(Flop::parse(text).str() == text);
    }
    CHECK(Flop::parse("1e27").str() == "1000000000000000000000000000");
    CHECK(Flop::parse("2.0105e25").str() == "20105000000000000000000000");
}

TEST_CASE("pow10 matches repeated multiplication") {
    Flop acc(1);
    for (int e = 0; e <= 38; ++e) {
        CHECK(Flop::pow10(e) == acc);
        if (e < 38) acc = acc * 10;
    }
}

TEST_CASE("arithmetic and ordering behave like integers") {
    const Flop a = Flop::pow10(25) * 2;
    const Flop b = Flop::pow10(23);
    CHECK(a + b == Flop::parse("2.01e25"));
    CHECK(a - b == Flop::parse("1.99e25"));
    CHECK(a / 2 == Flop::pow10(25));
    CHECK(b < a);
    CHECK(a >= a);
    CHECK(Flop(0).is_zero());
    CHECK_FALSE(b.is_zero());
}

TEST_CASE("rate comparison is exact where doubles are not") {
    // 10^27 flop over slightly different denominators: the cross products
    // exceed 2^53, so a floating comparison would tie; the exact one must not.
    const Rate a{Flop::pow10(27), 1'000'000'000};
    const Rate b{Flop::pow10(27) + Flop(1), 1'000'000'000};
    CHECK(rate_cmp(a, b) < 0);
    CHECK(rate_cmp(b, a) > 0);
    CHECK(rate_cmp(a, a) == 0);

    // Equivalent fractions compare equal regardless of representation.
    const Rate half{Flop(5), 10};
    const Rate also_half{Flop(500), 1'000};
    CHECK(rate_eq(half, also_half));

    // 2^100 / 3 vs (2^100+1) / 3 — numerators far beyond 64 bits.
    const Flop big = Flop(Flop::rep(1) << 100);
    CHECK(rate_cmp(Rate{big, 3}, Rate{big + Flop(1), 3}) < 0);
}

TEST_CASE("rate_exceeds is strict: equal to the cap is allowed") {
    const Flop cap = Flop::pow10(20);  // flop per second
    CHECK_FALSE(rate_exceeds(Rate::per_second(cap), cap));
    CHECK(rate_exceeds(Rate::per_second(cap + Flop(1)), cap));
    CHECK_FALSE(rate_exceeds(Rate::per_second(cap - Flop(1)), cap));

    // 2e19 flop in 0.1 s is exactly 2e20/s: strictly above a 1e20 cap.
    CHECK(rate_exceeds(Rate{Flop::parse("2e19"), 100'000}, cap));
    // 1e19 flop in 0.1 s is exactly the cap: allowed.
    CHECK_FALSE(rate_exceeds(Rate{Flop::parse("1e19"), 100'000}, cap));
}

TEST_CASE("rate_lt orders mixed denominators") {
    CHECK(rate_lt(Rate{Flop(1), 3}, Rate{Flop(1), 2}));
    CHECK_FALSE(rate_lt(Rate{Flop(1), 2}, Rate{Flop(1), 3}));
    CHECK(Rate::zero().flop.is_zero());
    CHECK(rate_lt(Rate::zero(), Rate{Flop(1), 1'000'000'000}));
}

TEST_CASE("flop_per_sec gives a usable approximation for reporting") {
    CHECK(Rate::per_second(Flop::pow10(18)).flop_per_sec() == doctest::Approx(1e18));
    CHECK(Rate{Flop::parse("2e19"), 100'000}.flop_per_sec() == doctest::Approx(2e20));
}
