#include <doctest.h>

#include <g3dgen/rng.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using g3dgen::RngStream;
using g3dgen::derive_seed;

TEST_CASE("same seed yields the same sequence") {
    RngStream a(42);
    RngStream b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds yield different sequences") {
    RngStream a(1);
    RngStream b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same < 4);
}

TEST_CASE("derive_seed separates labels and indices") {
    uint64_t s = 7;
    CHECK(derive_seed(s, "trace", 0) != derive_seed(s, "trace", 1));
    CHECK(derive_seed(s, "trace", 0) != derive_seed(s, "order", 0));
    CHECK(derive_seed(s, "trace", 3) == derive_seed(s, "trace", 3));
    CHECK(derive_seed(1, "trace", 0) != derive_seed(2, "trace", 0));
}

TEST_CASE("substream is deterministic") {
    RngStream a = RngStream::substream(9, "val", 4);
    RngStream b = RngStream::substream(9, "val", 4);
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1)") {
    RngStream r(3);
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("uniform_range covers the requested interval") {
    RngStream r(5);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform_range(-2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("uniform_int is in range and roughly uniform") {
    RngStream r(11);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        int k = r.uniform_int(7);
        REQUIRE(k >= 0);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts) {
        CHECK(c > n / 7 - 600);
        CHECK(c < n / 7 + 600);
    }
}

TEST_CASE("normal has near-standard moments") {
    RngStream r(13);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sq += x * x;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("sample_discrete follows the weights") {
    RngStream r(17);
    const double p[3] = {0.2, 0.3, 0.5};
    std::vector<int> counts(3, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        int k = r.sample_discrete(p, 3);
        REQUIRE(k >= 0);
        REQUIRE(k < 3);
        ++counts[k];
    }
    CHECK(std::abs(counts[0] / double(n) - 0.2) < 0.01);
    CHECK(std::abs(counts[1] / double(n) - 0.3) < 0.01);
    CHECK(std::abs(counts[2] / double(n) - 0.5) < 0.01);
}

TEST_CASE("sample_discrete never picks zero-probability leading bins") {
    RngStream r(19);
    const double p[3] = {0.0, 0.0, 1.0};
    for (int i = 0; i < 1000; ++i) CHECK(r.sample_discrete(p, 3) == 2);
}

TEST_CASE("shuffle permutes without losing elements") {
    RngStream r(23);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> orig = v;
    r.shuffle(v);
    CHECK(v != orig);
    std::sort(v.begin(), v.end());
    CHECK(v == orig);
}

TEST_CASE("shuffle is deterministic per seed") {
    std::vector<int> a(20), b(20);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    RngStream r1(29), r2(29);
    r1.shuffle(a);
    r2.shuffle(b);
    CHECK(a == b);
}
