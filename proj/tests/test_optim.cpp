#include <catch2/catch_amalgamated.hpp>

#include "accelpo/checks.hpp"
#include "accelpo/optim.hpp"

using namespace accelpo;
using Catch::Approx;

TEST_CASE("sgd basics") {
    const Table p(1, 2, 0.0);
    REQUIRE(sgd_step(p, Table(1, 2, 0.0), 0.5) == p);
    const Table moved = sgd_step(p, Table(1, 2, 3.0), 1.0);
    REQUIRE(moved(0, 0) == 3.0);
}

TEST_CASE("two half-steps equal one full step") {
    Table p(1, 3);
    p(0, 0) = 0.25;
    p(0, 1) = -1.5;
    p(0, 2) = 4.0;
    Table g(1, 3);
    g(0, 0) = 2.0;
    g(0, 1) = -3.0;
    g(0, 2) = 1.0;
    const Table halves = sgd_step(sgd_step(p, g, 0.25), g, 0.25);
    const Table full = sgd_step(p, g, 0.5);
    REQUIRE(halves == full);  // dyadic values keep this exact
}

TEST_CASE("adam ignores a zero gradient from a fresh state") {
    AdamState st(2, 2, 0.1);
    const auto [delta, next] = adam_step(st, Table(2, 2, 0.0));
    REQUIRE(sup_norm(delta) == 0.0);
    REQUIRE(next.t == 1);
}

TEST_CASE("adam's first step is a signed learning-rate move") {
    AdamState st(1, 2, 0.01);
    Table g(1, 2);
    g(0, 0) = 0.3;
    g(0, 1) = -7.0;
    const Table delta = adam_step(st, g).first;
    REQUIRE(delta(0, 0) == Approx(0.01).epsilon(1e-6));
    REQUIRE(delta(0, 1) == Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("constant gradients displace by roughly steps times learning rate") {
    AdamState st(1, 1, 0.05);
    Table g(1, 1, 0.8);
    double displaced = 0.0;
    for (int k = 0; k < 1000; ++k) {
        auto [delta, next] = adam_step(st, g);
        st = std::move(next);
        displaced += delta(0, 0);
    }
    REQUIRE(displaced == Approx(1000 * 0.05).epsilon(0.01));
}

TEST_CASE("adam is sign equivariant") {
    Rng rng(5);
    AdamState pos(1, 3, 0.1), neg(1, 3, 0.1);
    for (int t = 0; t < 20; ++t) {
        const Table g = harness::random_table(rng, 1, 3, -2.0, 2.0);
        auto [dp, sp] = adam_step(pos, g);
        auto [dn, sn] = adam_step(neg, scaled(g, -1.0));
        pos = std::move(sp);
        neg = std::move(sn);
        REQUIRE(dp == scaled(dn, -1.0));
    }
}

TEST_CASE("optimizer steps have no cross-parameter coupling") {
    Rng rng(7);
    const Table g = harness::random_table(rng, 1, 5, -1.0, 1.0);
    const Table p = harness::random_table(rng, 1, 5, -1.0, 1.0);
    Table g_perm(1, 5), p_perm(1, 5);
    const int perm[5] = {3, 0, 4, 1, 2};
    for (int a = 0; a < 5; ++a) {
        g_perm(0, perm[a]) = g(0, a);
        p_perm(0, perm[a]) = p(0, a);
    }
    const Table s = sgd_step(p, g, 0.3);
    const Table s_perm = sgd_step(p_perm, g_perm, 0.3);
    AdamState st(1, 5, 0.1), st_perm(1, 5, 0.1);
    const Table d = adam_step(st, g).first;
    const Table d_perm = adam_step(st_perm, g_perm).first;
    for (int a = 0; a < 5; ++a) {
        REQUIRE(s(0, a) == s_perm(0, perm[a]));
        REQUIRE(d(0, a) == d_perm(0, perm[a]));
    }
}
