#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "kinflow/brownian.hpp"
#include "kinflow/parallel.hpp"

using namespace kinflow;

TEST_CASE("time grid nodes and alignment") {
    TimeGrid g(0.0, 1.0, 1000);
    CHECK(g.dt() == Catch::Approx(1e-3));
    CHECK(g.node(0) == 0.0);
    CHECK(g.node(1000) == 1.0);
    CHECK(g.index_of(0.5) == 500);
    CHECK_THROWS_AS(g.index_of(0.50037), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("paths start at zero and seeding is bit-exact") {
    TimeGrid g(0.0, 1.0, 1000);
    auto a = BrownianEnsemble::generate(42, g, 1, 1);
    CHECK(a.value(0, 0, 0) == 0.0);

    auto b = BrownianEnsemble::generate(42, g, 1, 1);
    CHECK(a == b);

    auto c = BrownianEnsemble::generate(43, g, 1, 1);
    CHECK_FALSE(a == c);
}

TEST_CASE("generation is independent of worker count") {
    TimeGrid g(0.0, 1.0, 64);
    set_num_threads(1);
    auto a = BrownianEnsemble::generate(7, g, 3, 40);
    set_num_threads(4);
    auto b = BrownianEnsemble::generate(7, g, 3, 40);
    set_num_threads(0);
    CHECK(a == b);
}

TEST_CASE("terminal variance matches the N(0,1) law") {
    // Var(beta(1)) = 1; sample variance over N paths has std err ~ sqrt(2/N).
    const std::size_t N = 100000;
    TimeGrid g(0.0, 1.0, 1000);
    auto ens = BrownianEnsemble::generate(7, g, 1, N);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
        const double b1 = ens.value(s, 0, g.steps);
        sum += b1;
        sumsq += b1 * b1;
    }
    const double mean = sum / N;
    const double var = sumsq / N - mean * mean;
    const double band = 3.0 * std::sqrt(2.0 / static_cast<double>(N));
    CHECK(var > 1.0 - band);
    CHECK(var < 1.0 + band);
}

TEST_CASE("increment statistics: mean, independence") {
    const std::size_t N = 20000;
    TimeGrid g(0.0, 1.0, 16);
    auto ens = BrownianEnsemble::generate(11, g, 1, N);
    const double dt = g.dt();

    // Empirical increment mean within 4 standard errors of 0.
    double mean = 0.0;
    for (std::size_t s = 0; s < N; ++s) mean += ens.increment(s, 0, 3, 4);
    mean /= N;
    CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / N));

    // Disjoint increments uncorrelated within 4 standard errors.
    double corr = 0.0;
    for (std::size_t s = 0; s < N; ++s)
        corr += ens.increment(s, 0, 2, 5) * ens.increment(s, 0, 9, 12);
    corr /= N;
    const double se = 3.0 * dt / std::sqrt(static_cast<double>(N));  // Var of product = dt_a*dt_b
    CHECK(std::abs(corr) < 4.0 * se);
}

TEST_CASE("refine keeps original nodes exactly") {
    TimeGrid g(0.0, 1.0, 32);
    auto ens = BrownianEnsemble::generate(5, g, 2, 3);
    auto fine = ens.refine(2);
    REQUIRE(fine.grid().steps == 64);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t i = 0; i <= 32; ++i)
                CHECK(fine.value(s, k, 2 * i) == ens.value(s, k, i));
}

TEST_CASE("refine twice by 2 equals refine once by 4") {
    TimeGrid g(0.0, 1.0, 8);
    auto ens = BrownianEnsemble::generate(99, g, 1, 4);
    auto twice = ens.refine(2).refine(2);
    auto once = ens.refine(4);
    CHECK(twice == once);
}

TEST_CASE("bridge midpoint conditional variance is dt/4") {
    const std::size_t N = 100000;
    TimeGrid g(0.0, 1.0, 2);
    auto ens = BrownianEnsemble::generate(123, g, 1, N);
    auto fine = ens.refine(2);
    const double dt = g.dt();  // coarse spacing 0.5
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
        const double mid = fine.value(s, 0, 1);
        const double cond_mean = 0.5 * (ens.value(s, 0, 0) + ens.value(s, 0, 1));
        const double dev = mid - cond_mean;
        sum += dev;
        sumsq += dev * dev;
    }
    const double var = sumsq / N - (sum / N) * (sum / N);
    const double expected = dt / 4.0;
    const double band = 3.0 * expected * std::sqrt(2.0 / static_cast<double>(N));
    CHECK(std::abs(var - expected) < band);
}

TEST_CASE("refined increments still have the right variance") {
    const std::size_t N = 50000;
    TimeGrid g(0.0, 1.0, 4);
    auto fine = BrownianEnsemble::generate(3, g, 1, N).refine(3);  // non-dyadic pass
    REQUIRE(fine.grid().steps == 12);
    const double dtf = fine.grid().dt();
    double sumsq = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
        const double inc = fine.increment(s, 0, 4, 5);
        sumsq += inc * inc;
    }
    const double var = sumsq / N;
    CHECK(std::abs(var - dtf) < 4.0 * dtf * std::sqrt(2.0 / static_cast<double>(N)));
}

TEST_CASE("rejects invalid arguments") {
    TimeGrid g(0.0, 1.0, 10);
    CHECK_THROWS_AS(BrownianEnsemble::generate(1, g, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(BrownianEnsemble::generate(1, g, 1, 0), std::invalid_argument);
    auto ens = BrownianEnsemble::generate(1, g, 1, 1);
    CHECK_THROWS_AS(ens.refine(1), std::invalid_argument);
}

TEST_CASE("binary round trip") {
    TimeGrid g(0.25, 2.25, 16);
    auto ens = BrownianEnsemble::generate(77, g, 2, 5);
    const auto path = std::filesystem::temp_directory_path() / "kinflow_test_ens.kfbm";
    ens.write_binary(path.string());
    auto back = BrownianEnsemble::read_binary(path.string());
    CHECK(back == ens);
    std::filesystem::remove(path);
}
