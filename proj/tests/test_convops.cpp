#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "spoofbench/convops.hpp"
#include "spoofbench/rng.hpp"
#include "spoofbench/search.hpp"

using namespace spoofbench;

TEST_CASE("convolve identity filter picks the center pixel") {
    MultibandImage img(3, 3, 1);
    for (int i = 0; i < 9; ++i) img.data[i] = i * 0.1;
    FilterBank bank(1, 3, 1);
    bank.w(0, 1, 1, 0) = 1.0;
    const MultibandImage out = convolve(img, bank);
    REQUIRE(out.width == 1);
    REQUIRE(out.height == 1);
    REQUIRE(out.at(0, 0, 0) == Catch::Approx(img.at(1, 1, 0)));
}

TEST_CASE("convolve ramp image against the naive oracle") {
    MultibandImage img(4, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) img.at(x, y, 0) = (x + 4.0 * y) / 16.0;
    FilterBank bank(1, 3, 1);
    for (int dy = 0; dy < 3; ++dy)
        for (int dx = 0; dx < 3; ++dx) bank.w(0, dy, dx, 0) = 1.0 / 9.0;
    const MultibandImage out = convolve(img, bank);
    REQUIRE(out.width == 2);
    REQUIRE(out.height == 2);
    REQUIRE(oracle::max_rel_error(out, oracle::naive_convolve(img, bank)) < 1e-12);
}

TEST_CASE("convolve output dimensions") {
    MultibandImage img(32, 32, 1, 0.1);
    FilterBank bank(16, 5, 1);
    const MultibandImage out = convolve(img, bank);
    REQUIRE(out.width == 28);
    REQUIRE(out.height == 28);
    REQUIRE(out.bands == 16);
}

TEST_CASE("convolve shape errors") {
    MultibandImage img(4, 4, 2);
    REQUIRE_THROWS_AS(convolve(img, FilterBank(1, 3, 1)), ShapeError);
    REQUIRE_THROWS_AS(convolve(img, FilterBank(1, 5, 2)), ShapeError);
}

TEST_CASE("relu clamps negatives and is idempotent") {
    MultibandImage img(2, 1, 1);
    img.at(0, 0, 0) = -2.0;
    img.at(1, 0, 0) = 3.0;
    const MultibandImage out = relu(img);
    REQUIRE(out.at(0, 0, 0) == 0.0);
    REQUIRE(out.at(1, 0, 0) == 3.0);

    Rng rng(5);
    const MultibandImage rand = oracle::random_image(6, 6, 2, rng, -1.0, 1.0);
    REQUIRE(relu(relu(rand)).data == relu(rand).data);
}

TEST_CASE("pool basics") {
    SECTION("single-element window is identity") {
        Rng rng(9);
        const MultibandImage img = oracle::random_image(5, 4, 2, rng);
        for (double alpha : {1.0, 2.0, 10.0})
            REQUIRE(oracle::max_rel_error(pool(img, 1, 1, alpha), img) < 1e-12);
    }
    SECTION("3-4-5 with alpha=2") {
        MultibandImage wide(3, 3, 1, 0.0);
        wide.at(0, 0, 0) = 3.0;
        wide.at(1, 0, 0) = 4.0;
        const MultibandImage out = pool(wide, 3, 1, 2.0);
        REQUIRE(out.at(0, 0, 0) == Catch::Approx(5.0).epsilon(1e-12));
    }
    SECTION("alpha=10 scalar value") {
        MultibandImage img(3, 3, 1, 0.0);
        img.at(0, 0, 0) = 1.0;
        img.at(1, 0, 0) = 2.0;
        const double expected = std::pow(std::pow(1.0, 10) + std::pow(2.0, 10), 0.1);
        REQUIRE(pool(img, 3, 1, 10.0).at(0, 0, 0) == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("empty output grid") {
        MultibandImage img(2, 2, 1);
        REQUIRE_THROWS_AS(pool(img, 3, 1, 2.0), ShapeError);
    }
}

TEST_CASE("pool positive homogeneity") {
    Rng rng(13);
    const MultibandImage img = oracle::random_image(9, 9, 2, rng);
    MultibandImage scaled = img;
    const double c = 3.75;
    for (double& v : scaled.data) v *= c;
    for (double alpha : {1.0, 2.0, 10.0}) {
        const MultibandImage a = pool(img, 3, 2, alpha);
        const MultibandImage b = pool(scaled, 3, 2, alpha);
        for (std::size_t i = 0; i < a.data.size(); ++i)
            REQUIRE(b.data[i] == Catch::Approx(c * a.data[i]).epsilon(1e-9));
    }
}

TEST_CASE("divnorm basics") {
    SECTION("constant self-normalization") {
        MultibandImage img(3, 3, 1, 2.0);
        const MultibandImage out = divnorm(img, 1);
        for (double v : out.data) REQUIRE(v == Catch::Approx(1.0).epsilon(1e-6));
    }
    SECTION("all-zero image stays zero") {
        MultibandImage img(4, 4, 2, 0.0);
        for (double v : divnorm(img, 3).data) REQUIRE(v == 0.0);
    }
    SECTION("output bounded by 1") {
        Rng rng(17);
        const MultibandImage img = oracle::random_image(5, 5, 2, rng);
        for (double v : divnorm(img, 3).data) REQUIRE(std::abs(v) <= 1.0 + 1e-12);
    }
}

TEST_CASE("operation oracles on random images") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 7 + static_cast<int>(rng.uniform_index(10));
        const int h = 7 + static_cast<int>(rng.uniform_index(10));
        const int m = 1 + static_cast<int>(rng.uniform_index(3));
        const MultibandImage img = oracle::random_image(w, h, m, rng);

        FilterBank bank(2, 3, m);
        for (double& v : bank.weights) v = rng.uniform(-1.0, 1.0);
        REQUIRE(oracle::max_rel_error(convolve(img, bank), oracle::naive_convolve(img, bank)) <
                1e-9);

        const MultibandImage pos = relu(convolve(img, bank));
        if (pos.width >= 3 && pos.height >= 3) {
            REQUIRE(oracle::max_rel_error(pool(pos, 3, 2, 2.0), oracle::naive_pool(pos, 3, 2, 2.0)) <
                    1e-9);
            REQUIRE(oracle::max_rel_error(divnorm(pos, 3), oracle::naive_divnorm(pos, 3)) < 1e-9);
        }
    }
}

TEST_CASE("forward composition and determinism") {
    Rng rng(29);
    const MultibandImage img = oracle::random_image(12, 12, 1, rng, -0.5, 0.5);

    SECTION("identity-ish single layer equals relu(img) flattened") {
        LayerSpec ls{1, 3, 1, 1, 2.0, false, 1};
        FilterSet fs;
        fs.banks.emplace_back(1, 3, 1);
        fs.banks[0].w(0, 1, 1, 0) = 1.0;
        const FeatureVector out = forward(img, {ls}, fs);
        const MultibandImage expect = relu(crop(img, 1, 1, 10, 10));
        REQUIRE(out.values == flatten(expect).values);
    }

    SECTION("two-layer output shape follows the chained arithmetic") {
        ArchitectureSpec spec;
        spec.layers = {LayerSpec{4, 5, 3, 2, 2.0, false, 1}, LayerSpec{4, 5, 3, 2, 2.0, false, 1}};
        spec.use_color = false;
        const MultibandImage input = oracle::random_image(32, 32, 1, rng);
        const FilterSet fs = generate_random_filters(spec, 77);
        const FeatureVector out = forward(input, spec.layers, fs);
        const oracle::ShapeChainResult chain = oracle::chain_shapes(
            32, 32, 1,
            {{4, 5, 3, 2, false, 1}, {4, 5, 3, 2, false, 1}});
        REQUIRE(static_cast<long>(out.dimensionality()) == chain.output);
    }

    SECTION("shape collapse raises naming the layer") {
        ArchitectureSpec spec;
        spec.layers = {LayerSpec{2, 5, 3, 2, 2.0, false, 1}, LayerSpec{2, 9, 3, 1, 2.0, false, 1}};
        const FilterSet fs = generate_random_filters(spec, 3);
        const MultibandImage small = oracle::random_image(16, 16, 1, rng);
        REQUIRE_THROWS_WITH(forward(small, spec.layers, fs),
                            Catch::Matchers::ContainsSubstring("layer 2"));
    }

    SECTION("deterministic") {
        ArchitectureSpec spec;
        spec.layers = {LayerSpec{3, 3, 3, 2, 10.0, true, 3}};
        const FilterSet fs = generate_random_filters(spec, 5);
        const FeatureVector a = forward(img, spec.layers, fs);
        const FeatureVector b = forward(img, spec.layers, fs);
        REQUIRE(a.values == b.values);
    }
}
