#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "olfact/registry.hpp"
#include "olfact/types.hpp"
#include "olfact/util.hpp"

using namespace olfact;

TEST_CASE("registry loads the 50-substance manifest with lexicographic indices") {
    Registry reg = Registry::builtin_base();
    CHECK(reg.size() == 50);
    for (std::size_t i = 1; i < reg.size(); ++i)
        CHECK(reg.labels()[i - 1].name < reg.labels()[i].name);
    for (std::size_t i = 0; i < reg.size(); ++i)
        CHECK(reg.labels()[i].class_index == static_cast<int>(i));
}

TEST_CASE("registry lookup") {
    Registry reg = Registry::builtin_base();
    CHECK(reg.lookup("cashew").category == Category::nuts);
    CHECK(reg.lookup("allspice").category == Category::spices);
    CHECK(reg.lookup("cashew").class_index == reg.at(reg.lookup("cashew").class_index).class_index);

    CHECK_THROWS_AS(reg.lookup(""), DataError);
    CHECK_THROWS_WITH_AS(reg.lookup("cashw"), doctest::Contains("cashew"), DataError);
}

TEST_CASE("registry round-trip over all labels") {
    Registry reg = Registry::builtin_base();
    for (const auto& label : reg.labels())
        CHECK(reg.lookup(label.name).class_index == label.class_index);
}

TEST_CASE("mixture odorant palette") {
    auto odorants = Registry::builtin_mixture_odorants();
    REQUIRE(odorants.size() == 12);
    CHECK(odorants.front() == "almond");
    CHECK(odorants.back() == "strawberry");
}

TEST_CASE("make_mixture_target normalizes raw proportions") {
    std::vector<double> raw(12, 0.0);
    raw[0] = 2.0;
    raw[1] = 2.0;
    auto t = make_mixture_target(raw);
    CHECK(t.proportions[0] == doctest::Approx(0.5));
    CHECK(t.proportions[1] == doctest::Approx(0.5));
    CHECK(t.num_present == 2);

    std::vector<double> one_hot(12, 0.0);
    one_hot[3] = 1.0;
    auto o = make_mixture_target(one_hot);
    CHECK(o.proportions[3] == 1.0);
    CHECK(o.num_present == 1);

    std::vector<double> ternary(12, 0.0);
    ternary[0] = 1.0;
    ternary[1] = 3.0;
    ternary[2] = 6.0;
    auto a = make_mixture_target(ternary);
    CHECK(a.proportions[0] == doctest::Approx(0.1));
    CHECK(a.proportions[1] == doctest::Approx(0.3));
    CHECK(a.proportions[2] == doctest::Approx(0.6));
}

TEST_CASE("make_mixture_target rejects invalid input") {
    CHECK_THROWS_AS(make_mixture_target(std::vector<double>(12, 0.0)), DataError);
    std::vector<double> neg(12, 0.0);
    neg[0] = 1.0;
    neg[5] = -0.2;
    CHECK_THROWS_AS(make_mixture_target(neg), DataError);
    std::vector<double> quad(12, 0.0);
    quad[0] = quad[1] = quad[2] = quad[3] = 1.0;
    CHECK_THROWS_AS(make_mixture_target(quad), DataError);  // beyond the ternary cap
    CHECK_NOTHROW(make_mixture_target(quad, 4));
}

TEST_CASE("mixture target sums to one and is scale invariant") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> raw(12, 0.0);
        const int present = 1 + static_cast<int>(rng.index(3));
        for (int i = 0; i < present; ++i) raw[rng.index(12)] = rng.uniform(0.01, 5.0);

        auto t = make_mixture_target(raw);
        double total = 0.0;
        for (double v : t.proportions) total += v;
        CHECK(std::fabs(total - 1.0) < 1e-9);
        CHECK(t.num_present >= 1);

        const double c = rng.uniform(0.1, 10.0);
        std::vector<double> scaled = raw;
        for (double& v : scaled) v *= c;
        auto t2 = make_mixture_target(scaled);
        for (std::size_t i = 0; i < 12; ++i)
            CHECK(t.proportions[i] == doctest::Approx(t2.proportions[i]).epsilon(1e-12));
        CHECK(t.num_present == t2.num_present);
    }
}

TEST_CASE("presence flags match strictly positive proportions") {
    std::vector<double> raw(12, 0.0);
    raw[2] = 0.4;
    raw[7] = 0.6;
    auto t = make_mixture_target(raw);
    for (std::size_t i = 0; i < 12; ++i)
        CHECK(t.presence[i] == (t.proportions[i] > 0.0 ? 1 : 0));
}

TEST_CASE("schemas") {
    auto base = base_schema();
    CHECK(base.num_channels() == 6);
    CHECK(base.sample_rate_hz == 1.0);
    CHECK(base.channels ==
          std::vector<std::string>{"NO2", "C2H5OH", "VOC", "CO", "Alcohol", "LPG"});
    auto mix = mixture_schema();
    CHECK(mix.num_channels() == 4);
    CHECK(mix.sample_rate_hz == 10.0);
    CHECK(mix.channel_index("CO") == 3);
    CHECK(mix.channel_index("LPG") == -1);
}

TEST_CASE("session validation") {
    SensorSession s;
    s.schema = base_schema();
    s.session_id = "t";
    s.num_steps = 2;
    s.readings.assign(12, 1.0);
    CHECK_NOTHROW(validate_session(s));
    s.readings[5] = std::nan("");
    CHECK_THROWS_AS(validate_session(s), DataError);
    s.readings.assign(11, 1.0);
    CHECK_THROWS_AS(validate_session(s), DataError);
}
