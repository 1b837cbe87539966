#include <gtest/gtest.h>

#include "pprucb/serialization.hpp"

using namespace pprucb;

TEST(Base64, KnownEncoding) {
    const double one = 1.0;
    EXPECT_EQ(io::encode_f64(&one, 1), "AAAAAAAA8D8=");
    EXPECT_EQ(io::decode_f64("AAAAAAAA8D8=", 1, "t"), std::vector<double>{1.0});
    const double two[2] = {-2.5, 0.0};
    EXPECT_EQ(io::decode_f64(io::encode_f64(two, 2), 2, "t"), (std::vector<double>{-2.5, 0.0}));
}

TEST(Base64, RejectsBadPayloads) {
    EXPECT_THROW(io::decode_f64("AAAAAAAA8D8=", 2, "t"), ConfigError);
    EXPECT_THROW(io::decode_f64("AAAAAAAA8D8", 1, "t"), ConfigError);
    EXPECT_THROW(io::decode_f64("!!!!!!!!!!!=", 1, "t"), ConfigError);
}

TEST(NormalFormJson, RoundTripAndLayout) {
    const auto g = prisoners_dilemma();
    const json j = to_json(g);
    EXPECT_EQ(j.at("payoffs")[0][1], json::array({0.0, 5.0}));
    const auto back = normal_form_from_json(j);
    for (std::size_t i = 0; i < g.num_profiles(); ++i) EXPECT_EQ(back.payoff(i), g.payoff(i));
    EXPECT_EQ(to_json(back), j);
}

TEST(NormalFormJson, ShapeErrorsAndUnknownKeys) {
    json j = to_json(matching_pennies());
    j["extra"] = 1;
    EXPECT_THROW(normal_form_from_json(j), ConfigError);
    j = to_json(matching_pennies());
    j["payoffs"][1] = json::array({json::array({1.0, 2.0})});
    EXPECT_THROW(normal_form_from_json(j), ConfigError);
    j = to_json(matching_pennies());
    j["payoffs"][0][0] = json::array({1.0});
    EXPECT_THROW(normal_form_from_json(j), ConfigError);
}

TEST(FeatureMapJson, BitExactRoundTrip) {
    Rng rng(4);
    const auto m = RffFeatureMap::sample(3, 17, 0.85, rng);
    const auto back = feature_map_from_json(to_json(m));
    EXPECT_EQ(back.frequencies(), m.frequencies());
    EXPECT_EQ(back.phases(), m.phases());
    EXPECT_EQ(back.lengthscale(), m.lengthscale());
    json bad = to_json(m);
    bad["dim"] = 18;
    EXPECT_THROW(feature_map_from_json(bad), ConfigError);
    bad = to_json(m);
    bad["encoding"] = "hex";
    EXPECT_THROW(feature_map_from_json(bad), ConfigError);
}

TEST(NetworkJson, RoundTripAndValidation) {
    cellular::NetworkConfig c;
    c.num_bs = 4;
    c.topology_seed = 9;
    const auto back = network_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    json j = to_json(c);
    j["ue_distance_interval_m"] = json::array({10.0});
    EXPECT_THROW(network_from_json(j), ConfigError);
    j = to_json(c);
    j["num_bss"] = 3;
    EXPECT_THROW(network_from_json(j), ConfigError);
}

TEST(GridAndSurrogateJson, RoundTripAndValidation) {
    GridOptions g;
    g.levels_per_coord = 2;
    EXPECT_EQ(to_json(grid_from_json(to_json(g))), to_json(g));
    EXPECT_THROW(grid_from_json(json{{"levels_per_coord", 0}}), ConfigError);
    SurrogateConfig s;
    s.num_features = 128;
    EXPECT_EQ(to_json(surrogate_from_json(to_json(s))), to_json(s));
    EXPECT_THROW(surrogate_from_json(json{{"delta", 0.0}}), ConfigError);
    EXPECT_THROW(surrogate_from_json(json{{"lenghtscale", 1.0}}), ConfigError);
}

TEST(TabulatedJson, RoundTrip) {
    auto src = synthetic_instance(SyntheticGameConfig{}, 0.0, 1);
    const auto t = TabulatedGame::from(src.oracle, src.spec);
    const auto back = tabulated_from_json(to_json(t));
    EXPECT_EQ(to_json(back), to_json(t));
    EXPECT_EQ(back.grid.size(), t.grid.size());
}

TEST(SyntheticJson, DefaultsAndRoundTrip) {
    const auto c = synthetic_from_json(json::object());
    EXPECT_EQ(to_json(c), to_json(SyntheticGameConfig{}));
    EXPECT_THROW(synthetic_from_json(json{{"scales", 2}}), ConfigError);
}
