#include <gtest/gtest.h>

#include <random>

#include "selfreg/optim.hpp"

using namespace selfreg;

TEST(AdamW, ZeroGradientIsAFixedPoint) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> params(7);
        for (auto& p : params) p = normal(rng) * 10.0;
        const auto before = params;
        AdamWState<double> st(params.size());
        st.step_count = rng() % 1000;
        const std::vector<double> zeros(params.size(), 0.0);
        const auto steps = st.step_count;
        AdamWConfig cfg;
        cfg.learning_rate = 0.1;
        adamw_step<double>(st, params, zeros, cfg);
        EXPECT_EQ(params, before);
        EXPECT_EQ(st.step_count, steps + 1);
    }
}

TEST(AdamW, FirstStepMovesByLearningRate) {
    std::vector<double> p{1.0};
    const std::vector<double> g{1.0};
    AdamWState<double> st(1);
    AdamWConfig cfg;
    cfg.learning_rate = 0.1;
    adamw_step<double>(st, p, g, cfg);
    // m_hat = 1, v_hat = 1 after bias correction
    EXPECT_NEAR(p[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-12);
    EXPECT_NEAR(p[0], 0.9, 1e-6);
}

TEST(AdamW, DecoupledDecayWithZeroGradient) {
    std::vector<double> p{2.0, -3.0, 0.5};
    const auto before = p;
    const std::vector<double> g(3, 0.0);
    AdamWState<double> st(3);
    AdamWConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.1;
    adamw_step<double>(st, p, g, cfg);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], before[i] * (1.0 - 0.1 * 0.1));
}

TEST(AdamW, SecondMomentStaysNonNegative) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 100.0);
    std::vector<double> p(16, 0.0), g(16);
    AdamWState<double> st(16);
    AdamWConfig cfg;
    for (int step = 0; step < 2000; ++step) {
        for (auto& v : g) v = normal(rng);
        adamw_step<double>(st, p, g, cfg);
        for (auto v : st.second_moment) ASSERT_GE(v, 0.0);
    }
}

TEST(AdamW, RejectsBadInput) {
    std::vector<double> p(2), g(3);
    AdamWState<double> st(2);
    EXPECT_THROW(adamw_step<double>(st, p, g, AdamWConfig{}), InvalidArgument);
    std::vector<double> g2{1.0, std::numeric_limits<double>::infinity()};
    EXPECT_THROW(adamw_step<double>(st, p, g2, AdamWConfig{}), InvalidArgument);
    AdamWConfig bad;
    bad.beta1 = 1.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = {};
    bad.epsilon = 0.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Plateau, ImprovementKeepsRate) {
    PlateauSchedule s;
    EXPECT_TRUE(plateau_update(s, 0.5, 1e-3).improved);
    auto r = plateau_update(s, 0.6, 1e-3);
    EXPECT_TRUE(r.improved);
    EXPECT_EQ(r.learning_rate, 1e-3);
}

TEST(Plateau, FourthCallHalvesAfterThreeStaleEpochs) {
    PlateauSchedule s;
    double lr = 1e-2;
    const double metrics[] = {0.6, 0.5, 0.5, 0.5};
    std::vector<double> rates;
    for (double m : metrics) {
        lr = plateau_update(s, m, lr).learning_rate;
        rates.push_back(lr);
    }
    EXPECT_EQ(rates[2], 1e-2);
    EXPECT_EQ(rates[3], 5e-3);
}

TEST(Plateau, AtMostTwoReductions) {
    PlateauSchedule s;
    double lr = 1.0;
    lr = plateau_update(s, 0.9, lr).learning_rate;
    int reductions = 0;
    for (int i = 0; i < 7; ++i) {
        const double next = plateau_update(s, 0.1, lr).learning_rate;
        if (next != lr) ++reductions;
        lr = next;
    }
    EXPECT_EQ(reductions, 2);
    EXPECT_EQ(lr, 0.25);
    for (int i = 0; i < 20; ++i) lr = plateau_update(s, 0.1, lr).learning_rate;
    EXPECT_EQ(lr, 0.25);
}

TEST(Plateau, RateIsAlwaysInitialTimesPowerOfFactor) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        PlateauSchedule s;
        const double lr0 = 1e-3;
        double lr = lr0;
        for (int i = 0; i < 40; ++i) lr = plateau_update(s, u(rng) < 0.3 ? u(rng) : 0.0, lr).learning_rate;
        const double r = std::log2(lr0 / lr);
        EXPECT_EQ(r, std::round(r));
        EXPECT_LE(r, 2.0);
        EXPECT_EQ(lr, lr0 * std::pow(0.5, static_cast<double>(s.reductions_done)));
    }
}

TEST(Plateau, RejectsNonFiniteMetric) {
    PlateauSchedule s;
    EXPECT_THROW(plateau_update(s, std::nan(""), 1.0), InvalidArgument);
}
