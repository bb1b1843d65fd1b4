#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "selfreg/synthbench.hpp"

using namespace selfreg;

namespace {

double row_norm(const EmbeddingDataset& ds, std::size_t i) {
    double s = 0.0;
    for (float v : ds.row(i)) s += double(v) * v;
    return std::sqrt(s);
}

double coordinate(const EmbeddingDataset& ds, std::size_t i, const std::vector<double>& dir) {
    double s = 0.0;
    for (std::size_t d = 0; d < dir.size(); ++d) s += double(ds.vectors(i, d)) * dir[d];
    return s;
}

/// SAE whose first features are the planted atoms, scaled/negated/permuted.
TopKSae<double> sae_from_atoms(const PlantedDictionary& dict, std::size_t extra, std::uint64_t seed, bool shuffle) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const std::size_t C = dict.n_atoms() + extra;
    TopKSae<double> sae{RowMatrix<double>(dict.dim(), C), 4, 0.0};
    std::vector<std::size_t> slot(dict.n_atoms());
    std::iota(slot.begin(), slot.end(), std::size_t{0});
    if (shuffle) std::shuffle(slot.begin(), slot.end(), rng);
    for (std::size_t a = 0; a < dict.n_atoms(); ++a) {
        const double scale = shuffle ? (a % 2 ? -2.5 : 0.7) : 1.0;
        for (std::size_t d = 0; d < dict.dim(); ++d) sae.weights(d, slot[a]) = scale * dict.atoms(d, a);
    }
    for (std::size_t c = dict.n_atoms(); c < C; ++c)
        for (std::size_t d = 0; d < dict.dim(); ++d) sae.weights(d, c) = normal(rng);
    return sae;
}

} // namespace

TEST(PlantedDictionary, AtomsAreUnitNorm) {
    auto dict = make_planted_dictionary(32, 64, 4, 1);
    EXPECT_NO_THROW(dict.validate());
    for (std::size_t a = 0; a < 64; ++a) {
        double n = 0.0;
        for (double v : dict.atom(a)) n += v * v;
        EXPECT_NEAR(n, 1.0, 1e-12);
    }
    EXPECT_THROW(make_planted_dictionary(8, 4, 5, 1), InvalidArgument);
}

TEST(PlantedDictionary, ShiftReplacesExactlyTheRequestedAtoms) {
    auto dict = make_planted_dictionary(16, 40, 3, 2);
    auto shifted = shift_dictionary(dict, 12, 3);
    std::size_t changed = 0;
    for (std::size_t a = 0; a < 40; ++a) changed += dict.atom(a) != shifted.atom(a);
    EXPECT_EQ(changed, 12u);
    EXPECT_NO_THROW(shifted.validate());
    EXPECT_THROW(shift_dictionary(dict, 41, 3), InvalidArgument);
}

TEST(DictionaryData, ZeroKIsPureNoise) {
    auto dict = make_planted_dictionary(32, 8, 0, 4);
    auto ds = gen_dictionary_data(dict, 2000, 0.5, 5);
    double mean = 0.0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) mean += row_norm(ds, i) / 2000.0;
    EXPECT_NEAR(mean, kDictionaryNoiseStd * std::sqrt(32.0), 0.1 * kDictionaryNoiseStd * std::sqrt(32.0));
    EXPECT_EQ(ds.meta[0].text, "atoms:");
}

TEST(DictionaryData, FixedSeedIsByteIdentical) {
    auto dict = make_planted_dictionary(16, 32, 3, 6);
    auto a = gen_dictionary_data(dict, 300, 0.9, 7);
    auto b = gen_dictionary_data(dict, 300, 0.9, 7);
    EXPECT_EQ(encode_embeddings(a), encode_embeddings(b));
    EXPECT_EQ(encode_meta(a), encode_meta(b));
    EXPECT_NE(encode_embeddings(gen_dictionary_data(dict, 300, 0.9, 8)), encode_embeddings(a));
    EXPECT_FALSE(a.labels[0].has_value());
}

TEST(DictionaryData, TruthReconstructsEveryRowUpToNoise) {
    auto dict = make_planted_dictionary(32, 64, 4, 9);
    auto data = gen_dictionary_data_with_truth(dict, 1000, 0.9, 10);
    std::size_t active = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const auto& t = data.truth[i];
        ASSERT_LE(t.atom_ids.size(), 4u);
        active += t.atom_ids.size();
        std::string want = "atoms:";
        double resid = 0.0;
        for (std::size_t d = 0; d < 32; ++d) {
            double x = 0.0;
            for (std::size_t j = 0; j < t.atom_ids.size(); ++j) x += t.coefficients[j] * dict.atoms(d, t.atom_ids[j]);
            resid += std::pow(data.dataset.vectors(i, d) - x, 2);
        }
        for (std::size_t j = 0; j < t.atom_ids.size(); ++j) {
            if (j) { EXPECT_LT(t.atom_ids[j - 1], t.atom_ids[j]); }
            EXPECT_GE(t.coefficients[j], 0.5);
            EXPECT_LT(t.coefficients[j], 1.5);
            want += (j ? "," : "") + std::to_string(t.atom_ids[j]);
        }
        // 6 sigma of the chi distribution with 32 degrees of freedom
        EXPECT_LE(std::sqrt(resid), kDictionaryNoiseStd * (std::sqrt(32.0) + 6.0));
        EXPECT_EQ(data.dataset.meta[i].text, want);
    }
    // Bernoulli(0.9) over 4 draws per row
    EXPECT_NEAR(static_cast<double>(active) / 1000.0, 3.6, 0.1);
}

TEST(DictionaryData, TagsFollowTheAtomList) {
    auto sc = make_spurious_scenario(8, 1);
    auto dict = spurious_corpus_dictionary(sc, 10, 2, 2);
    auto data = gen_dictionary_data_with_truth(dict, 500, 0.9, 3);
    bool saw_tag = false;
    for (std::size_t i = 0; i < 500; ++i) {
        for (auto c : data.truth[i].atom_ids) {
            if (c < 4) {
                EXPECT_NE(data.dataset.meta[i].text.find(dict.tags[c]), std::string::npos);
                saw_tag = true;
            }
        }
    }
    EXPECT_TRUE(saw_tag);
}

TEST(RecoveryScore, ExactPermutedAndNegatedAtomsScoreOne) {
    auto dict = make_planted_dictionary(32, 64, 4, 11);
    EXPECT_NEAR(dictionary_recovery_score(sae_from_atoms(dict, 32, 1, false), dict), 1.0, 1e-6);
    EXPECT_NEAR(dictionary_recovery_score(sae_from_atoms(dict, 32, 2, true), dict), 1.0, 1e-6);
}

TEST(RecoveryScore, RandomSaeScoresLow) {
    auto dict = make_planted_dictionary(32, 64, 4, 12);
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        EXPECT_LT(dictionary_recovery_score(init_kaiming<float>(32, 32, 4, seed), dict), 0.5);
    EXPECT_THROW(dictionary_recovery_score(init_kaiming<float>(16, 32, 4, 0), dict), InvalidArgument);
}

TEST(Spurious, FullCorrelationMatchesLabelSign) {
    auto sc = make_spurious_scenario(16, 13);
    sc.train_correlation = 1.0;
    sc.noise_std = 0.0;
    auto data = gen_spurious_data(sc);
    for (std::size_t i = 0; i < data.train.n_rows(); ++i) {
        const double sign = *data.train.labels[i] ? 1.0 : -1.0;
        EXPECT_EQ(coordinate(data.train, i, sc.spurious_dir), sign);
    }
}

TEST(Spurious, HalfCorrelationIsIndependentOfTheLabel) {
    auto sc = make_spurious_scenario(16, 14);
    sc.n_test = 10000;
    auto data = gen_spurious_data(sc);
    // 2x2 contingency: label x sign of the spurious coordinate before noise
    double table[2][2] = {};
    sc.noise_std = 0.0;
    auto clean = gen_spurious_data(sc);
    for (std::size_t i = 0; i < clean.test.n_rows(); ++i)
        table[*clean.test.labels[i]][coordinate(clean.test, i, sc.spurious_dir) > 0] += 1;
    const double n = 10000.0;
    double chi2 = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const double expected = (table[r][0] + table[r][1]) * (table[0][c] + table[1][c]) / n;
            chi2 += std::pow(table[r][c] - expected, 2) / expected;
        }
    EXPECT_LT(chi2, 6.635); // p > 0.01 at one degree of freedom
    EXPECT_EQ(data.test.n_rows(), 10000u);
}

TEST(Spurious, NoiselessSignalProbeIsPerfect) {
    auto sc = make_spurious_scenario(16, 15, true);
    sc.noise_std = 0.0;
    auto data = gen_spurious_data(sc);
    for (std::size_t i = 0; i < data.test.n_rows(); ++i) {
        const bool pos = coordinate(data.test, i, sc.signal_dir) > 0.0;
        EXPECT_EQ(pos, *data.test.labels[i] == 1);
    }
}

TEST(Spurious, SplitsHaveBothClassesAndDisjointIds) {
    auto sc = make_spurious_scenario(8, 16);
    sc.n_train = 40;
    sc.n_test = 30;
    auto data = gen_spurious_data(sc);
    EXPECT_NO_THROW(class_weights(require_labels(data.train)));
    EXPECT_NO_THROW(class_weights(require_labels(data.test)));
    EXPECT_EQ(data.test.meta[0].row_id, 40);
    for (const auto& m : data.train.meta) EXPECT_TRUE(m.text == "SPUR" || m.text == "CLEAN");
}

TEST(Spurious, RandomDirectionsAreOrthonormal) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto sc = make_spurious_scenario(32, seed, true);
        EXPECT_NO_THROW(sc.validate());
    }
    auto sc = make_spurious_scenario(4, 0);
    sc.train_correlation = 1.5;
    EXPECT_THROW(gen_spurious_data(sc), InvalidArgument);
    EXPECT_THROW(make_spurious_scenario(1, 0), InvalidArgument);
}
