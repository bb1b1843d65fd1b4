#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfreg/embedding_store.hpp"
#include "selfreg/error.hpp"
#include "selfreg/matrix.hpp"
#include "selfreg/sae.hpp"

namespace selfreg {

/// Ground-truth sparse dictionary: D x C_true, unit-norm columns.
struct PlantedDictionary {
    RowMatrix<double> atoms;
    std::size_t k_true = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> tags; // optional per-atom words appended to meta text

    std::size_t dim() const noexcept { return atoms.rows(); }
    std::size_t n_atoms() const noexcept { return atoms.cols(); }

    std::vector<double> atom(std::size_t c) const {
        std::vector<double> v(dim());
        for (std::size_t d = 0; d < dim(); ++d) v[d] = atoms(d, c);
        return v;
    }

    void validate() const {
        if (dim() == 0 || n_atoms() == 0) throw InvalidArgument("dictionary must be non-empty");
        if (k_true > n_atoms()) throw InvalidArgument("k_true exceeds the number of atoms");
        if (!tags.empty() && tags.size() != n_atoms()) throw InvalidArgument("tags must be empty or one per atom");
        for (std::size_t c = 0; c < n_atoms(); ++c) {
            double n2 = 0.0;
            for (std::size_t d = 0; d < dim(); ++d) n2 += atoms(d, c) * atoms(d, c);
            if (std::abs(std::sqrt(n2) - 1.0) > 1e-6) throw InvalidArgument("atom " + std::to_string(c) + " is not unit norm");
        }
    }
};

namespace detail {

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double n2 = 0.0;
    while (n2 < 1e-12) {
        n2 = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            n2 += x * x;
        }
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& x : v) x *= inv;
    return v;
}

inline void set_atom(RowMatrix<double>& atoms, std::size_t c, const std::vector<double>& v) {
    for (std::size_t d = 0; d < v.size(); ++d) atoms(d, c) = v[d];
}

inline std::vector<double> unit_axis(std::size_t dim, std::size_t axis) {
    std::vector<double> v(dim, 0.0);
    v[axis] = 1.0;
    return v;
}

} // namespace detail

inline PlantedDictionary make_planted_dictionary(std::size_t dim, std::size_t n_atoms, std::size_t k_true,
                                                 std::uint64_t seed) {
    if (dim == 0 || n_atoms == 0) throw InvalidArgument("dictionary dims must be >= 1");
    if (k_true > n_atoms) throw InvalidArgument("k_true exceeds n_atoms");
    PlantedDictionary dict{RowMatrix<double>(dim, n_atoms), k_true, seed, {}};
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < n_atoms; ++c) detail::set_atom(dict.atoms, c, detail::random_unit(dim, rng));
    return dict;
}

/// Copy of `dict` with `n_replace` randomly chosen atoms redrawn.
inline PlantedDictionary shift_dictionary(const PlantedDictionary& dict, std::size_t n_replace, std::uint64_t seed) {
    if (n_replace > dict.n_atoms()) throw InvalidArgument("n_replace exceeds the number of atoms");
    PlantedDictionary out = dict;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> ids(dict.n_atoms());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < n_replace; ++i) detail::set_atom(out.atoms, ids[i], detail::random_unit(dict.dim(), rng));
    return out;
}

/// Sparse ground truth of one generated row.
struct PlantedRow {
    std::vector<std::uint32_t> atom_ids; // increasing
    std::vector<double> coefficients;
};

struct DictionaryData {
    EmbeddingDataset dataset;
    std::vector<PlantedRow> truth;
};

inline constexpr double kDictionaryNoiseStd = 0.01;

/// Each row draws k_true distinct atoms; each drawn atom is active with
/// probability `activation_prob` and gets a coefficient from U(0.5, 1.5).
/// Isotropic Gaussian noise with std 0.01 is added. Meta text lists the
/// active atoms, e.g. "atoms:3,17,42", followed by the tags of tagged atoms.
inline DictionaryData gen_dictionary_data_with_truth(const PlantedDictionary& dict, std::size_t n,
                                                     double activation_prob, std::uint64_t seed) {
    dict.validate();
    if (!(activation_prob > 0.0 && activation_prob < 1.0)) throw InvalidArgument("activation_prob must be in (0,1)");
    const std::size_t D = dict.dim();
    DictionaryData out;
    auto& ds = out.dataset;
    ds.vectors = RowMatrix<float>(n, D);
    ds.labels.assign(n, std::nullopt);
    ds.meta.reserve(n);
    out.truth.reserve(n);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(0.5, 1.5);
    std::bernoulli_distribution keep(activation_prob);
    std::normal_distribution<double> noise(0.0, kDictionaryNoiseStd);
    std::vector<std::size_t> ids(dict.n_atoms());
    std::vector<double> x(D);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(ids.begin(), ids.end(), std::size_t{0});
        PlantedRow row;
        // partial Fisher-Yates: the first k_true entries become the drawn atoms
        for (std::size_t j = 0; j < dict.k_true; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, ids.size() - 1);
            std::swap(ids[j], ids[pick(rng)]);
        }
        std::vector<std::size_t> drawn(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(dict.k_true));
        std::sort(drawn.begin(), drawn.end());
        for (auto c : drawn) {
            const bool active = keep(rng);
            const double a = coef(rng);
            if (!active) continue;
            row.atom_ids.push_back(static_cast<std::uint32_t>(c));
            row.coefficients.push_back(a);
        }
        std::fill(x.begin(), x.end(), 0.0);
        for (std::size_t j = 0; j < row.atom_ids.size(); ++j)
            for (std::size_t d = 0; d < D; ++d) x[d] += row.coefficients[j] * dict.atoms(d, row.atom_ids[j]);
        for (std::size_t d = 0; d < D; ++d) ds.vectors(i, d) = static_cast<float>(x[d] + noise(rng));

        std::string text = "atoms:";
        for (std::size_t j = 0; j < row.atom_ids.size(); ++j) {
            if (j) text += ',';
            text += std::to_string(row.atom_ids[j]);
        }
        if (!dict.tags.empty())
            for (auto c : row.atom_ids)
                if (!dict.tags[c].empty()) text += " " + dict.tags[c];
        ds.meta.push_back({static_cast<std::int64_t>(i), "synth-dict", std::move(text), 1});
        out.truth.push_back(std::move(row));
    }
    return out;
}

inline EmbeddingDataset gen_dictionary_data(const PlantedDictionary& dict, std::size_t n, double activation_prob,
                                            std::uint64_t seed) {
    return gen_dictionary_data_with_truth(dict, n, activation_prob, seed).dataset;
}

/// Mean over planted atoms of the best absolute cosine against any learned feature.
template <typename Scalar>
double dictionary_recovery_score(const TopKSae<Scalar>& sae, const PlantedDictionary& dict) {
    if (sae.dim() != dict.dim())
        throw InvalidArgument("SAE dim " + std::to_string(sae.dim()) + " != dictionary dim " + std::to_string(dict.dim()));
    std::vector<double> norms(sae.n_features(), 0.0);
    for (std::size_t d = 0; d < sae.dim(); ++d)
        for (std::size_t c = 0; c < sae.n_features(); ++c) {
            const double w = static_cast<double>(sae.weights(d, c));
            norms[c] += w * w;
        }
    for (auto& n : norms) n = std::sqrt(n);
    double total = 0.0;
    std::vector<double> dots(sae.n_features());
    for (std::size_t a = 0; a < dict.n_atoms(); ++a) {
        std::fill(dots.begin(), dots.end(), 0.0);
        for (std::size_t d = 0; d < sae.dim(); ++d) {
            const double v = dict.atoms(d, a);
            for (std::size_t c = 0; c < sae.n_features(); ++c) dots[c] += v * static_cast<double>(sae.weights(d, c));
        }
        double best = 0.0;
        for (std::size_t c = 0; c < sae.n_features(); ++c)
            if (norms[c] > 0.0) best = std::max(best, std::abs(dots[c]) / norms[c]);
        total += best;
    }
    return total / static_cast<double>(dict.n_atoms());
}

// ---------------------------------------------------------------------------
// Spurious-correlation scenario

struct SpuriousScenario {
    std::vector<double> signal_dir;
    std::vector<double> spurious_dir;
    double train_correlation = 0.95;
    double test_correlation = 0.5;
    double noise_std = 0.3;
    std::size_t n_train = 2000;
    std::size_t n_test = 2000;
    std::uint64_t seed = 0;

    std::size_t dim() const noexcept { return signal_dir.size(); }

    void validate() const {
        if (signal_dir.empty() || signal_dir.size() != spurious_dir.size())
            throw InvalidArgument("signal and spurious directions need the same non-zero dim");
        auto norm = [](const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); };
        if (std::abs(norm(signal_dir) - 1.0) > 1e-6 || std::abs(norm(spurious_dir) - 1.0) > 1e-6)
            throw InvalidArgument("directions must be unit vectors");
        if (std::abs(std::inner_product(signal_dir.begin(), signal_dir.end(), spurious_dir.begin(), 0.0)) >= 1e-6)
            throw InvalidArgument("signal and spurious directions must be orthogonal");
        for (double c : {train_correlation, test_correlation})
            if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("correlations must lie in [0,1]");
        if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw InvalidArgument("noise_std must be non-negative");
    }
};

/// Scenario with the default directions: signal = e0, spurious = e1, or a random
/// orthonormal pair when `random_directions` is set.
inline SpuriousScenario make_spurious_scenario(std::size_t dim, std::uint64_t seed, bool random_directions = false) {
    if (dim < 2) throw InvalidArgument("spurious scenario needs dim >= 2");
    SpuriousScenario sc;
    sc.seed = seed;
    if (!random_directions) {
        sc.signal_dir = detail::unit_axis(dim, 0);
        sc.spurious_dir = detail::unit_axis(dim, 1);
        return sc;
    }
    std::mt19937_64 rng(seed ^ 0x5eed'd1e5ULL);
    sc.signal_dir = detail::random_unit(dim, rng);
    for (;;) {
        auto v = detail::random_unit(dim, rng);
        const double p = std::inner_product(v.begin(), v.end(), sc.signal_dir.begin(), 0.0);
        double n2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            v[d] -= p * sc.signal_dir[d];
            n2 += v[d] * v[d];
        }
        if (n2 < 1e-6) continue;
        for (auto& x : v) x /= std::sqrt(n2);
        // a second pass removes what rounding left of the projection
        const double p2 = std::inner_product(v.begin(), v.end(), sc.signal_dir.begin(), 0.0);
        for (std::size_t d = 0; d < dim; ++d) v[d] -= p2 * sc.signal_dir[d];
        sc.spurious_dir = std::move(v);
        return sc;
    }
}

struct SpuriousData {
    EmbeddingDataset train;
    EmbeddingDataset test;
};

namespace detail {

inline EmbeddingDataset spurious_split(const SpuriousScenario& sc, std::size_t n, double correlation,
                                       const std::string& doc_id, std::int64_t first_row_id, std::mt19937_64& rng) {
    const std::size_t D = sc.dim();
    std::bernoulli_distribution coin(0.5), aligned(correlation);
    std::normal_distribution<double> noise(0.0, 1.0);
    EmbeddingDataset ds;
    for (;;) {
        ds.vectors = RowMatrix<float>(n, D);
        ds.labels.assign(n, std::nullopt);
        ds.meta.clear();
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t y = coin(rng) ? 1 : 0;
            n_pos += y;
            const double sign = y ? 1.0 : -1.0;
            const double s = aligned(rng) ? sign : -sign;
            double on_signal = 0.0, on_spurious = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                const double v = sign * sc.signal_dir[d] + s * sc.spurious_dir[d] + sc.noise_std * noise(rng);
                ds.vectors(i, d) = static_cast<float>(v);
            }
            for (std::size_t d = 0; d < D; ++d) {
                on_signal += static_cast<double>(ds.vectors(i, d)) * sc.signal_dir[d];
                on_spurious += static_cast<double>(ds.vectors(i, d)) * sc.spurious_dir[d];
            }
            ds.labels[i] = y;
            ds.meta.push_back({first_row_id + static_cast<std::int64_t>(i), doc_id,
                               std::abs(on_spurious) > std::abs(on_signal) ? "SPUR" : "CLEAN", 1});
        }
        if (n < 16 || (n_pos > 0 && n_pos < n)) return ds;
    }
}

} // namespace detail

/// y ~ Bernoulli(0.5); x = (2y-1) signal + s spurious + noise, where s agrees
/// with the label sign with probability train_correlation (test_correlation on
/// test rows). Rows dominated by the spurious direction carry the text "SPUR",
/// the rest "CLEAN". Test row ids continue after the train ids.
inline SpuriousData gen_spurious_data(const SpuriousScenario& sc) {
    sc.validate();
    std::mt19937_64 rng(sc.seed);
    SpuriousData out;
    out.train = detail::spurious_split(sc, sc.n_train, sc.train_correlation, "synth-spurious-train", 0, rng);
    out.test = detail::spurious_split(sc, sc.n_test, sc.test_correlation, "synth-spurious-test",
                                      static_cast<std::int64_t>(sc.n_train), rng);
    return out;
}

/// Dictionary for a generic corpus around the scenario: +/- signal (tagged
/// TASK+/TASK-), +/- spurious (SPUR+/SPUR-), then `n_random` untagged random
/// unit atoms.
inline PlantedDictionary spurious_corpus_dictionary(const SpuriousScenario& sc, std::size_t n_random,
                                                    std::size_t k_true, std::uint64_t seed) {
    sc.validate();
    PlantedDictionary dict{RowMatrix<double>(sc.dim(), 4 + n_random), k_true, seed, {}};
    dict.tags.assign(4 + n_random, std::string{});
    dict.tags[0] = "TASK+";
    dict.tags[1] = "TASK-";
    dict.tags[2] = "SPUR+";
    dict.tags[3] = "SPUR-";
    std::vector<double> neg(sc.dim());
    detail::set_atom(dict.atoms, 0, sc.signal_dir);
    std::transform(sc.signal_dir.begin(), sc.signal_dir.end(), neg.begin(), std::negate<>());
    detail::set_atom(dict.atoms, 1, neg);
    detail::set_atom(dict.atoms, 2, sc.spurious_dir);
    std::transform(sc.spurious_dir.begin(), sc.spurious_dir.end(), neg.begin(), std::negate<>());
    detail::set_atom(dict.atoms, 3, neg);
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < n_random; ++c) detail::set_atom(dict.atoms, 4 + c, detail::random_unit(sc.dim(), rng));
    dict.validate();
    return dict;
}

// ---------------------------------------------------------------------------
// Manifests written next to generated files

inline nlohmann::ordered_json dictionary_manifest(const PlantedDictionary& dict, std::size_t n, double activation_prob,
                                                  std::uint64_t data_seed) {
    nlohmann::ordered_json j;
    j["kind"] = "dictionary";
    j["dim"] = dict.dim();
    j["n_atoms"] = dict.n_atoms();
    j["k_true"] = dict.k_true;
    j["dictionary_seed"] = dict.seed;
    j["n"] = n;
    j["activation_prob"] = activation_prob;
    j["noise_std"] = kDictionaryNoiseStd;
    j["data_seed"] = data_seed;
    return j;
}

inline nlohmann::ordered_json spurious_manifest(const SpuriousScenario& sc) {
    nlohmann::ordered_json j;
    j["kind"] = "spurious";
    j["dim"] = sc.dim();
    j["signal_dir"] = sc.signal_dir;
    j["spurious_dir"] = sc.spurious_dir;
    j["train_correlation"] = sc.train_correlation;
    j["test_correlation"] = sc.test_correlation;
    j["noise_std"] = sc.noise_std;
    j["n_train"] = sc.n_train;
    j["n_test"] = sc.n_test;
    j["seed"] = sc.seed;
    return j;
}

} // namespace selfreg
