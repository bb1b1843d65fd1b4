// selfreg: command-line front end for the pipeline.
//
// Every subcommand prints one JSON result line on stdout; logs go to stderr.
// Values come from flags, then the --config file (INI, one [section] per
// subcommand), then the built-in defaults.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "selfreg/http_transport.hpp"
#include "selfreg/selfreg.hpp"

using namespace selfreg;
using json = nlohmann::ordered_json;

namespace {

void log(const std::string& msg) { std::cerr << "selfreg: " << msg << '\n'; }

void emit(const json& j) { std::cout << j.dump() << std::endl; }

/// Error raised inside a subcommand, tagged with the stage that failed.
struct StageError : std::runtime_error {
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(what), stage(std::move(stage)) {}
    std::string stage;
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

json history_json(const SaeHistory& h, bool finetuning) {
    json j;
    j["epochs"] = json::array();
    for (const auto& e : h.epochs) {
        json r;
        r["train_loss"] = e.train_loss;
        r["val_loss"] = e.val_loss ? json(*e.val_loss) : json(nullptr);
        if (finetuning) {
            r["n_dead"] = e.n_dead;
            r["nmse"] = e.nmse ? json(*e.nmse) : json(nullptr);
        }
        j["epochs"].push_back(std::move(r));
    }
    if (finetuning) {
        j["initial_n_dead"] = h.initial_n_dead;
        j["final_n_dead"] = h.final_n_dead;
        j["initial_nmse"] = h.initial_nmse ? json(*h.initial_nmse) : json(nullptr);
        j["final_nmse"] = h.final_nmse ? json(*h.final_nmse) : json(nullptr);
    }
    return j;
}

// ---------------------------------------------------------------------------

struct SynthOpts {
    std::string kind = "spurious";
    std::string out_dir;
    std::size_t dim = 32;
    std::uint64_t seed = 0;
    // dictionary
    std::size_t atoms = 64;
    std::size_t k_true = 4;
    std::size_t n = 5000;
    double activation_prob = 0.9;
    std::size_t shift = 0;
    // spurious
    double train_correlation = 0.95;
    double test_correlation = 0.5;
    double noise = 0.3;
    std::size_t n_train = 2000;
    std::size_t n_test = 2000;
    std::size_t corpus_n = 5000;
    std::size_t corpus_random_atoms = 60;
    bool random_directions = false;
};

int run_synth(const SynthOpts& o) {
    namespace fs = std::filesystem;
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    json out{{"command", "synth"}, {"kind", o.kind}};
    if (o.kind == "dictionary") {
        auto dict = stage("synth", [&] { return make_planted_dictionary(o.dim, o.atoms, o.k_true, o.seed); });
        auto data = stage("synth", [&] { return gen_dictionary_data(dict, o.n, o.activation_prob, o.seed + 1); });
        stage("write", [&] {
            write_embeddings(data, (dir / "data.emb").string());
            binary::write_text((dir / "manifest.json").string(),
                               dictionary_manifest(dict, o.n, o.activation_prob, o.seed + 1).dump(2) + "\n");
        });
        out["files"] = {(dir / "data.emb").string()};
        if (o.shift > 0) {
            auto shifted = stage("synth", [&] { return shift_dictionary(dict, o.shift, o.seed + 2); });
            auto b = stage("synth", [&] { return gen_dictionary_data(shifted, o.n, o.activation_prob, o.seed + 3); });
            stage("write", [&] {
                write_embeddings(b, (dir / "shifted.emb").string());
                binary::write_text((dir / "shifted_manifest.json").string(),
                                   dictionary_manifest(shifted, o.n, o.activation_prob, o.seed + 3).dump(2) + "\n");
            });
            out["files"].push_back((dir / "shifted.emb").string());
        }
        log("dictionary: " + std::to_string(o.atoms) + " atoms in " + std::to_string(o.dim) + " dims, " +
            std::to_string(o.n) + " rows");
    } else if (o.kind == "spurious") {
        auto sc = stage("synth", [&] {
            auto s = make_spurious_scenario(o.dim, o.seed, o.random_directions);
            s.train_correlation = o.train_correlation;
            s.test_correlation = o.test_correlation;
            s.noise_std = o.noise;
            s.n_train = o.n_train;
            s.n_test = o.n_test;
            s.validate();
            return s;
        });
        auto data = stage("synth", [&] { return gen_spurious_data(sc); });
        auto corpus = stage("synth", [&] {
            return gen_dictionary_data(spurious_corpus_dictionary(sc, o.corpus_random_atoms, o.k_true, o.seed + 10),
                                       o.corpus_n, o.activation_prob, o.seed + 20);
        });
        stage("write", [&] {
            write_embeddings(data.train, (dir / "train.emb").string());
            write_embeddings(data.test, (dir / "test.emb").string());
            write_embeddings(corpus, (dir / "corpus.emb").string());
            binary::write_text((dir / "manifest.json").string(), spurious_manifest(sc).dump(2) + "\n");
        });
        out["files"] = {(dir / "train.emb").string(), (dir / "test.emb").string(), (dir / "corpus.emb").string()};
        log("spurious: " + std::to_string(o.n_train) + " train / " + std::to_string(o.n_test) + " test rows, corpus " +
            std::to_string(o.corpus_n));
    } else {
        throw StageError("synth", "unknown kind " + o.kind);
    }
    emit(out);
    return 0;
}

// ---------------------------------------------------------------------------

struct PretrainOpts {
    std::string emb, val_emb, out, history;
    std::size_t features = 65536;
    std::size_t k = 20;
    double l1 = 0.0;
    double lr = 1e-3;
    std::size_t batch = 512;
    std::size_t epochs = 5;
    double weight_decay = 0.0;
    bool unsquared = false;
    std::uint64_t seed = 0;
};

int run_pretrain(const PretrainOpts& o) {
    SaeTrainConfig cfg;
    cfg.optimizer.learning_rate = o.lr;
    cfg.optimizer.weight_decay = o.weight_decay;
    cfg.batch_size = o.batch;
    cfg.epochs = o.epochs;
    cfg.seed = o.seed;
    cfg.norm = o.unsquared ? ReconstructionNorm::euclidean : ReconstructionNorm::squared;
    stage("config", [&] { cfg.validate(); });
    log("pretrain: features=" + std::to_string(o.features) + " k=" + std::to_string(o.k) +
        " lr=" + json(o.lr).dump() + " batch=" + std::to_string(o.batch) + " epochs=" + std::to_string(o.epochs));

    auto train = stage("read", [&] { return read_embeddings(o.emb); });
    EmbeddingDataset val;
    if (!o.val_emb.empty()) val = stage("read", [&] { return read_embeddings(o.val_emb); });
    auto sae = stage("init", [&] { return init_kaiming<float>(train.dim(), o.features, o.k, o.seed, o.l1); });
    auto res = stage("pretrain", [&] { return pretrain(std::move(sae), train, val, cfg); });
    for (std::size_t e = 0; e < res.history.epochs.size(); ++e)
        log("epoch " + std::to_string(e + 1) + " train_loss " + json(res.history.epochs[e].train_loss).dump());

    const std::string hist_path = o.history.empty() ? o.out + ".history.json" : o.history;
    const auto hist = history_json(res.history, false);
    stage("write", [&] {
        write_sae(res.sae, o.out);
        binary::write_text(hist_path, hist.dump(2) + "\n");
    });
    emit({{"command", "pretrain"},
          {"sae", o.out},
          {"history", hist_path},
          {"sha256", to_hex(sae_digest(res.sae))},
          {"final_train_loss", res.history.epochs.back().train_loss}});
    return 0;
}

// ---------------------------------------------------------------------------

struct FinetuneOpts {
    std::string sae, emb, val_emb, out, history, preset;
    double alpha = 0.1;
    std::size_t dead_k = 20;
    double lr = 5e-5;
    std::size_t batch = 512;
    std::size_t epochs = 5;
    double val_frac = 0.0;
    double weight_decay = 0.0;
    bool unsquared = false;
    std::uint64_t seed = 0;
};

int run_finetune(const FinetuneOpts& o) {
    SaeTrainConfig cfg;
    cfg.optimizer.learning_rate = o.lr;
    cfg.optimizer.weight_decay = o.weight_decay;
    cfg.batch_size = o.batch;
    cfg.epochs = o.epochs;
    cfg.alpha = o.alpha;
    cfg.dead_k = o.dead_k;
    cfg.seed = o.seed;
    cfg.norm = o.unsquared ? ReconstructionNorm::euclidean : ReconstructionNorm::squared;
    stage("config", [&] {
        cfg.validate();
        if (o.val_frac < 0.0 || o.val_frac >= 1.0) throw InvalidArgument("val-frac must be in [0,1)");
        if (o.val_frac > 0.0 && !o.val_emb.empty()) throw InvalidArgument("use either --val-emb or --val-frac");
    });
    log("finetune: alpha=" + json(o.alpha).dump() + " dead_k=" + std::to_string(o.dead_k) + " lr=" + json(o.lr).dump() +
        " batch=" + std::to_string(o.batch) + " epochs=" + std::to_string(o.epochs));

    auto sae = stage("read", [&] { return read_sae(o.sae); });
    auto train = stage("read", [&] { return read_embeddings(o.emb); });
    EmbeddingDataset val;
    if (!o.val_emb.empty()) val = stage("read", [&] { return read_embeddings(o.val_emb); });
    if (o.val_frac > 0.0) {
        auto split = stage("split", [&] { return random_split(train, o.val_frac, o.seed); });
        train = std::move(split.train);
        val = std::move(split.val);
    }
    auto res = stage("finetune", [&] { return finetune(std::move(sae), train, val, cfg); });
    for (std::size_t e = 0; e < res.history.epochs.size(); ++e) {
        const auto& r = res.history.epochs[e];
        log("epoch " + std::to_string(e + 1) + " n_dead " + std::to_string(r.n_dead) + " nmse " +
            (r.nmse ? json(*r.nmse).dump() : "null"));
    }

    const std::string hist_path = o.history.empty() ? o.out + ".history.json" : o.history;
    const auto hist = history_json(res.history, true);
    stage("write", [&] {
        write_sae(res.sae, o.out);
        binary::write_text(hist_path, hist.dump(2) + "\n");
    });
    json n_dead = json::array(), nmse = json::array();
    for (const auto& r : res.history.epochs) {
        n_dead.push_back(r.n_dead);
        nmse.push_back(r.nmse ? json(*r.nmse) : json(nullptr));
    }
    emit({{"command", "finetune"},
          {"sae", o.out},
          {"history", hist_path},
          {"sha256", to_hex(sae_digest(res.sae))},
          {"n_dead", n_dead},
          {"nmse", nmse},
          {"initial_n_dead", res.history.initial_n_dead},
          {"final_n_dead", res.history.final_n_dead}});
    return 0;
}

// ---------------------------------------------------------------------------

struct ExplainOpts {
    std::string sae, emb, out;
    std::size_t top_m = 10;
    std::uint64_t seed = 0;
};

int run_explain(const ExplainOpts& o) {
    auto sae = stage("read", [&] { return read_sae(o.sae); });
    auto ds = stage("read", [&] { return read_embeddings(o.emb); });
    auto expl = stage("explain", [&] { return explain_all(sae, ds, o.top_m); });
    stage("write", [&] { write_features(expl, o.out); });
    std::size_t silent = 0;
    for (const auto& e : expl) silent += e.spans.empty();
    log("explained " + std::to_string(expl.size()) + " features, " + std::to_string(silent) + " never active");
    emit({{"command", "explain"}, {"features", o.out}, {"n_features", expl.size()}, {"n_never_active", silent}});
    return 0;
}

// ---------------------------------------------------------------------------

struct JudgeOpts {
    std::string features, rubric, stub, endpoint, model, transcripts, out, unintended_out;
    std::string threshold = "yes";
    double temperature = 0.0;
    std::size_t max_tokens = 1024;
    std::size_t max_retries = 3;
    std::size_t max_concurrent = 4;
    std::size_t backoff_ms = 1000;
    std::size_t timeout_s = 120;
    std::uint64_t seed = 0;
};

int run_judge(const JudgeOpts& o) {
    if (o.stub.empty() == o.endpoint.empty())
        throw StageError("config", "give exactly one of --stub or --endpoint");
    if (!o.endpoint.empty() && o.model.empty()) throw StageError("config", "--endpoint needs --model");

    const std::string rubric = stage("read", [&] { return binary::read_text(o.rubric); });
    if (rubric.find_first_not_of(" \t\r\n") == std::string::npos) throw StageError("read", "rubric is empty");
    const std::string digest = to_hex(sha256(rubric));
    auto expl = stage("read", [&] { return read_features(o.features); });

    std::vector<JudgeVerdict> verdicts;
    if (!o.stub.empty()) {
        auto client = stage("stub", [&] { return load_stub_rules(o.stub); });
        log("judge: stub rules from " + o.stub + " (" + std::to_string(client.rules().size()) + " rules)");
        verdicts = stage("judge", [&] { return judge_all(client, expl, rubric, o.max_concurrent); });
    } else {
        const char* key = std::getenv(kJudgeApiKeyEnv);
        if (!key || !*key) log(std::string("judge: ") + kJudgeApiKeyEnv + " is not set, sending no credential");
        JudgeClientConfig jc;
        jc.endpoint_url = o.endpoint;
        jc.model_name = o.model;
        jc.temperature = o.temperature;
        jc.max_response_tokens = o.max_tokens;
        jc.max_retries = o.max_retries;
        jc.max_concurrent_requests = o.max_concurrent;
        jc.initial_backoff = std::chrono::milliseconds(o.backoff_ms);
        auto transport = stage("config", [&] {
            return std::make_unique<HttpChatTransport>(o.endpoint, key ? key : "", std::chrono::seconds(o.timeout_s));
        });
        const std::string dir = o.transcripts.empty() ? o.out + ".transcripts" : o.transcripts;
        log("judge: " + o.model + " at " + o.endpoint + ", transcripts in " + dir);
        auto client = stage("config", [&] { return std::make_unique<ChatJudgeClient>(*transport, jc, TranscriptStore(dir)); });
        verdicts = stage("judge", [&] { return judge_all(*client, expl, rubric, o.max_concurrent); });
    }
    const auto threshold = o.threshold == "probably" ? RelevanceLevel::Probably : RelevanceLevel::Yes;
    const auto unintended = identify_unintended(verdicts, threshold, digest);
    const std::string uout = o.unintended_out.empty() ? o.out + ".unintended.json" : o.unintended_out;
    stage("write", [&] {
        write_verdicts(verdicts, o.out);
        write_unintended(unintended, uout);
    });
    std::size_t verified = 0;
    for (const auto& v : verdicts) verified += v.verified;
    log("judge: " + std::to_string(verified) + " of " + std::to_string(verdicts.size()) + " verified, " +
        std::to_string(unintended.feature_ids.size()) + " unintended");
    emit({{"command", "judge"},
          {"verdicts", o.out},
          {"unintended", uout},
          {"threshold", to_string(threshold)},
          {"n_verified", verified},
          {"unintended_ids", unintended.feature_ids}});
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainClfOpts {
    std::string emb, sae, unintended, out;
    double beta = 3.0;
    double val_frac = 0.2;
    std::size_t max_epochs = 50;
    std::size_t batch = 32;
    std::uint64_t seed = 0;
};

int run_train_clf(const TrainClfOpts& o) {
    ClfTrainConfig cfg;
    cfg.beta = o.beta;
    cfg.max_epochs = o.max_epochs;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    stage("config", [&] {
        cfg.validate();
        if (o.unintended.empty() != o.sae.empty())
            throw InvalidArgument("--sae and --unintended go together");
    });
    auto ds = stage("read", [&] { return read_embeddings(o.emb); });
    LogisticClassifier skeleton;
    RowMatrix<double> wm(ds.dim(), 0);
    if (!o.sae.empty()) {
        auto sae = stage("read", [&] { return read_sae(o.sae); });
        auto set = stage("read", [&] { return read_unintended(o.unintended); });
        wm = stage("purify", [&] { return unintended_columns(sae, set.feature_ids); });
        skeleton.unintended_ids = set.feature_ids;
        skeleton.sae_digest = sae_digest(sae);
    }
    auto split = stage("split", [&] { return split_dataset(ds, o.val_frac, o.seed); });
    auto res = stage("train", [&] { return train_classifier(split.train, split.val, wm, cfg); });
    auto clf = res.classifier;
    clf.unintended_ids = skeleton.unintended_ids;
    clf.sae_digest = skeleton.sae_digest;
    stage("write", [&] { write_classifier(clf, o.out); });
    log("train-clf: best lr " + json(res.best_lr).dump() + " at epoch " + std::to_string(res.best_epoch) +
        ", val accuracy " + json(res.val_report.accuracy).dump());
    emit({{"command", "train-clf"},
          {"classifier", o.out},
          {"best_lr", res.best_lr},
          {"best_epoch", res.best_epoch},
          {"val_accuracy", res.val_report.accuracy},
          {"val_f1", res.val_report.f1_positive},
          {"penalty_l1", res.val_report.penalty_l1},
          {"n_unintended", wm.cols()}});
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string clf, emb, sae;
    double threshold = 0.5;
    std::uint64_t seed = 0;
};

int run_eval(const EvalOpts& o) {
    auto clf = stage("read", [&] { return read_classifier(o.clf); });
    auto ds = stage("read", [&] { return read_embeddings(o.emb); });
    RowMatrix<double> wm(ds.dim(), 0);
    if (!clf.unintended_ids.empty()) {
        if (o.sae.empty()) throw StageError("config", "classifier purifies with an SAE, pass it with --sae");
        auto sae = stage("read", [&] { return read_sae(o.sae); });
        if (sae_digest(sae) != clf.sae_digest) throw StageError("eval", "SAE does not match the one used in training");
        wm = stage("purify", [&] { return unintended_columns(sae, clf.unintended_ids); });
    }
    auto r = stage("eval", [&] { return evaluate(clf, ds, wm, o.threshold); });
    emit({{"command", "eval"},
          {"accuracy", r.accuracy},
          {"f1_positive", r.f1_positive},
          {"n_eval", r.n_eval},
          {"penalty_l1", r.penalty_l1}});
    return 0;
}

// ---------------------------------------------------------------------------

struct SampleSizeOpts {
    double p = 1.0;
    double confidence = 0.95;
    double rel_margin = 0.1;
    double sigma = 1.0;
    bool exact_z = false;
    std::uint64_t seed = 0;
};

int run_sample_size(const SampleSizeOpts& o) {
    SampleSizeQuery q;
    q.activation_prob = o.p;
    q.confidence = o.confidence;
    q.rel_margin = o.rel_margin;
    q.sigma = o.sigma;
    const ZMode mode = o.exact_z ? ZMode::exact : ZMode::two_decimals;
    stage("sample-size", [&] { q.validate(); });
    emit({{"z", z_for(q, mode)}, {"n_normal", n_normal(q, mode)}, {"n_sparse", n_sparse(q, mode)}});
    return 0;
}

// ---------------------------------------------------------------------------

/// Resolved values of a subcommand's options (flag, config or default).
json resolved(const CLI::App& sub) {
    json j;
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name.empty()) continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            j[name] = opt->get_expected_max() == 0 ? json(true) : json(r.back());
        } else {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"selfreg: sparse autoencoders, feature judging and purified classifiers"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI file with one [section] per subcommand");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.option_defaults()->always_capture_default();
    bool print_config = false;
    app.add_flag("--print-config", print_config, "print the resolved options as JSON and exit");

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "generate synthetic datasets");
    synth->add_option("--kind", so.kind)->check(CLI::IsMember({"dictionary", "spurious"}));
    synth->add_option("--out-dir", so.out_dir)->required();
    synth->add_option("--dim", so.dim);
    synth->add_option("--atoms", so.atoms);
    synth->add_option("--k-true", so.k_true);
    synth->add_option("--n", so.n);
    synth->add_option("--activation-prob", so.activation_prob);
    synth->add_option("--shift", so.shift, "also write a dataset from a dictionary with this many atoms replaced");
    synth->add_option("--train-correlation", so.train_correlation);
    synth->add_option("--test-correlation", so.test_correlation);
    synth->add_option("--noise", so.noise);
    synth->add_option("--n-train", so.n_train);
    synth->add_option("--n-test", so.n_test);
    synth->add_option("--corpus-n", so.corpus_n);
    synth->add_option("--corpus-random-atoms", so.corpus_random_atoms);
    synth->add_flag("--random-directions", so.random_directions);
    synth->add_option("--seed", so.seed);

    PretrainOpts po;
    auto* pre = app.add_subcommand("pretrain", "train a Top-K SAE");
    pre->add_option("--emb", po.emb)->required();
    pre->add_option("--val-emb", po.val_emb);
    pre->add_option("--out", po.out)->required();
    pre->add_option("--history", po.history);
    pre->add_option("--features", po.features);
    pre->add_option("--k", po.k);
    pre->add_option("--l1", po.l1);
    pre->add_option("--lr", po.lr);
    pre->add_option("--batch", po.batch);
    pre->add_option("--epochs", po.epochs);
    pre->add_option("--weight-decay", po.weight_decay);
    pre->add_flag("--unsquared", po.unsquared, "plain Euclidean reconstruction error");
    pre->add_option("--seed", po.seed);

    FinetuneOpts fo;
    auto* ft = app.add_subcommand("finetune", "fine-tune an SAE with the residual loss");
    ft->add_option("--sae", fo.sae)->required();
    ft->add_option("--emb", fo.emb)->required();
    ft->add_option("--val-emb", fo.val_emb);
    ft->add_option("--val-frac", fo.val_frac);
    ft->add_option("--out", fo.out)->required();
    ft->add_option("--history", fo.history);
    ft->add_option("--preset", fo.preset, "small: 40 epochs, batch 8, lr 3e-6")
                          ->check(CLI::IsMember({"small"}));
    ft->add_option("--alpha", fo.alpha);
    ft->add_option("--dead-k", fo.dead_k);
    auto* ft_lr = ft->add_option("--lr", fo.lr);
    auto* ft_batch = ft->add_option("--batch", fo.batch);
    auto* ft_epochs = ft->add_option("--epochs", fo.epochs);
    ft->add_option("--weight-decay", fo.weight_decay);
    ft->add_flag("--unsquared", fo.unsquared);
    ft->add_option("--seed", fo.seed);

    ExplainOpts eo;
    auto* ex = app.add_subcommand("explain", "top activating spans per feature");
    ex->add_option("--sae", eo.sae)->required();
    ex->add_option("--emb", eo.emb)->required();
    ex->add_option("--out", eo.out)->required();
    ex->add_option("--top-m", eo.top_m);
    ex->add_option("--seed", eo.seed);

    JudgeOpts jo;
    auto* jd = app.add_subcommand("judge", "summarize, verify and rate features");
    jd->add_option("--features", jo.features)->required();
    jd->add_option("--rubric", jo.rubric, "text file with the task rubric")->required();
    jd->add_option("--out", jo.out)->required();
    jd->add_option("--unintended-out", jo.unintended_out);
    jd->add_option("--stub", jo.stub, "offline rule table (JSON)");
    jd->add_option("--endpoint", jo.endpoint, "chat completion URL");
    jd->add_option("--model", jo.model);
    jd->add_option("--transcripts", jo.transcripts);
    jd->add_option("--threshold", jo.threshold, "lowest relevance that still counts as intended")
        ->check(CLI::IsMember({"yes", "probably"}));
    jd->add_option("--temperature", jo.temperature);
    jd->add_option("--max-tokens", jo.max_tokens);
    jd->add_option("--max-retries", jo.max_retries);
    jd->add_option("--max-concurrent", jo.max_concurrent);
    jd->add_option("--backoff-ms", jo.backoff_ms);
    jd->add_option("--timeout", jo.timeout_s, "seconds");
    jd->add_option("--seed", jo.seed);

    TrainClfOpts to;
    auto* tc = app.add_subcommand("train-clf", "train a purified, penalized logistic classifier");
    tc->add_option("--emb", to.emb)->required();
    tc->add_option("--out", to.out)->required();
    tc->add_option("--sae", to.sae);
    tc->add_option("--unintended", to.unintended);
    tc->add_option("--beta", to.beta);
    tc->add_option("--val-frac", to.val_frac);
    tc->add_option("--max-epochs", to.max_epochs);
    tc->add_option("--batch", to.batch);
    tc->add_option("--seed", to.seed);

    EvalOpts vo;
    auto* ev = app.add_subcommand("eval", "accuracy and F1 on a labeled set");
    ev->add_option("--clf", vo.clf)->required();
    ev->add_option("--emb", vo.emb)->required();
    ev->add_option("--sae", vo.sae);
    ev->add_option("--threshold", vo.threshold);
    ev->add_option("--seed", vo.seed);

    SampleSizeOpts ss;
    auto* sz = app.add_subcommand("sample-size", "rows needed to see a feature often enough");
    sz->add_option("--p", ss.p, "activation probability");
    sz->add_option("--confidence", ss.confidence);
    sz->add_option("--rel-margin", ss.rel_margin);
    sz->add_option("--sigma", ss.sigma);
    sz->add_flag("--exact-z", ss.exact_z, "use the unrounded quantile");
    sz->add_option("--seed", ss.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (ft->parsed() && fo.preset == "small") {
        if (ft_epochs->count() == 0) fo.epochs = 40;
        if (ft_batch->count() == 0) fo.batch = 8;
        if (ft_lr->count() == 0) fo.lr = 3e-6;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (print_config) {
        auto j = resolved(*sub);
        if (sub == ft) {
            j["epochs"] = std::to_string(fo.epochs);
            j["batch"] = std::to_string(fo.batch);
            j["lr"] = json(fo.lr).dump();
        }
        emit({{"command", sub->get_name()}, {"options", j}});
        return 0;
    }

    try {
        if (sub == synth) return run_synth(so);
        if (sub == pre) return run_pretrain(po);
        if (sub == ft) return run_finetune(fo);
        if (sub == ex) return run_explain(eo);
        if (sub == jd) return run_judge(jo);
        if (sub == tc) return run_train_clf(to);
        if (sub == ev) return run_eval(vo);
        if (sub == sz) return run_sample_size(ss);
    } catch (const StageError& e) {
        log(sub->get_name() + " failed at " + e.stage + ": " + e.what());
        return 1;
    } catch (const std::exception& e) {
        log(sub->get_name() + " failed: " + e.what());
        return 1;
    }
    return 1;
}
