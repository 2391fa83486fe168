// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mphcnn/dataset.hpp"
#include "mphcnn/eval.hpp"
#include "mphcnn/pipeline.hpp"
#include "mphcnn/ql.hpp"
#include "mphcnn/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mphcnn;
using namespace mphcnn::testing;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

fs::path scratch(std::string const& name) {
    auto const dir = fs::temp_directory_path() / "mphcnn_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::vector<std::vector<double>> random_matrix(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::vector<std::vector<double>> m(n);
    for (auto& row : m) row = random_values(d, rng, -1.5, 1.5);
    return m;
}

Tensor to_tensor(std::vector<std::vector<double>> const& rows) {
    Tensor t({rows.size(), rows.front().size()});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.at(r, c) = rows[r][c];
    }
    return t;
}

// --- 1 ---------------------------------------------------------------------

Verdict gradient_correctness() {
    auto const start = clock_type::now();
    std::mt19937_64 rng(101);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    std::vector<std::string> flags{""};
    for (auto const& f : AblationFlags::names()) flags.push_back(f);

    double worst = 0.0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        ModelConfig c;
        c.depth = pick(1, 2);
        c.k_word = 2;
        c.k_char = pick(2, 4);
        c.filters = pick(2, 6);
        c.embedding_dim = pick(2, 8);
        c.mlp_hidden = pick(3, 6);
        c.dropout = 0.0;
        c.query_len = pick(2, 5);
        c.doc_len = pick(2, 7);
        c.query_char_len = pick(3, 7);
        c.doc_char_len = pick(3, 7);
        c.url_char_len = pick(3, 7);
        c.word_vocab = pick(6, 10);
        c.char_vocab = pick(6, 10);
        c.seed = i;
        if (!flags[i].empty()) c.ablation.set(flags[i]);
        auto params = init_params(c, rng);
        spread_params(params, rng);
        auto const inst = random_instance(c, rng, static_cast<int>(i % 2));
        worst = std::max(worst, model_gradient_error(params, c, inst));
    }
    double const elapsed = seconds_since(start);
    return {worst < 1e-4 && elapsed < 60.0, std::to_string(flags.size()) + " configs (full + every flag), worst rel err "
                                                + sci(worst) + " (< 1e-4), " + num(elapsed, 1) + " s (< 60 s)"};
}

// --- 2 ---------------------------------------------------------------------

Verdict similarity_oracle_check() {
    std::mt19937_64 rng(202);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    double worst = 0.0;
    std::size_t const trials = 100;
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t const n = pick(1, 7), m = pick(1, 7), d = pick(1, 8);
        auto const q = random_matrix(n, d, rng);
        auto const doc = random_matrix(m, d, rng);
        std::vector<std::uint8_t> doc_mask(m), query_mask(n);
        auto const doc_real = pick(1, m), query_real = pick(1, n);
        for (std::size_t j = 0; j < m; ++j) doc_mask[j] = j < doc_real;
        for (std::size_t i = 0; i < n; ++i) query_mask[i] = i < query_real;
        auto const weights = random_values(n, rng, 0.0, 3.0);
        SimilarityOptions options;
        options.use_weights = t % 4 != 0;
        std::vector<double> oracle_weights = weights;
        if (!options.use_weights) std::fill(oracle_weights.begin(), oracle_weights.end(), 1.0);

        Tape tape;
        auto const out = similarity_features(tape, tape.constant(to_tensor(q)), tape.constant(to_tensor(doc)), doc_mask,
                                             weights, query_mask, options);
        auto const got = tape.value(out).data();
        auto const expected = similarity_oracle(q, doc, doc_mask, oracle_weights, query_mask);
        if (got.size() != expected.size()) return {false, "feature length mismatch on trial " + std::to_string(t)};
        for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - expected[i]));
    }
    return {worst < 1e-12, std::to_string(trials) + " random instances, max abs diff " + sci(worst) + " (< 1e-12)"};
}

// --- 3 ---------------------------------------------------------------------

Verdict mean_pool_identity() {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (std::size_t t = 0; t < 50; ++t) {
        std::size_t const n = 1 + rng() % 6, m = 1 + rng() % 9;
        Tensor s({n, m});
        for (auto& x : s.data()) x = random_values(1, rng, -5.0, 5.0)[0];
        std::vector<std::uint8_t> const mask(m, 1);
        Tape tape;
        auto const mean = pool_rows(tape, softmax_rows_masked(tape, tape.constant(s), mask), mask, pool_kind::mean);
        for (double x : tape.value(mean).data()) worst = std::max(worst, std::abs(x - 1.0 / static_cast<double>(m)));
    }
    return {worst < 1e-12, "50 random softmaxed matrices, max |mean - 1/m| " + sci(worst) + " (< 1e-12)"};
}

// --- 4, 5, 6 ---------------------------------------------------------------

/// Generates a dataset and returns its experiment with the acceptance model settings.
ExperimentConfig experiment(SyntheticConfig const& synthetic, fs::path const& dir) {
    ExperimentConfig seed;
    seed.output_dir = dir;
    auto config = ExperimentConfig::load(cmd_gen_synthetic(synthetic, seed));
    config.model.filters = 16;
    config.model.mlp_hidden = 32;
    config.train.batch_size = 8;
    config.train.patience = 5;
    config.train.max_epochs = 30;
    config.lambda = "none";
    return config;
}

struct Outcome {
    double train_map = 0.0;
    double test_map = 0.0;
    std::size_t epochs = 0;
    double seconds = 0.0;
};

Outcome fit_and_score(ExperimentConfig const& config, Workspace const& ws) {
    auto const start = clock_type::now();
    auto const fitted = fit(config, ws);
    auto const runs = score_test(config, ws, fitted.model, fitted.training.params, fitted.vocab, std::nullopt);
    auto const qrels = Qrels::load(config.test_qrels);
    return {fitted.train_map, evaluate(runs.neural, qrels).map, fitted.training.log.size(), seconds_since(start)};
}

struct TermTask {
    ExperimentConfig config;
    Workspace ws;
    Outcome full;
};

Verdict overfit(TermTask& task) {
    SyntheticConfig synthetic;
    synthetic.mode = synthetic_mode::term;
    task.config = experiment(synthetic, scratch("term"));
    task.ws = load_workspace(task.config);
    task.full = fit_and_score(task.config, task.ws);
    auto const& o = task.full;
    bool const pass = o.train_map >= 0.95 && o.test_map >= 0.80 && o.epochs <= 30 && o.seconds < 300.0;
    return {pass, "train MAP " + num(o.train_map) + " (>= 0.95), held-out MAP " + num(o.test_map) + " (>= 0.80), "
                      + std::to_string(o.epochs) + " epochs (<= 30), " + num(o.seconds, 1) + " s (< 300 s)"};
}

Verdict ablation_direction(TermTask const& task) {
    auto run = [&](std::string const& flag) {
        auto c = task.config;
        c.model.ablation = {};
        c.model.ablation.set(flag);
        return fit_and_score(c, task.ws).test_map;
    };
    double const full = task.full.test_map;
    double const max_drop = full - run("no_max_pool");
    double const word_drop = full - run("no_word_module");
    double const mean_change = std::abs(full - run("no_mean_pool"));
    bool const pass = max_drop >= 0.2 && word_drop >= 0.2 && mean_change < 0.1;
    return {pass, "full MAP " + num(full) + "; - max pooling drops " + num(max_drop) + " (>= 0.2); - word module drops "
                      + num(word_drop) + " (>= 0.2); - mean pooling changes " + num(mean_change) + " (< 0.1)"};
}

Verdict depth_sweep() {
    SyntheticConfig synthetic;
    synthetic.mode = synthetic_mode::bigram;
    synthetic.train_queries = 60;
    auto config = experiment(synthetic, scratch("bigram"));
    config.model.ablation = {};
    config.model.ablation.set("no_all_char");
    auto const ws = load_workspace(config);
    std::vector<double> maps;
    std::string trend;
    for (std::size_t n = 0; n <= 4; ++n) {
        auto c = config;
        c.model.depth = n;
        maps.push_back(fit_and_score(c, ws).test_map);
        trend += (n ? ", " : "") + std::string("N=") + std::to_string(n) + " " + num(maps.back());
    }
    double const gain = maps[4] - maps[0];
    return {gain >= 0.05, "word perspective, " + trend + "; N=4 - N=0 = " + num(gain) + " (>= 0.05)"};
}

// --- 7 ---------------------------------------------------------------------

struct ReferenceMetrics {
    double map = 0.0;
    double p30 = 0.0;
};

/// Metric definitions evaluated directly on raw (doc, score, grade) triples.
ReferenceMetrics reference_metrics(std::map<std::string, std::vector<std::pair<std::string, double>>> const& run,
                                   std::map<std::string, std::map<std::string, int>> const& grades) {
    double ap_sum = 0.0, p_sum = 0.0;
    std::size_t topics = 0;
    for (auto const& [topic, docs] : run) {
        auto const g = grades.find(topic);
        if (g == grades.end()) continue;
        std::size_t total_rel = 0;
        for (auto const& [doc, grade] : g->second) total_rel += grade >= 1;
        if (total_rel == 0) continue;
        auto sorted = docs;
        std::sort(sorted.begin(), sorted.end(), [](auto const& x, auto const& y) {
            return x.second != y.second ? x.second > y.second : x.first < y.first;
        });
        double precision_sum = 0.0;
        std::size_t hits = 0, hits30 = 0;
        for (std::size_t r = 0; r < sorted.size(); ++r) {
            auto const it = g->second.find(sorted[r].first);
            if (it != g->second.end() && it->second >= 1) {
                ++hits;
                precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
                if (r < 30) ++hits30;
            }
        }
        ap_sum += precision_sum / static_cast<double>(total_rel);
        p_sum += static_cast<double>(hits30) / 30.0;
        ++topics;
    }
    return topics == 0 ? ReferenceMetrics{} : ReferenceMetrics{ap_sum / topics, p_sum / topics};
}

Verdict evaluation_oracle() {
    std::mt19937_64 rng(707);
    double worst = 0.0;
    std::size_t const trials = 100;
    for (std::size_t t = 0; t < trials; ++t) {
        std::map<std::string, std::vector<std::pair<std::string, double>>> raw;
        std::map<std::string, std::map<std::string, int>> grades;
        Qrels qrels;
        RankedRun run;
        std::size_t const topics = 1 + rng() % 8;
        for (std::size_t q = 0; q < topics; ++q) {
            auto const qid = "t" + std::to_string(q);
            std::size_t const docs = 1 + rng() % 60;
            std::set<std::string> seen;
            for (std::size_t d = 0; d < docs + 5; ++d) {
                auto const did = "d" + std::to_string(rng() % 1000);
                if (!seen.insert(did).second) continue;
                int const grade = static_cast<int>(rng() % 5 == 0 ? 1 + rng() % 2 : 0);
                if (rng() % 4 != 0) {
                    grades[qid][did] = grade;
                    qrels.set(qid, did, grade);
                }
                if (d < docs) {
                    double const score = static_cast<double>(rng() % 20);  // frequent ties
                    raw[qid].push_back({did, score});
                    run.queries[qid].push_back({did, score});
                }
            }
        }
        run.normalize();
        auto const ref = reference_metrics(raw, grades);
        auto const got = evaluate(run, qrels);
        worst = std::max({worst, std::abs(got.map - ref.map), std::abs(got.p30 - ref.p30)});
    }

    Qrels hand;
    hand.set("h", "R1", 1);
    hand.set("h", "R2", 1);
    hand.set("h", "N", 0);
    std::vector<ScoredDoc> const rnr{{"R1", 3}, {"N", 2}, {"R2", 1}};
    std::vector<ScoredDoc> const perfect{{"R1", 2}, {"R2", 1}};
    std::vector<ScoredDoc> const miss{{"N", 1}};
    bool const hand_ok = *average_precision(rnr, hand, "h") == (1.0 + 2.0 / 3.0) / 2.0
                         && *average_precision(perfect, hand, "h") == 1.0 && *average_precision(miss, hand, "h") == 0.0;
    return {worst < 1e-9 && hand_ok, std::to_string(trials) + " random (run, qrels) instances, max |diff| " + sci(worst)
                                         + " (< 1e-9); AP hand cases " + (hand_ok ? "exact" : "MISMATCH")};
}

// --- 8 ---------------------------------------------------------------------

Verdict significance() {
    std::mt19937_64 rng(808);
    bool identical = true;
    for (std::size_t t = 1; t <= 12; ++t) {
        auto const a = random_values(t, rng, 0.0, 1.0);
        identical = identical && fisher_randomization(a, a, 2000, t) == 1.0;
    }
    std::vector<double> const one_a{0.6}, one_b{0.4};
    bool const single = exhaustive_fisher_p(one_a, one_b) == 1.0 && fisher_randomization(one_a, one_b, 2000, 1) == 1.0;

    std::size_t const iters = 10000;
    double worst_z = 0.0;
    std::normal_distribution<double> noise(0.05, 0.2);
    for (std::size_t t = 2; t <= 12; ++t) {
        auto const b = random_values(t, rng, 0.0, 1.0);
        auto a = b;
        for (auto& x : a) x += noise(rng);
        double const exact = exhaustive_fisher_p(a, b);
        double const sampled = fisher_randomization(a, b, iters, 1000 + t);
        double const se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(iters));
        double const z = se > 0.0 ? std::abs(sampled - exact) / se : (sampled == exact ? 0.0 : 1e9);
        worst_z = std::max(worst_z, z);
    }
    bool const pass = identical && single && worst_z <= 3.0;
    return {pass, std::string("identical runs p = 1: ") + (identical ? "yes" : "NO") + "; T=1 exhaustive p = 1: "
                      + (single ? "yes" : "NO") + "; T=2..12 worst |sampled - exhaustive| = " + num(worst_z, 2)
                      + " SE (<= 3)"};
}

// --- 9 ---------------------------------------------------------------------

Verdict interpolation() {
    std::mt19937_64 rng(909);
    RankedRun nn, lm;
    for (int q = 0; q < 6; ++q) {
        for (int d = 0; d < 15; ++d) {
            auto const qid = "q" + std::to_string(q), did = "d" + std::to_string(d);
            nn.queries[qid].push_back({did, random_values(1, rng, 0.0, 1.0)[0]});
            lm.queries[qid].push_back({did, random_values(1, rng, -12.0, -3.0)[0]});
        }
    }
    nn.normalize();
    lm.normalize();
    auto const at_one = interpolate(nn, lm, 1.0);
    auto const at_zero = interpolate(nn, lm, 0.0);
    double min_tau = 1.0;
    for (auto const& [q, docs] : nn.queries) {
        min_tau = std::min({min_tau, kendall_tau(at_one.queries.at(q), docs),
                            kendall_tau(at_zero.queries.at(q), lm.queries.at(q))});
    }

    RankedRun grid_nn, grid_lm;
    grid_nn.queries["q"] = {{"r", 0.52}, {"x", 1.0}, {"y", 0.0}};
    grid_lm.queries["q"] = {{"r", 5.2}, {"x", 0.0}, {"y", 10.0}};
    grid_nn.normalize();
    grid_lm.normalize();
    Qrels qrels;
    qrels.set("q", "r", 1);
    auto const choice = tune_lambda(grid_nn, grid_lm, qrels);
    bool const pass = min_tau == 1.0 && std::abs(choice.lambda - 0.5) < 1e-12;
    return {pass, "min Kendall tau at lambda endpoints " + num(min_tau) + " (= 1); tuned lambda on 3-doc grid case "
                      + num(choice.lambda, 2) + " (= 0.50)"};
}

// --- 10 --------------------------------------------------------------------

Verdict parameter_accounting() {
    std::vector<std::string> notes;
    bool pass = true;
    auto expect = [&](std::string const& what, std::size_t got, std::size_t want) {
        pass = pass && got == want;
        notes.push_back(what + " " + std::to_string(got) + (got == want ? "" : " != " + std::to_string(want)));
    };

    ModelConfig word;
    word.depth = 1;
    word.filters = 2;
    word.k_word = 2;
    word.embedding_dim = 3;
    word.mlp_hidden = 1;
    word.query_len = 1;
    word.doc_len = 1;
    word.word_vocab = 4;
    word.ablation.no_all_char = true;
    expect("word N=1 F=2 k=2 L=3 conv", param_count(word).conv, 2 * 2 * 3 + 2);

    auto flat = word;
    flat.depth = 0;
    expect("N=0 conv", param_count(flat).conv, 0);
    // features (0+1)*2*1 = 2 -> 2*1 + 1 + 1*2 + 2
    expect("N=0 mlp", param_count(flat).mlp, 7);

    ModelConfig full;
    full.depth = 2;
    full.filters = 3;
    full.k_word = 2;
    full.k_char = 4;
    full.embedding_dim = 5;
    full.mlp_hidden = 4;
    full.query_len = 2;
    full.doc_len = 3;
    full.query_char_len = 3;
    full.doc_char_len = 4;
    full.url_char_len = 4;
    full.word_vocab = 6;
    full.char_vocab = 7;
    // word (3*2*5+3) + (3*2*3+3) = 54; char (3*4*5+3) + (3*4*3+3) = 102
    expect("full N=2 conv", param_count(full).conv, 156);
    // features 3*2*(2+3+3) = 48 -> 48*4 + 4 + 4*2 + 2
    expect("full N=2 mlp", param_count(full).mlp, 206);
    std::mt19937_64 rng(1010);
    auto params = init_params(full, rng);
    std::size_t allocated = 0;
    for (auto const& [name, t] : std::as_const(params).named()) {
        if (name.find("embedding") == std::string::npos) allocated += t->size();
    }
    expect("allocated", allocated, 156 + 206);

    auto grow = full;
    std::vector<std::size_t> conv;
    for (std::size_t n = 2; n <= 8; ++n) {
        grow.depth = n;
        conv.push_back(param_count(grow).conv);
    }
    std::size_t const step = (3 * 2 * 3 + 3) + (3 * 4 * 3 + 3);
    bool linear = true;
    for (std::size_t i = 1; i < conv.size(); ++i) linear = linear && conv[i] - conv[i - 1] == step;
    pass = pass && linear;
    std::string detail;
    for (auto const& n : notes) detail += n + "; ";
    return {pass, detail + "per-layer increment for N=2..8 constant at " + std::to_string(step) + ": "
                      + (linear ? "yes" : "NO")};
}

// --- 11 --------------------------------------------------------------------

std::string slurp(fs::path const& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> pipeline_outputs(fs::path const& dir) {
    SyntheticConfig synthetic;
    synthetic.train_queries = 10;
    synthetic.test_queries = 4;
    synthetic.docs_per_query = 20;
    ExperimentConfig seed;
    seed.output_dir = dir;
    seed.seed = 2024;
    auto config = ExperimentConfig::load(cmd_gen_synthetic(synthetic, seed));
    config.model.depth = 2;
    config.model.filters = 8;
    config.model.mlp_hidden = 16;
    config.train.batch_size = 8;
    config.train.max_epochs = 4;
    config.fisher_iterations = 2000;
    cmd_build_stats(config);
    cmd_train(config);
    auto const runs = cmd_rerank(config);
    auto const report = cmd_evaluate(config, {runs.run, runs.ql_run}, config.test_qrels);
    std::map<std::string, std::string> out{
        {"stats", slurp(config.stats_path())},     {"checkpoint", slurp(config.checkpoint_path())},
        {"run", slurp(runs.run)},                  {"ql run", slurp(runs.ql_run)},
        {"report", slurp(report)},                 {"train log", slurp(config.output_dir / "train_log.tsv")},
    };
    if (runs.interpolated_run) out["interpolated run"] = slurp(*runs.interpolated_run);
    return out;
}

Verdict determinism() {
    auto const a = pipeline_outputs(scratch("determinism_a"));
    auto const b = pipeline_outputs(scratch("determinism_b"));
    std::vector<std::string> differing;
    for (auto const& [name, text] : a) {
        auto it = b.find(name);
        if (it == b.end() || it->second != text || text.empty()) differing.push_back(name);
    }
    std::string names;
    for (auto const& [name, _] : a) names += (names.empty() ? "" : ", ") + name;
    if (differing.empty()) return {true, "two runs byte-identical: " + names};
    std::string bad;
    for (auto const& n : differing) bad += (bad.empty() ? "" : ", ") + n;
    return {false, "differs or empty: " + bad};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        std::function<Verdict()> check;
    };
    TermTask term;
    std::vector<Criterion> const criteria{
        {1, "gradient correctness", gradient_correctness},
        {2, "similarity oracle", similarity_oracle_check},
        {3, "mean-pool identity", mean_pool_identity},
        {4, "overfit on planted terms", [&] { return overfit(term); }},
        {5, "ablation direction", [&] { return ablation_direction(term); }},
        {6, "depth sweep on planted bigrams", depth_sweep},
        {7, "evaluation oracle", evaluation_oracle},
        {8, "significance test", significance},
        {9, "interpolation endpoints", interpolation},
        {10, "parameter accounting", parameter_accounting},
        {11, "determinism", determinism},
    };
    int failures = 0;
    for (auto const& c : criteria) {
        Verdict v;
        try {
            v = c.check();
        } catch (std::exception const& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failures += v.pass ? 0 : 1;
        std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << ": " << v.detail << std::endl;
    }
    std::error_code ec;
    fs::remove_all(fs::temp_directory_path() / "mphcnn_acceptance", ec);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
