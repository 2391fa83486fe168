#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mphcnn/dataset.hpp"
#include "mphcnn/error.hpp"
#include "mphcnn/pipeline.hpp"
#include "mphcnn/synthetic.hpp"
#include "support.hpp"

using namespace mphcnn;
using namespace mphcnn::testing;

namespace {

SyntheticConfig small_synthetic() {
    SyntheticConfig s;
    s.seed = 11;
    s.train_queries = 8;
    s.test_queries = 3;
    s.docs_per_query = 12;
    s.relevant_per_query = 3;
    s.filler_vocab = 80;
    s.embedding_dim = 6;
    return s;
}

/// A generated dataset with a model small enough to train in well under a second.
ExperimentConfig small_experiment(TempDir const& dir) {
    ExperimentConfig seed;
    seed.output_dir = dir.path();
    auto const ini = cmd_gen_synthetic(small_synthetic(), seed);
    auto config = ExperimentConfig::load(ini);
    config.set("model.depth", "1");
    config.set("model.filters", "4");
    config.set("model.mlp_hidden", "6");
    config.set("model.dropout", "0");
    config.set("train.max_epochs", "3");
    config.set("train.batch_size", "8");
    config.set("experiment.fisher_iterations", "200");
    return config;
}

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run_cli(std::string const& args, TempDir const& dir) {
    auto const log = dir / "cli.log";
    auto const cmd = std::string("\"") + MPHCNN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    int const status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(log)};
}

std::vector<std::string> lines(std::string const& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

std::vector<std::string> order_of(RankedRun const& run, std::string const& q) {
    std::vector<std::string> ids;
    for (auto const& d : run.queries.at(q)) {
        ids.push_back(d.doc_id);
    }
    return ids;
}

}  // namespace

TEST_CASE("config load resolves paths and rejects unknown keys") {
    TempDir dir("config");
    write_file(dir / "e.ini",
               "[data]\ncorpus = c.tsv\n\n[model]\ndepth = 2\nablation = no_idf\n\n[ql]\n\n"
               "[experiment]\nlambda = 0.25\noutput_dir = /tmp/abs\n");
    auto const c = ExperimentConfig::load(dir / "e.ini");
    CHECK(c.corpus == dir / "c.tsv");
    CHECK(c.model.depth == 2);
    CHECK(c.model.ablation.no_idf);
    CHECK(c.lambda == "0.25");
    CHECK(c.output_dir == "/tmp/abs");

    c.save(dir / "again.ini");
    auto const again = ExperimentConfig::load(dir / "again.ini");
    CHECK(again.corpus == c.corpus);
    CHECK(again.model == c.model);
    CHECK(again.lambda == c.lambda);

    ExperimentConfig x;
    try {
        x.set("model.depht", "3");
        FAIL("expected config_error");
    } catch (config_error const& e) {
        CHECK(std::string(e.what()).find("model.depth") != std::string::npos);
    }
    CHECK_THROWS_AS(x.set("model.depth", "-1"), config_error);
    CHECK_THROWS_AS(x.set("experiment.lambda", "2"), config_error);
    CHECK_THROWS_AS(x.set("model.ablation", "no_such_flag"), config_error);

    write_file(dir / "loose.ini", "depth = 3\n");
    CHECK_THROWS_AS(ExperimentConfig::load(dir / "loose.ini"), config_error);
    CHECK_THROWS_AS(ExperimentConfig::load(dir / "missing.ini"), data_error);
}

TEST_CASE("build-stats on a two-document corpus") {
    TempDir dir("build_stats");
    write_file(dir / "c.tsv", "d1\ta b\t\nd2\ta\t\n");
    ExperimentConfig c;
    c.corpus = dir / "c.tsv";
    c.output_dir = dir / "out";
    auto const path = cmd_build_stats(c);
    auto const stats = CollectionStats::load(path);
    CHECK(stats.num_docs() == 2);
    CHECK(stats.total_terms() == 3);
    token_list const a{"a"};
    token_list const b{"b"};
    token_list const ab{"a", "b"};
    CHECK(stats.df(gram_kind::word, a) == 2);
    CHECK(stats.df(gram_kind::word, b) == 1);
    CHECK(stats.df(gram_kind::word, ab) == 1);
    CHECK(stats.cf("a") == 2);

    auto const first = read_file(path);
    cmd_build_stats(c);
    CHECK(read_file(path) == first);
}

TEST_CASE("cli exit codes") {
    TempDir dir("cli");
    CHECK(run_cli("", dir).code == 1);
    CHECK(run_cli("frobnicate", dir).code == 1);
    CHECK(run_cli("train --set model.depht=2", dir).code == 1);

    auto const missing = (dir / "nowhere.tsv").string();
    auto const r = run_cli("build-stats --corpus \"" + missing + "\" --output-dir \"" + (dir / "o").string() + "\"", dir);
    CHECK(r.code == 2);
    CHECK(r.output.find(missing) != std::string::npos);

    write_file(dir / "c.tsv", "d1\tnews today\t\n");
    auto const ok = run_cli("build-stats --corpus \"" + (dir / "c.tsv").string() + "\" --output-dir \""
                                + (dir / "o").string() + "\"",
                            dir);
    CHECK(ok.code == 0);
    CHECK(std::filesystem::exists(dir / "o" / "stats.tsv"));
}

TEST_CASE("cli runs the full chain on a generated dataset") {
    TempDir dir("cli_chain");
    auto const d = dir.path().string();
    auto const flags = " --set model.depth=1 --set model.filters=4 --set model.mlp_hidden=6 --set train.max_epochs=2";
    REQUIRE(run_cli("--output-dir \"" + d + "\" gen-synthetic --train-queries 6 --test-queries 2 --docs-per-query 10",
                    dir)
                .code
            == 0);
    auto const ini = " --config \"" + d + "/experiment.ini\"";
    REQUIRE(run_cli(ini + " build-stats", dir).code == 0);
    REQUIRE(run_cli(ini + flags + " train", dir).code == 0);
    REQUIRE(run_cli(ini + " rerank", dir).code == 0);
    auto const eval = run_cli(ini + " evaluate \"" + d + "/work/mphcnn.run\" \"" + d + "/work/ql.run\"", dir);
    REQUIRE(eval.code == 0);
    auto const report = read_file(dir / "work" / "evaluation.txt");
    CHECK(report.find("run\ttopics\tmap\tp30") != std::string::npos);
    CHECK(report.find("p_value") != std::string::npos);
}

TEST_CASE("rerank of one query with three candidates") {
    TempDir dir("rerank3");
    auto config = small_experiment(dir);
    cmd_build_stats(config);
    cmd_train(config);

    auto const test = RankedRun::load(config.test_run);
    auto const& [qid, docs] = *test.queries.begin();
    std::ostringstream three;
    for (std::size_t i = 0; i < 3; ++i) {
        three << qid << " Q0 " << docs[i].doc_id << ' ' << i + 1 << ' ' << 3 - i << " x\n";
    }
    write_file(dir / "three.run", three.str());
    config.test_run = dir / "three.run";
    auto const summary = cmd_rerank(config);
    auto const rows = lines(read_file(summary.run));
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        std::istringstream f(rows[i]);
        std::string q, q0, doc;
        std::size_t rank = 0;
        f >> q >> q0 >> doc >> rank;
        CHECK(q == qid);
        CHECK(rank == i + 1);
    }
}

TEST_CASE("lambda endpoints in rerank, lambda none, and vocabulary hash checks") {
    TempDir dir("rerank_lambda");
    auto config = small_experiment(dir);
    cmd_build_stats(config);
    cmd_train(config);

    config.set("experiment.lambda", "1");
    auto const one = cmd_rerank(config);
    REQUIRE(one.interpolated_run);
    auto const nn = RankedRun::load(one.run);
    auto const interp = RankedRun::load(*one.interpolated_run);
    for (auto const& [q, docs] : nn.queries) {
        CHECK(kendall_tau(docs, interp.queries.at(q)) == 1.0);
    }

    config.set("experiment.lambda", "0");
    auto const zero = cmd_rerank(config);
    auto const ql = RankedRun::load(zero.ql_run);
    auto const at_zero = RankedRun::load(*zero.interpolated_run);
    for (auto const& [q, docs] : ql.queries) {
        CHECK(order_of(ql, q) == order_of(at_zero, q));
    }

    config.set("experiment.lambda", "none");
    CHECK_FALSE(cmd_rerank(config).interpolated_run.has_value());

    auto vocab = Vocabulary::load(config.output_dir / "word.vocab");
    Vocabulary changed(vocab.kind(), vocab.embedding_dim());
    for (std::size_t id = 2; id < vocab.size(); ++id) {
        changed.add(vocab.token(static_cast<int>(id)));
    }
    changed.add("an-extra-token");
    changed.save(config.output_dir / "word.vocab");
    try {
        cmd_rerank(config);
        FAIL("expected data_error");
    } catch (data_error const& e) {
        CHECK(std::string(e.what()).find("refusing to score") != std::string::npos);
    }
}

TEST_CASE("training is reproducible end to end") {
    TempDir a("repro_a");
    TempDir b("repro_b");
    auto ca = small_experiment(a);
    auto cb = small_experiment(b);
    for (auto* c : {&ca, &cb}) {
        cmd_build_stats(*c);
        cmd_train(*c);
        cmd_rerank(*c);
    }
    CHECK(read_file(ca.output_dir / "model.ckpt") == read_file(cb.output_dir / "model.ckpt"));
    CHECK(read_file(ca.output_dir / "train_log.tsv") == read_file(cb.output_dir / "train_log.tsv"));
    CHECK(read_file(ca.output_dir / "mphcnn.run") == read_file(cb.output_dir / "mphcnn.run"));
}

TEST_CASE("training fails when qrels cover none of the run") {
    TempDir dir("noqrels");
    auto config = small_experiment(dir);
    write_file(dir / "empty_qrels.txt", "zz 0 nothing 1\n");
    config.train_qrels = dir / "empty_qrels.txt";
    CHECK_THROWS_AS(cmd_train(config), data_error);
}

TEST_CASE("evaluate reports perfect runs and identical pairs") {
    TempDir dir("evaluate");
    write_file(dir / "qrels.txt", "t1 0 a 1\nt1 0 b 0\nt1 0 c 2\nt2 0 d 1\nt2 0 e 0\nt3 0 f 0\n");
    write_file(dir / "perfect.run", "t1 Q0 a 1 3 p\nt1 Q0 c 2 2 p\nt1 Q0 b 3 1 p\nt2 Q0 d 1 2 p\nt2 Q0 e 2 1 p\n"
                                    "t3 Q0 f 1 1 p\n");
    ExperimentConfig c;
    c.output_dir = dir / "out";
    c.fisher_iterations = 500;
    auto const out = cmd_evaluate(c, {dir / "perfect.run"}, dir / "qrels.txt");
    auto const text = read_file(out);
    CHECK(text.find("perfect\t2\t1.000000") != std::string::npos);
    CHECK(text.find("skipped topics without relevant judgments: t3") != std::string::npos);

    auto const pair = read_file(cmd_evaluate(c, {dir / "perfect.run", dir / "perfect.run"}, dir / "qrels.txt"));
    CHECK(pair.find("perfect#1") != std::string::npos);
    CHECK(pair.find("map\t0.000000\t1.0000") != std::string::npos);
    CHECK(pair.find("p30\t0.000000\t1.0000") != std::string::npos);

    write_file(dir / "broken.run", "t1 Q0 a 1 3 p\nt1 Q0 c\n");
    try {
        cmd_evaluate(c, {dir / "broken.run"}, dir / "qrels.txt");
        FAIL("expected data_error");
    } catch (data_error const& e) {
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("evaluate three-topic comparison table") {
    TempDir dir("evaluate3");
    write_file(dir / "qrels.txt", "t1 0 a 1\nt1 0 b 0\nt2 0 c 1\nt2 0 d 1\nt3 0 e 1\n");
    write_file(dir / "a.run", "t1 Q0 a 1 2 a\nt1 Q0 b 2 1 a\nt2 Q0 x 1 3 a\nt2 Q0 c 2 2 a\nt2 Q0 d 3 1 a\n"
                              "t3 Q0 e 1 1 a\n");
    write_file(dir / "b.run", "t1 Q0 b 1 2 b\nt1 Q0 a 2 1 b\nt2 Q0 c 1 2 b\nt2 Q0 d 2 1 b\nt3 Q0 e 1 1 b\n");
    ExperimentConfig c;
    c.output_dir = dir / "out";
    c.fisher_iterations = 1000;
    auto const text = read_file(cmd_evaluate(c, {dir / "a.run", dir / "b.run"}, dir / "qrels.txt"));
    double const t2 = (0.5 + 2.0 / 3.0) / 2.0;
    CHECK(text.find("t1\t1.000000\t0.500000\t0.500000") != std::string::npos);
    CHECK(text.find("t3\t1.000000\t1.000000\t0.000000") != std::string::npos);
    std::ostringstream t2_row;
    t2_row.setf(std::ios::fixed);
    t2_row.precision(6);
    t2_row << "t2\t" << t2 << "\t1.000000\t" << t2 - 1.0;
    CHECK(text.find(t2_row.str()) != std::string::npos);
    std::ostringstream map_a;
    map_a.setf(std::ios::fixed);
    map_a.precision(6);
    map_a << "a\t3\t" << (2.0 + t2) / 3.0;
    CHECK(text.find(map_a.str()) != std::string::npos);
}

TEST_CASE("URL character perspective matches shared query trigrams") {
    // One-hot trigram embeddings at depth 0 make S an exact-match indicator,
    // so a query trigram's URL max-pool feature exceeds the uniform 1/m
    // exactly when that trigram occurs in the URL.
    std::vector<Topic> topics{{"q", "BBC world service cuts"}};
    Corpus corpus;
    corpus.add({"d1", "staff cuts announced", "http://t.co/abc"});
    corpus.add({"d2", "unrelated post", ""});
    UrlMap urls;
    TempDir dir("bbc");
    write_file(dir / "map.tsv", "http://t.co/abc\thttp://bbc-world-service-to-cut-staff.html\n");
    urls = UrlMap::load(dir / "map.tsv");

    auto vocab = build_vocabularies(topics, corpus, urls, 1);
    auto const stats = stats_from_corpus(corpus);
    ModelConfig config;
    config.depth = 0;
    config.mlp_hidden = 2;
    config.ablation.no_idf = true;
    config.embedding_dim = std::max(vocab.words.size(), vocab.chars.size());
    config.word_vocab = vocab.words.size();
    config.char_vocab = vocab.chars.size();
    apply_lengths(config, measure_lengths(topics, corpus, urls));
    std::mt19937_64 rng(1);
    auto params = init_params(config, rng);
    for (auto* table : {&params.word_embedding, &params.trigram_embedding}) {
        for (auto& x : table->data()) x = 0.0;
        for (std::size_t r = 1; r < table->rows(); ++r) table->at(r, r) = 1.0;
    }

    auto const query = analyze_query(topics[0].text);
    auto const doc = analyze_document(*corpus.find("d1"), urls);
    auto const inst = encode_instance(query, doc, vocab, stats, config);
    auto const features = match_features(params, config, inst);

    std::set<std::string> const url_grams(doc.url_chars.begin(), doc.url_chars.end());
    CHECK(url_grams.contains("bbc"));
    CHECK(url_grams.contains("wor"));
    std::size_t const n = config.query_len;
    std::size_t const nc = config.query_char_len;
    std::size_t const url_max = 2 * n + 2 * nc;
    double const m = static_cast<double>(inst.url_chars.real_length());
    std::size_t matched = 0;
    for (std::size_t i = 0; i < query.chars.size() && i < nc; ++i) {
        double const f = features[url_max + i];
        CAPTURE(query.chars[i]);
        if (url_grams.contains(query.chars[i])) {
            CHECK(f > 1.0 / m + 1e-9);
            ++matched;
        } else {
            CHECK(f == doctest::Approx(1.0 / m).epsilon(1e-12));
        }
    }
    CHECK(matched >= 10);
}

TEST_CASE("ablation and depth sweep tables") {
    TempDir dir("ablate");
    auto config = small_experiment(dir);
    config.set("train.max_epochs", "1");
    cmd_build_stats(config);
    auto const paths = cmd_ablate(config, {"no_max_pool", "no_all_char"}, true);
    REQUIRE(paths.size() == 2);
    auto const table = lines(read_file(paths[0]));
    REQUIRE(table.size() == 4);
    CHECK(table[0] == "condition\tmap\tp30\tdelta_map");
    CHECK(table[1].rfind("full model\t", 0) == 0);
    CHECK(table[1].substr(table[1].rfind('\t')) == "\t0.0000");
    CHECK(table[2].rfind("- max pooling\t", 0) == 0);
    CHECK(table[3].rfind("- all char rep.\t", 0) == 0);
    auto const sweep = lines(read_file(paths[1]));
    REQUIRE(sweep.size() == 6);
    for (std::size_t n = 0; n <= 4; ++n) {
        CHECK(sweep[n + 1].rfind("N=" + std::to_string(n) + "\t", 0) == 0);
    }

    try {
        cmd_ablate(config, {"no_everything"}, false);
        FAIL("expected config_error");
    } catch (config_error const& e) {
        std::string const msg = e.what();
        for (auto const& name : AblationFlags::names()) {
            CHECK(msg.find(name) != std::string::npos);
        }
    }
}

TEST_CASE("pretrained embeddings load by token") {
    TempDir dir("pretrained");
    Vocabulary v("word", 3);
    v.add("alpha");
    v.add("beta");
    write_file(dir / "e.txt", "3 3\nalpha 1 2 3\ngamma 4 5 6\nbeta 0.5 0.5 0.5\n");
    Tensor table({v.size(), 3});
    CHECK(load_pretrained_embeddings(table, v, dir / "e.txt") == 2);
    CHECK(table.at(2, 1) == 2.0);
    CHECK(table.at(3, 2) == 0.5);
    CHECK(table.at(0, 0) == 0.0);
    write_file(dir / "bad.txt", "alpha 1 2\n");
    CHECK_THROWS_AS(load_pretrained_embeddings(table, v, dir / "bad.txt"), data_error);
}
