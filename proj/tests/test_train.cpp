#include <algorithm>

#include "fixtures.hpp"
#include "mphcnn/dataset.hpp"
#include "mphcnn/error.hpp"
#include "mphcnn/synthetic.hpp"
#include "mphcnn/train.hpp"
#include "support.hpp"

using namespace mphcnn;
using namespace mphcnn::testing;

namespace {

struct Fixture {
    SyntheticData data;
    ModelConfig config;
    std::vector<QueryGroup> groups;
};

Fixture small_task() {
    SyntheticConfig sc;
    sc.seed = 3;
    sc.train_queries = 10;
    sc.test_queries = 2;
    sc.docs_per_query = 16;
    sc.relevant_per_query = 3;
    sc.filler_vocab = 60;
    sc.embedding_dim = 0;
    Fixture f;
    f.data = generate_synthetic(sc);
    auto const stats = stats_from_corpus(f.data.corpus);
    auto const vocab = build_vocabularies(f.data.train_topics, f.data.corpus, f.data.urls, 8);
    f.config.depth = 1;
    f.config.filters = 4;
    f.config.embedding_dim = 8;
    f.config.mlp_hidden = 8;
    f.config.dropout = 0.0;
    f.config.ablation.no_all_char = true;
    f.config.word_vocab = vocab.words.size();
    f.config.char_vocab = vocab.chars.size();
    f.config.seed = 5;
    apply_lengths(f.config, measure_lengths(f.data.train_topics, f.data.corpus, f.data.urls));
    f.groups = build_groups(f.data.train_topics, f.data.train_run, f.data.corpus, f.data.urls, &f.data.qrels, vocab,
                            stats, f.config);
    return f;
}

TrainOptions quick(std::size_t epochs) {
    TrainOptions o;
    o.batch_size = 8;
    o.max_epochs = epochs;
    o.patience = epochs;
    return o;
}

bool same_params(ModelParams const& a, ModelParams const& b) {
    auto const x = a.named();
    auto const y = b.named();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].second->values() != y[i].second->values()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters untouched") {
    auto const f = small_task();
    auto options = quick(2);
    options.learning_rate = 0.0;
    ModelParams initial;
    options.on_init = [&](ModelParams& p) { initial = p; };
    auto const result = train(f.groups, f.data.qrels, f.config, options);
    CHECK(same_params(result.params, initial));
}

TEST_CASE("training is deterministic for a fixed seed") {
    auto const f = small_task();
    auto const a = train(f.groups, f.data.qrels, f.config, quick(3));
    auto const b = train(f.groups, f.data.qrels, f.config, quick(3));
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].loss == b.log[i].loss);
        CHECK(a.log[i].validation_map == b.log[i].validation_map);
    }
    CHECK(same_params(a.params, b.params));
    CHECK(a.validation_queries == b.validation_queries);

    auto other = f.config;
    other.seed = 6;
    auto const c = train(f.groups, f.data.qrels, other, quick(3));
    CHECK(c.log.front().loss != a.log.front().loss);
}

TEST_CASE("validation split holds out fifteen percent of queries") {
    auto const f = small_task();
    auto const r = train(f.groups, f.data.qrels, f.config, quick(1));
    CHECK(r.validation_queries.size() == 2);
    CHECK(r.training_queries.size() == 8);
    for (auto const& q : r.validation_queries) {
        CHECK(std::find(r.training_queries.begin(), r.training_queries.end(), q) == r.training_queries.end());
    }
}

TEST_CASE("loss decreases over the first epochs on a planted task") {
    auto const f = small_task();
    auto options = quick(5);
    options.learning_rate = 0.05;
    auto const r = train(f.groups, f.data.qrels, f.config, options);
    REQUIRE(r.log.size() == 5);
    for (std::size_t i = 1; i < r.log.size(); ++i) {
        CHECK(r.log[i].loss < r.log[i - 1].loss);
    }
}

TEST_CASE("training rejects empty or unlabeled data") {
    auto f = small_task();
    std::vector<QueryGroup> none;
    CHECK_THROWS_AS(train(none, f.data.qrels, f.config, quick(1)), data_error);
    for (auto& g : f.groups) {
        for (auto& inst : g.instances) {
            inst.label = 0;
        }
    }
    CHECK_THROWS_AS(train(f.groups, f.data.qrels, f.config, quick(1)), data_error);
}

TEST_CASE("rank orders by probability with doc id ties") {
    std::mt19937_64 rng(50);
    auto config = tiny_config(1);
    auto params = init_params(config, rng);
    auto inst = random_instance(config, rng);

    std::vector<Instance> one{inst};
    auto const single = rank(params, config, one);
    REQUIRE(single.size() == 1);

    std::vector<Instance> twins{inst, inst};
    twins[0].doc_id = "d9";
    twins[1].doc_id = "d1";
    auto const tied = rank(params, config, twins);
    CHECK(tied[0].doc_id == "d1");
    CHECK(tied[1].doc_id == "d9");

    spread_params(params, rng);
    std::vector<Instance> many;
    for (int i = 0; i < 10; ++i) {
        auto x = random_instance(config, rng);
        x.doc_id = "d" + std::to_string(i);
        many.push_back(std::move(x));
    }
    auto const ranked = rank(params, config, many);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        CHECK(ranked[i - 1].score >= ranked[i].score);
    }
}
