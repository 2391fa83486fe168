#include "mphcnn/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

namespace {

std::size_t parse_size(std::string const& key, std::string const& value) {
    try {
        std::size_t used = 0;
        auto const v = std::stoull(value, &used);
        if (used == value.size() && value.find('-') == std::string::npos) {
            return static_cast<std::size_t>(v);
        }
    } catch (std::logic_error const&) {
    }
    throw config_error(key + ": expected a non-negative integer, got '" + value + "'");
}

double parse_double(std::string const& key, std::string const& value) {
    try {
        std::size_t used = 0;
        auto const v = std::stod(value, &used);
        if (used == value.size()) {
            return v;
        }
    } catch (std::logic_error const&) {
    }
    throw config_error(key + ": expected a number, got '" + value + "'");
}

bool parse_bool(std::string const& key, std::string const& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "0" || value == "false" || value == "no" || value == "off") {
        return false;
    }
    throw config_error(key + ": expected a boolean, got '" + value + "'");
}

/// Shortest text that parses back to `v`.
std::string format(double v) {
    char buf[64];
    auto const res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

fs::path const& require_file(fs::path const& path, std::string const& key) {
    if (path.empty()) {
        throw config_error(key + " is not set");
    }
    if (!fs::exists(path)) {
        throw data_error("no such file for " + key + ": " + path.string());
    }
    return path;
}

std::vector<std::string> split_list(std::string const& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        auto const b = item.find_first_not_of(" \t");
        auto const e = item.find_last_not_of(" \t");
        if (b != std::string::npos) {
            out.push_back(item.substr(b, e - b + 1));
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::set(std::string const& key, std::string const& value, fs::path const& base) {
    auto path = [&] {
        fs::path p(value);
        if (p.empty() || p.is_absolute() || base.empty()) {
            return p;
        }
        return (base / p).lexically_normal();
    };
    auto size = [&] { return parse_size(key, value); };
    auto real = [&] { return parse_double(key, value); };

    static std::map<std::string, std::function<void(ExperimentConfig&, std::function<fs::path()> const&,
                                                    std::function<std::size_t()> const&,
                                                    std::function<double()> const&, std::string const&)>> const
        setters{
            {"data.corpus", [](auto& c, auto& p, auto&, auto&, auto&) { c.corpus = p(); }},
            {"data.urlmap", [](auto& c, auto& p, auto&, auto&, auto&) { c.urlmap = p(); }},
            {"data.background", [](auto& c, auto& p, auto&, auto&, auto&) { c.background = p(); }},
            {"data.embeddings", [](auto& c, auto& p, auto&, auto&, auto&) { c.embeddings = p(); }},
            {"data.stats", [](auto& c, auto& p, auto&, auto&, auto&) { c.stats = p(); }},
            {"data.max_word_order", [](auto& c, auto&, auto& s, auto&, auto&) { c.max_word_order = s(); }},
            {"data.max_char_order", [](auto& c, auto&, auto& s, auto&, auto&) { c.max_char_order = s(); }},
            {"train.topics", [](auto& c, auto& p, auto&, auto&, auto&) { c.train_topics = p(); }},
            {"train.qrels", [](auto& c, auto& p, auto&, auto&, auto&) { c.train_qrels = p(); }},
            {"train.run", [](auto& c, auto& p, auto&, auto&, auto&) { c.train_run = p(); }},
            {"train.learning_rate", [](auto& c, auto&, auto&, auto& r, auto&) { c.train.learning_rate = r(); }},
            {"train.batch_size", [](auto& c, auto&, auto& s, auto&, auto&) { c.train.batch_size = s(); }},
            {"train.max_epochs", [](auto& c, auto&, auto& s, auto&, auto&) { c.train.max_epochs = s(); }},
            {"train.patience", [](auto& c, auto&, auto& s, auto&, auto&) { c.train.patience = s(); }},
            {"train.validation_fraction",
             [](auto& c, auto&, auto&, auto& r, auto&) { c.train.validation_fraction = r(); }},
            {"test.topics", [](auto& c, auto& p, auto&, auto&, auto&) { c.test_topics = p(); }},
            {"test.qrels", [](auto& c, auto& p, auto&, auto&, auto&) { c.test_qrels = p(); }},
            {"test.run", [](auto& c, auto& p, auto&, auto&, auto&) { c.test_run = p(); }},
            {"model.depth", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.depth = s(); }},
            {"model.k_word", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.k_word = s(); }},
            {"model.k_char", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.k_char = s(); }},
            {"model.filters", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.filters = s(); }},
            {"model.embedding_dim", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.embedding_dim = s(); }},
            {"model.mlp_hidden", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.mlp_hidden = s(); }},
            {"model.dropout", [](auto& c, auto&, auto&, auto& r, auto&) { c.model.dropout = r(); }},
            {"model.mean_pool_on_raw",
             [](auto& c, auto&, auto&, auto&, auto& v) { c.model.mean_pool_on_raw = parse_bool("model.mean_pool_on_raw", v); }},
            {"model.ablation",
             [](auto& c, auto&, auto&, auto&, auto& v) {
                 c.model.ablation = {};
                 for (auto const& f : split_list(v)) {
                     c.model.ablation.set(f);
                 }
             }},
            {"model.query_len", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.query_len = s(); }},
            {"model.doc_len", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.doc_len = s(); }},
            {"model.query_char_len", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.query_char_len = s(); }},
            {"model.doc_char_len", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.doc_char_len = s(); }},
            {"model.url_char_len", [](auto& c, auto&, auto& s, auto&, auto&) { c.model.url_char_len = s(); }},
            {"ql.mu", [](auto& c, auto&, auto&, auto& r, auto&) { c.ql.mu = r(); }},
            {"experiment.lambda",
             [](auto& c, auto&, auto&, auto&, auto& v) {
                 if (v != "tune" && v != "none") {
                     auto const l = parse_double("experiment.lambda", v);
                     if (l < 0.0 || l > 1.0) {
                         throw config_error("experiment.lambda must be in [0, 1], 'tune' or 'none'");
                     }
                 }
                 c.lambda = v;
             }},
            {"experiment.seed", [](auto& c, auto&, auto& s, auto&, auto&) { c.seed = s(); }},
            {"experiment.output_dir", [](auto& c, auto& p, auto&, auto&, auto&) { c.output_dir = p(); }},
            {"experiment.checkpoint", [](auto& c, auto& p, auto&, auto&, auto&) { c.checkpoint = p(); }},
            {"experiment.fisher_iterations",
             [](auto& c, auto&, auto& s, auto&, auto&) { c.fisher_iterations = s(); }},
            {"experiment.tag", [](auto& c, auto&, auto&, auto&, auto& v) { c.tag = v; }},
        };
    auto it = setters.find(key);
    if (it == setters.end()) {
        std::string valid;
        for (auto const& [k, _] : setters) {
            valid += (valid.empty() ? "" : ", ") + k;
        }
        throw config_error("unknown setting '" + key + "'; valid settings: " + valid);
    }
    it->second(*this, path, size, real, value);
}

ExperimentConfig ExperimentConfig::load(fs::path const& path) {
    if (!fs::exists(path)) {
        throw data_error("no such config file: " + path.string());
    }
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (boost::property_tree::ini_parser_error const& e) {
        throw config_error(e.what());
    }
    ExperimentConfig config;
    auto const base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    for (auto const& [section, entries] : tree) {
        if (entries.empty() && !entries.data().empty()) {
            throw config_error(path.string() + ": setting '" + section + "' is outside a [section]");
        }
        for (auto const& [key, value] : entries) {
            config.set(section + "." + key, value.get_value<std::string>(), base);
        }
    }
    return config;
}

void ExperimentConfig::save(fs::path const& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write config: " + path.string());
    }
    auto p = [](fs::path const& x) { return x.generic_string(); };
    out << "[data]\n"
        << "corpus = " << p(corpus) << '\n'
        << "urlmap = " << p(urlmap) << '\n'
        << "background = " << p(background) << '\n'
        << "embeddings = " << p(embeddings) << '\n'
        << "stats = " << p(stats) << '\n'
        << "max_word_order = " << max_word_order << '\n'
        << "max_char_order = " << max_char_order << '\n'
        << "\n[train]\n"
        << "topics = " << p(train_topics) << '\n'
        << "qrels = " << p(train_qrels) << '\n'
        << "run = " << p(train_run) << '\n'
        << "learning_rate = " << format(train.learning_rate) << '\n'
        << "batch_size = " << train.batch_size << '\n'
        << "max_epochs = " << train.max_epochs << '\n'
        << "patience = " << train.patience << '\n'
        << "validation_fraction = " << format(train.validation_fraction) << '\n'
        << "\n[test]\n"
        << "topics = " << p(test_topics) << '\n'
        << "qrels = " << p(test_qrels) << '\n'
        << "run = " << p(test_run) << '\n'
        << "\n[model]\n";
    auto const m = model.to_map();
    for (auto const* key : {"depth", "k_word", "k_char", "filters", "embedding_dim", "mlp_hidden", "dropout",
                            "mean_pool_on_raw", "ablation", "query_len", "doc_len", "query_char_len", "doc_char_len",
                            "url_char_len"}) {
        out << key << " = " << m.at(key) << '\n';
    }
    out << "\n[ql]\n"
        << "mu = " << format(ql.mu) << '\n'
        << "\n[experiment]\n"
        << "lambda = " << lambda << '\n'
        << "seed = " << seed << '\n'
        << "output_dir = " << p(output_dir) << '\n'
        << "checkpoint = " << p(checkpoint) << '\n'
        << "fisher_iterations = " << fisher_iterations << '\n'
        << "tag = " << tag << '\n';
}

fs::path ExperimentConfig::stats_path() const { return stats.empty() ? output_dir / "stats.tsv" : stats; }

fs::path ExperimentConfig::checkpoint_path() const {
    return checkpoint.empty() ? output_dir / "model.ckpt" : checkpoint;
}

// ---------------------------------------------------------------------------

Workspace load_workspace(ExperimentConfig const& config) {
    Workspace ws;
    ws.corpus = Corpus::load(require_file(config.corpus, "data.corpus"));
    if (!config.urlmap.empty()) {
        ws.urls = UrlMap::load(require_file(config.urlmap, "data.urlmap"));
    }
    auto const stats = config.stats_path();
    if (fs::exists(stats)) {
        ws.stats = CollectionStats::load(stats);
    } else if (!config.stats.empty()) {
        throw data_error("no such file for data.stats: " + stats.string());
    } else if (config.background.empty()) {
        ws.stats = stats_from_corpus(ws.corpus, config.max_word_order, config.max_char_order);
    } else {
        auto const background = Corpus::load(require_file(config.background, "data.background"));
        ws.stats = stats_from_corpus(background, config.max_word_order, config.max_char_order);
    }
    return ws;
}

ModelConfig resolve_model_config(ExperimentConfig const& config, std::vector<Topic> const& topics,
                                 Workspace const& ws, Vocabularies const& vocab) {
    ModelConfig m = config.model;
    auto const measured = measure_lengths(topics, ws.corpus, ws.urls);
    auto fill = [](std::size_t& slot, std::size_t value) {
        if (slot == 0) {
            slot = value;
        }
    };
    fill(m.query_len, measured.query);
    fill(m.doc_len, measured.doc);
    fill(m.query_char_len, measured.query_char);
    fill(m.doc_char_len, measured.doc_char);
    fill(m.url_char_len, measured.url_char);
    m.word_vocab = vocab.words.size();
    m.char_vocab = vocab.chars.size();
    m.seed = config.seed;
    m.validate();
    return m;
}

namespace {

std::vector<Topic> select_topics(std::vector<Topic> const& topics, std::vector<std::string> const& ids) {
    std::set<std::string> const wanted(ids.begin(), ids.end());
    std::vector<Topic> out;
    for (auto const& t : topics) {
        if (wanted.count(t.id) != 0) {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace

FitResult fit(ExperimentConfig const& config, Workspace const& ws) {
    auto const topics = load_topics(require_file(config.train_topics, "train.topics"));
    auto const qrels = Qrels::load(require_file(config.train_qrels, "train.qrels"));
    auto const run = RankedRun::load(require_file(config.train_run, "train.run"));
    if (!config.embeddings.empty()) {
        require_file(config.embeddings, "data.embeddings");
    }

    FitResult fit;
    fit.vocab = build_vocabularies(topics, ws.corpus, ws.urls, config.model.embedding_dim);
    fit.model = resolve_model_config(config, topics, ws, fit.vocab);
    auto const groups = build_groups(topics, run, ws.corpus, ws.urls, &qrels, fit.vocab, ws.stats, fit.model);
    if (groups.empty()) {
        throw data_error("training run shares no query ids with the training topics");
    }

    auto options = config.train;
    if (!config.embeddings.empty()) {
        options.on_init = [&](ModelParams& params) {
            if (!params.word_embedding.empty()) {
                load_pretrained_embeddings(params.word_embedding, fit.vocab.words, config.embeddings);
            }
        };
    }
    fit.training = train(groups, qrels, fit.model, options);

    std::set<std::string> const train_ids(fit.training.training_queries.begin(), fit.training.training_queries.end());
    std::vector<QueryGroup> train_groups;
    std::vector<QueryGroup> val_groups;
    for (auto const& g : groups) {
        (train_ids.count(g.query_id) != 0 ? train_groups : val_groups).push_back(g);
    }
    fit.train_map = evaluate(rank_groups(fit.training.params, fit.model, train_groups), qrels).map;

    if (!val_groups.empty()) {
        auto const nn = rank_groups(fit.training.params, fit.model, val_groups);
        auto const lm = ql_run(select_topics(topics, fit.training.validation_queries), run, ws.corpus, ws.stats,
                               config.ql);
        fit.tuned_lambda = tune_lambda(nn, lm, qrels).lambda;
    }
    return fit;
}

ScoredRuns score_test(ExperimentConfig const& config, Workspace const& ws, ModelConfig const& model,
                      ModelParams const& params, Vocabularies const& vocab, std::optional<double> tuned_lambda) {
    auto const topics = load_topics(require_file(config.test_topics, "test.topics"));
    auto const run = RankedRun::load(require_file(config.test_run, "test.run"));
    auto const groups = build_groups(topics, run, ws.corpus, ws.urls, nullptr, vocab, ws.stats, model);

    ScoredRuns out;
    out.neural = rank_groups(params, model, groups);
    out.ql = ql_run(topics, run, ws.corpus, ws.stats, config.ql);
    if (config.lambda == "tune") {
        out.lambda = tuned_lambda;
    } else if (config.lambda != "none") {
        out.lambda = parse_double("experiment.lambda", config.lambda);
    }
    if (out.lambda) {
        out.interpolated = interpolate(out.neural, out.ql, *out.lambda);
    }
    return out;
}

// ---------------------------------------------------------------------------

fs::path cmd_build_stats(ExperimentConfig const& config) {
    auto const source = config.background_path();
    auto const corpus = Corpus::load(require_file(source, config.background.empty() ? "data.corpus" : "data.background"));
    auto const stats = stats_from_corpus(corpus, config.max_word_order, config.max_char_order);
    auto const out = config.stats_path();
    if (out.has_parent_path()) {
        fs::create_directories(out.parent_path());
    }
    stats.save(out);
    return out;
}

TrainSummary cmd_train(ExperimentConfig const& config) {
    auto const ws = load_workspace(config);
    auto const result = fit(config, ws);

    TrainSummary summary;
    summary.checkpoint = config.checkpoint_path();
    if (summary.checkpoint.has_parent_path()) {
        fs::create_directories(summary.checkpoint.parent_path());
    }
    fs::create_directories(config.output_dir);
    auto const dir = summary.checkpoint.parent_path();
    result.vocab.words.save(dir / "word.vocab");
    result.vocab.chars.save(dir / "char.vocab");

    Checkpoint ckpt;
    ckpt.config = result.model;
    ckpt.params = result.training.params;
    ckpt.word_vocab_hash = result.vocab.words.hash();
    ckpt.char_vocab_hash = result.vocab.chars.hash();
    ckpt.tuned_lambda = result.tuned_lambda;
    ckpt.save(summary.checkpoint);

    summary.log = config.output_dir / "train_log.tsv";
    std::ofstream log(summary.log, std::ios::binary);
    if (!log) {
        throw data_error("cannot write training log: " + summary.log.string());
    }
    log << "epoch\tloss\ttrain_map\tvalidation_map\n";
    for (auto const& e : result.training.log) {
        log << e.epoch << '\t' << format(e.loss) << '\t' << format(e.train_map) << '\t' << format(e.validation_map)
            << '\n';
    }
    summary.best_epoch = result.training.best_epoch;
    summary.train_map = result.train_map;
    if (summary.best_epoch > 0) {
        summary.validation_map = result.training.log[summary.best_epoch - 1].validation_map;
    }
    summary.tuned_lambda = result.tuned_lambda;
    return summary;
}

RerankSummary cmd_rerank(ExperimentConfig const& config) {
    auto const path = config.checkpoint_path();
    auto const ckpt = Checkpoint::load(require_file(path, "experiment.checkpoint"));
    auto const dir = path.parent_path();
    Vocabularies vocab{Vocabulary::load(require_file(dir / "word.vocab", "word vocabulary")),
                       Vocabulary::load(require_file(dir / "char.vocab", "char vocabulary"))};
    if (vocab.words.hash() != ckpt.word_vocab_hash || vocab.chars.hash() != ckpt.char_vocab_hash) {
        throw data_error("vocabulary files in " + dir.string()
                         + " do not match the checkpoint's vocabulary hash; refusing to score");
    }
    auto const ws = load_workspace(config);
    auto const runs = score_test(config, ws, ckpt.config, ckpt.params, vocab, ckpt.tuned_lambda);

    fs::create_directories(config.output_dir);
    RerankSummary summary;
    summary.run = config.output_dir / (config.tag + ".run");
    summary.ql_run = config.output_dir / "ql.run";
    runs.neural.save(summary.run, config.tag);
    runs.ql.save(summary.ql_run, "ql");
    if (runs.interpolated) {
        summary.interpolated_run = config.output_dir / (config.tag + ".interp.run");
        runs.interpolated->save(*summary.interpolated_run, config.tag + "+ql");
    }
    return summary;
}

std::string evaluation_report(std::vector<RankedRun> const& runs, std::vector<std::string> const& names,
                              Qrels const& qrels, std::size_t fisher_iterations, std::uint64_t seed) {
    if (runs.empty() || runs.size() > 2 || runs.size() != names.size()) {
        throw config_error("evaluate takes one or two runs");
    }
    std::optional<std::vector<std::string>> topics;
    if (runs.size() == 2) {
        topics = shared_topics(runs[0], runs[1], qrels);
    }
    std::vector<EvalResult> results;
    std::ostringstream out;
    out << "run\ttopics\tmap\tp30\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        results.push_back(evaluate(runs[i], qrels, topics));
        out << names[i] << '\t' << results.back().topics.size() << '\t' << fixed(results.back().map, 6) << '\t'
            << fixed(results.back().p30, 6) << '\n';
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!results[i].skipped.empty()) {
            out << "# " << names[i] << ": skipped topics without relevant judgments:";
            for (auto const& t : results[i].skipped) {
                out << ' ' << t;
            }
            out << '\n';
        }
    }
    if (runs.size() == 2) {
        auto metric = [&](std::size_t r, bool ap) {
            std::vector<double> v;
            for (auto const& t : results[r].topics) {
                v.push_back(ap ? t.ap : t.p30);
            }
            return v;
        };
        out << "\nmetric\tdelta\tp_value\n";
        for (bool const ap : {true, false}) {
            auto const a = metric(0, ap);
            auto const b = metric(1, ap);
            double const delta = ap ? results[0].map - results[1].map : results[0].p30 - results[1].p30;
            double const p = a.empty() ? 1.0 : fisher_randomization(a, b, fisher_iterations, seed);
            out << (ap ? "map" : "p30") << '\t' << fixed(delta, 6) << '\t' << fixed(p, 4) << '\n';
        }
        auto const report = per_topic_report(runs[0], runs[1], qrels);
        out << "\nper-topic AP (" << names[0] << " - " << names[1] << "): wins " << report.wins << ", losses "
            << report.losses << ", ties " << report.ties << '\n';
        out << "topic\t" << names[0] << '\t' << names[1] << "\tdelta\n";
        for (auto const& row : report.rows) {
            out << row.topic << '\t' << fixed(row.a, 6) << '\t' << fixed(row.b, 6) << '\t' << fixed(row.delta, 6)
                << '\n';
        }
    }
    return out.str();
}

fs::path cmd_evaluate(ExperimentConfig const& config, std::vector<fs::path> const& runs, fs::path const& qrels_path) {
    auto const qpath = qrels_path.empty() ? config.test_qrels : qrels_path;
    auto const qrels = Qrels::load(require_file(qpath, "test.qrels"));
    std::vector<RankedRun> loaded;
    std::vector<std::string> names;
    for (auto const& r : runs) {
        loaded.push_back(RankedRun::load(require_file(r, "run file")));
        names.push_back(r.stem().string());
    }
    if (names.size() == 2 && names[0] == names[1]) {
        names = {names[0] + "#1", names[1] + "#2"};
    }
    auto const report = evaluation_report(loaded, names, qrels, config.fisher_iterations, config.seed);
    fs::create_directories(config.output_dir);
    auto const out = config.output_dir / "evaluation.txt";
    std::ofstream file(out, std::ios::binary);
    if (!file) {
        throw data_error("cannot write report: " + out.string());
    }
    file << report;
    return out;
}

std::string ablation_label(std::string const& flag) {
    static std::map<std::string, std::string> const labels{
        {"", "full model"},
        {"no_mean_pool", "- mean pooling"},
        {"no_max_pool", "- max pooling"},
        {"no_idf", "- IDF weighting"},
        {"no_word_module", "- word module"},
        {"no_url_char", "- URL char rep."},
        {"no_doc_char", "- doc char rep."},
        {"no_all_char", "- all char rep."},
    };
    auto it = labels.find(flag);
    if (it == labels.end()) {
        AblationFlags{}.set(flag);  // throws with the valid list
    }
    return it->second;
}

namespace {

AblationRow train_and_score(ExperimentConfig const& config, Workspace const& ws, std::string label,
                            std::string flag) {
    auto const result = fit(config, ws);
    auto const runs = score_test(config, ws, result.model, result.training.params, result.vocab, std::nullopt);
    auto const qrels = Qrels::load(require_file(config.test_qrels, "test.qrels"));
    auto const eval = evaluate(runs.neural, qrels);
    return {std::move(label), std::move(flag), eval.map, eval.p30};
}

}  // namespace

std::vector<AblationRow> run_ablation(ExperimentConfig const& config, Workspace const& ws,
                                      std::vector<std::string> const& flags) {
    for (auto const& f : flags) {
        (void)ablation_label(f);
    }
    std::vector<AblationRow> rows;
    auto base = config;
    base.model.ablation = {};
    rows.push_back(train_and_score(base, ws, ablation_label(""), ""));
    for (auto const& f : flags) {
        auto c = base;
        c.model.ablation.set(f);
        rows.push_back(train_and_score(c, ws, ablation_label(f), f));
    }
    return rows;
}

std::vector<AblationRow> run_depth_sweep(ExperimentConfig const& config, Workspace const& ws, std::size_t max_depth) {
    std::vector<AblationRow> rows;
    for (std::size_t n = 0; n <= max_depth; ++n) {
        auto c = config;
        c.model.depth = n;
        rows.push_back(train_and_score(c, ws, "N=" + std::to_string(n), ""));
    }
    return rows;
}

std::string format_ablation(std::vector<AblationRow> const& rows) {
    std::ostringstream out;
    out << "condition\tmap\tp30\tdelta_map\n";
    for (auto const& r : rows) {
        double const delta = rows.empty() ? 0.0 : r.map - rows.front().map;
        out << r.label << '\t' << fixed(r.map, 4) << '\t' << fixed(r.p30, 4) << '\t' << fixed(delta, 4) << '\n';
    }
    return out.str();
}

std::vector<fs::path> cmd_ablate(ExperimentConfig const& config, std::vector<std::string> const& flags,
                                 bool depth_sweep) {
    auto const ws = load_workspace(config);
    fs::create_directories(config.output_dir);
    std::vector<fs::path> written;
    auto write = [&](fs::path const& path, std::string const& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw data_error("cannot write " + path.string());
        }
        out << text;
        written.push_back(path);
    };
    write(config.output_dir / "ablation.tsv", format_ablation(run_ablation(config, ws, flags)));
    if (depth_sweep) {
        write(config.output_dir / "depth_sweep.tsv", format_ablation(run_depth_sweep(config, ws)));
    }
    return written;
}

fs::path cmd_gen_synthetic(SyntheticConfig const& synthetic, ExperimentConfig const& config) {
    auto const dir = config.output_dir;
    auto const data = generate_synthetic(synthetic);
    auto const files = save_synthetic(data, dir);

    auto e = config;
    auto rel = [&](fs::path const& p) { return p.empty() ? p : p.lexically_relative(dir); };
    e.corpus = rel(files.corpus);
    e.urlmap = rel(files.urlmap);
    e.embeddings = rel(files.embeddings);
    e.background.clear();
    e.stats.clear();
    e.train_topics = rel(files.train_topics);
    e.train_qrels = rel(files.qrels);
    e.train_run = rel(files.train_run);
    e.test_topics = rel(files.test_topics);
    e.test_qrels = rel(files.qrels);
    e.test_run = rel(files.test_run);
    e.output_dir = "work";
    e.checkpoint.clear();
    if (synthetic.embedding_dim > 0) {
        e.model.embedding_dim = synthetic.embedding_dim;
    }
    auto const ini = dir / "experiment.ini";
    e.save(ini);
    return ini;
}

}  // namespace mphcnn
