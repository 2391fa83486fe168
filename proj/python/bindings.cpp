#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mphcnn/error.hpp"
#include "mphcnn/eval.hpp"
#include "mphcnn/model.hpp"
#include "mphcnn/pipeline.hpp"
#include "mphcnn/ql.hpp"
#include "mphcnn/stats.hpp"
#include "mphcnn/synthetic.hpp"
#include "mphcnn/text.hpp"

namespace py = pybind11;
using namespace mphcnn;

namespace {

using run_dict = std::map<std::string, std::vector<std::pair<std::string, double>>>;
using qrels_dict = std::map<std::string, std::map<std::string, int>>;

RankedRun to_run(run_dict const& run) {
    RankedRun out;
    for (auto const& [q, docs] : run) {
        auto& dst = out.queries[q];
        for (auto const& [doc, score] : docs) {
            dst.push_back({doc, score});
        }
    }
    out.normalize();
    return out;
}

run_dict from_run(RankedRun const& run) {
    run_dict out;
    for (auto const& [q, docs] : run.queries) {
        for (auto const& d : docs) {
            out[q].emplace_back(d.doc_id, d.score);
        }
    }
    return out;
}

Qrels to_qrels(qrels_dict const& grades) {
    Qrels out;
    for (auto const& [q, docs] : grades) {
        for (auto const& [doc, grade] : docs) {
            out.set(q, doc, grade);
        }
    }
    return out;
}

ExperimentConfig load_config(fs::path const& ini, std::map<std::string, std::string> const& overrides) {
    auto config = ExperimentConfig::load(ini);
    for (auto const& [key, value] : overrides) {
        config.set(key, value);
    }
    return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-perspective hierarchical CNN reranker";

    auto base = py::register_exception<error>(m, "Error");
    py::register_exception<config_error>(m, "ConfigError", base);
    auto data = py::register_exception<data_error>(m, "DataError", base);
    py::register_exception<alignment_error>(m, "AlignmentError", data);
    py::register_exception<numeric_error>(m, "NumericError", base);

    m.def("tokenize", [](std::string const& text) { return tokenize(text); }, py::arg("text"));
    m.def("char_trigrams", [](std::string const& token) { return char_trigrams(token); }, py::arg("token"));
    m.def(
        "url_to_trigrams",
        [](std::optional<std::string> const& url) { return url_to_trigrams(url); }, py::arg("url") = py::none());

    m.def(
        "idf",
        [](std::vector<token_list> const& docs, std::vector<std::string> const& gram) {
            return build_stats(docs).idf(gram_kind::word, gram);
        },
        py::arg("docs"), py::arg("gram"), "Word n-gram idf over tokenized documents.");

    m.def(
        "evaluate",
        [](run_dict const& run, qrels_dict const& qrels) {
            auto const result = evaluate(to_run(run), to_qrels(qrels));
            std::map<std::string, double> ap;
            for (auto const& t : result.topics) {
                ap[t.topic] = t.ap;
            }
            py::dict out;
            out["map"] = result.map;
            out["p30"] = result.p30;
            out["ap"] = ap;
            out["skipped"] = result.skipped;
            return out;
        },
        py::arg("run"), py::arg("qrels"), "MAP and P@30 of {query: [(doc, score)]} against {query: {doc: grade}}.");

    m.def(
        "fisher_randomization",
        [](std::vector<double> const& a, std::vector<double> const& b, std::size_t iterations, std::uint64_t seed) {
            return fisher_randomization(a, b, iterations, seed);
        },
        py::arg("a"), py::arg("b"), py::arg("iterations") = 10000, py::arg("seed") = 0);

    m.def(
        "interpolate",
        [](run_dict const& nn, run_dict const& lm, double lambda) {
            return from_run(interpolate(to_run(nn), to_run(lm), lambda));
        },
        py::arg("nn"), py::arg("lm"), py::arg("lam"));

    m.def(
        "param_count",
        [](std::map<std::string, std::string> const& settings) {
            ModelConfig config;
            if (!settings.empty()) {
                auto kv = config.to_map();
                for (auto const& [k, v] : settings) {
                    kv[k] = v;
                }
                config = ModelConfig::from_map(kv);
            }
            auto const c = param_count(config);
            py::dict out;
            out["conv"] = c.conv;
            out["mlp"] = c.mlp;
            out["embedding"] = c.embedding;
            out["total"] = c.total();
            return out;
        },
        py::arg("settings") = std::map<std::string, std::string>{});

    m.def(
        "gen_synthetic",
        [](fs::path const& output_dir, std::string const& mode, std::uint64_t seed, std::size_t train_queries,
           std::size_t test_queries, std::size_t docs_per_query) {
            SyntheticConfig synthetic;
            synthetic.mode = parse_synthetic_mode(mode);
            synthetic.seed = seed;
            synthetic.train_queries = train_queries;
            synthetic.test_queries = test_queries;
            synthetic.docs_per_query = docs_per_query;
            ExperimentConfig config;
            config.output_dir = output_dir;
            config.seed = seed;
            return cmd_gen_synthetic(synthetic, config);
        },
        py::arg("output_dir"), py::arg("mode") = "term", py::arg("seed") = 42, py::arg("train_queries") = 20,
        py::arg("test_queries") = 10, py::arg("docs_per_query") = 50, "Writes a dataset; returns experiment.ini.");

    using overrides = std::map<std::string, std::string>;
    m.def(
        "build_stats", [](fs::path const& ini, overrides const& o) { return cmd_build_stats(load_config(ini, o)); },
        py::arg("config"), py::arg("overrides") = overrides{});
    m.def(
        "train",
        [](fs::path const& ini, overrides const& o) {
            auto const s = cmd_train(load_config(ini, o));
            py::dict out;
            out["checkpoint"] = s.checkpoint;
            out["log"] = s.log;
            out["best_epoch"] = s.best_epoch;
            out["train_map"] = s.train_map;
            out["validation_map"] = s.validation_map;
            out["tuned_lambda"] = s.tuned_lambda;
            return out;
        },
        py::arg("config"), py::arg("overrides") = overrides{});
    m.def(
        "rerank",
        [](fs::path const& ini, overrides const& o) {
            auto const s = cmd_rerank(load_config(ini, o));
            py::dict out;
            out["run"] = s.run;
            out["ql_run"] = s.ql_run;
            out["interpolated_run"] = s.interpolated_run;
            return out;
        },
        py::arg("config"), py::arg("overrides") = overrides{});
    m.def(
        "evaluate_runs",
        [](fs::path const& ini, std::vector<fs::path> const& runs, fs::path const& qrels, overrides const& o) {
            return cmd_evaluate(load_config(ini, o), runs, qrels);
        },
        py::arg("config"), py::arg("runs"), py::arg("qrels") = fs::path{}, py::arg("overrides") = overrides{},
        "Writes evaluation.txt under the output directory and returns its path.");
}
