#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mphcnn/error.hpp"
#include "mphcnn/pipeline.hpp"

using namespace mphcnn;

namespace {

enum exit_code : int { ok = 0, usage = 1, data = 2, numeric = 3 };

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string output_dir;
    std::vector<std::string> settings;
};

ExperimentConfig make_config(GlobalOptions const& g, std::vector<std::pair<std::string, std::string>> const& extra) {
    auto config = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
    for (auto const& s : g.settings) {
        auto const eq = s.find('=');
        if (eq == std::string::npos) {
            throw config_error("--set expects section.key=value, got '" + s + "'");
        }
        config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (auto const& [key, value] : extra) {
        if (!value.empty()) {
            config.set(key, value);
        }
    }
    if (g.seed) {
        config.seed = *g.seed;
    }
    if (!g.output_dir.empty()) {
        config.output_dir = g.output_dir;
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-perspective hierarchical CNN reranker for short social-media posts"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config, "INI experiment file");
    app.add_option("--seed", g.seed, "Seed for every randomized step");
    app.add_option("--output-dir", g.output_dir, "Directory for all artifacts");
    app.add_option("--set", g.settings, "Override a setting: section.key=value (repeatable)");

    auto* build_stats = app.add_subcommand("build-stats", "Count document and collection frequencies");
    std::string corpus;
    build_stats->add_option("--corpus", corpus, "Background corpus TSV");

    auto* train = app.add_subcommand("train", "Train a model on the [train] topics, qrels and run");
    std::string train_topics, train_qrels, train_run, epochs;
    train->add_option("--topics", train_topics);
    train->add_option("--qrels", train_qrels);
    train->add_option("--run", train_run, "Candidate run to rerank during training");
    train->add_option("--epochs", epochs, "Maximum epochs");

    auto* rerank = app.add_subcommand("rerank", "Score the [test] run with a trained checkpoint");
    std::string test_topics, test_run, checkpoint, lambda;
    rerank->add_option("--topics", test_topics);
    rerank->add_option("--run", test_run);
    rerank->add_option("--checkpoint", checkpoint);
    rerank->add_option("--lambda", lambda, "Interpolation weight, 'tune' or 'none'");

    auto* evaluate = app.add_subcommand("evaluate", "MAP and P@30, with a paired comparison for two runs");
    std::vector<std::string> runs;
    std::string qrels;
    evaluate->add_option("runs", runs, "One or two run files")->required()->expected(1, 2);
    evaluate->add_option("--qrels", qrels);

    auto* ablate = app.add_subcommand("ablate", "Train and score one model per ablation flag");
    std::vector<std::string> flags;
    bool depth_sweep = false;
    ablate->add_option("--flags", flags, "Ablation flags, or 'all'")->delimiter(',');
    ablate->add_flag("--depth-sweep", depth_sweep, "Also train depths N = 0..4");

    auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic dataset and experiment.ini");
    SyntheticConfig synthetic;
    std::string mode = "term";
    gen->add_option("--mode", mode, "term or bigram")->check(CLI::IsMember({"term", "bigram"}));
    gen->add_option("--train-queries", synthetic.train_queries);
    gen->add_option("--test-queries", synthetic.test_queries);
    gen->add_option("--docs-per-query", synthetic.docs_per_query);
    gen->add_option("--relevant-per-query", synthetic.relevant_per_query);
    gen->add_option("--doc-words", synthetic.doc_words);
    gen->add_option("--filler-vocab", synthetic.filler_vocab);
    gen->add_option("--url-fraction", synthetic.url_fraction);
    gen->add_option("--embedding-dim", synthetic.embedding_dim, "Pretrained vector width (0 for none)");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        auto const code = app.exit(e);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    try {
        if (build_stats->parsed()) {
            auto const config = make_config(g, {{"data.background", corpus}});
            std::cout << cmd_build_stats(config).string() << '\n';
        } else if (train->parsed()) {
            auto const config = make_config(g, {{"train.topics", train_topics},
                                                {"train.qrels", train_qrels},
                                                {"train.run", train_run},
                                                {"train.max_epochs", epochs}});
            auto const s = cmd_train(config);
            std::cout << "checkpoint\t" << s.checkpoint.string() << "\nbest_epoch\t" << s.best_epoch
                      << "\ntrain_map\t" << s.train_map << "\nvalidation_map\t" << s.validation_map << '\n';
            if (s.tuned_lambda) {
                std::cout << "tuned_lambda\t" << *s.tuned_lambda << '\n';
            }
        } else if (rerank->parsed()) {
            auto const config = make_config(g, {{"test.topics", test_topics},
                                                {"test.run", test_run},
                                                {"experiment.checkpoint", checkpoint},
                                                {"experiment.lambda", lambda}});
            auto const s = cmd_rerank(config);
            std::cout << s.run.string() << '\n' << s.ql_run.string() << '\n';
            if (s.interpolated_run) {
                std::cout << s.interpolated_run->string() << '\n';
            }
        } else if (evaluate->parsed()) {
            auto const config = make_config(g, {});
            std::vector<fs::path> paths(runs.begin(), runs.end());
            auto const report = cmd_evaluate(config, paths, qrels);
            std::ifstream in(report);
            std::cout << in.rdbuf();
        } else if (ablate->parsed()) {
            auto const config = make_config(g, {});
            if (flags.size() == 1 && flags.front() == "all") {
                flags = AblationFlags::names();
            }
            for (auto const& path : cmd_ablate(config, flags, depth_sweep)) {
                std::ifstream in(path);
                std::cout << "# " << path.filename().string() << '\n' << in.rdbuf();
            }
        } else if (gen->parsed()) {
            auto const config = make_config(g, {});
            synthetic.mode = parse_synthetic_mode(mode);
            synthetic.seed = config.seed;
            std::cout << cmd_gen_synthetic(synthetic, config).string() << '\n';
        }
    } catch (config_error const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::usage;
    } catch (numeric_error const& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return exit_code::numeric;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code::data;
    }
    return exit_code::ok;
}
