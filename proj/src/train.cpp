#include "mphcnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mphcnn/error.hpp"

namespace mphcnn {

namespace {

ModelParams snapshot(ModelParams const& params) {
    ModelParams copy = params;
    copy.drop_grad();
    return copy;
}

double groups_map(ModelParams const& params, ModelConfig const& config, std::vector<QueryGroup const*> const& groups,
                  Qrels const& qrels) {
    RankedRun run;
    for (auto const* g : groups) {
        run.queries[g->query_id] = rank(params, config, g->instances);
    }
    return evaluate(run, qrels).map;
}

}  // namespace

TrainResult train(std::span<QueryGroup const> groups, Qrels const& qrels, ModelConfig const& config,
                  TrainOptions const& options) {
    config.validate();
    std::size_t total = 0;
    std::size_t positives = 0;
    for (auto const& g : groups) {
        total += g.instances.size();
        for (auto const& inst : g.instances) {
            positives += inst.label == 1 ? 1 : 0;
        }
    }
    if (total == 0) {
        throw data_error("training set is empty");
    }
    if (positives == 0) {
        throw data_error("training set has no relevant (label 1) instances");
    }
    if (options.batch_size == 0) {
        throw config_error("batch size must be positive");
    }

    std::mt19937_64 rng(config.seed);
    TrainResult result;
    ModelParams live = init_params(config, rng);
    if (options.on_init) {
        options.on_init(live);
    }

    std::vector<QueryGroup const*> order;
    for (auto const& g : groups) {
        order.push_back(&g);
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = 0;
    if (order.size() >= 2 && options.validation_fraction > 0.0) {
        n_val = static_cast<std::size_t>(std::llround(options.validation_fraction * static_cast<double>(order.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
    }
    std::vector<QueryGroup const*> const validation(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<QueryGroup const*> const training(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    for (auto const* g : training) {
        result.training_queries.push_back(g->query_id);
    }
    for (auto const* g : validation) {
        result.validation_queries.push_back(g->query_id);
    }

    std::vector<Instance const*> samples;
    for (auto const* g : training) {
        for (auto const& inst : g->instances) {
            samples.push_back(&inst);
        }
    }
    if (samples.empty()) {
        throw data_error("training split is empty");
    }

    SgdConfig const sgd{options.learning_rate, config.seed};
    auto const named = live.named();
    live.zero_grad();
    result.params = snapshot(live);

    double best_val = -1.0;
    double best_loss = 0.0;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        std::shuffle(samples.begin(), samples.end(), rng);
        EpochLog entry;
        entry.epoch = epoch;
        for (std::size_t start = 0; start < samples.size(); start += options.batch_size) {
            std::size_t const end = std::min(samples.size(), start + options.batch_size);
            double const scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                Tape tape;
                auto const out = forward(tape, live, config, *samples[i], &rng);
                auto const nll = softmax_nll(tape, out.logits, samples[i]->label == 1 ? 1 : 0);
                double const value = tape.value(nll)[0];
                if (!std::isfinite(value)) {
                    throw numeric_error("non-finite training loss at epoch " + std::to_string(epoch));
                }
                entry.loss += value;
                tape.backward(nll, scale);
            }
            sgd_step(named, sgd);
        }
        if (options.track_train_map) {
            entry.train_map = groups_map(live, config, training, qrels);
        }
        if (!validation.empty()) {
            entry.validation_map = groups_map(live, config, validation, qrels);
        }
        result.log.push_back(entry);
        if (options.on_epoch) {
            options.on_epoch(entry);
        }

        if (validation.empty()) {
            result.params = snapshot(live);
            result.best_epoch = epoch;
            continue;
        }
        bool const improved = entry.validation_map > best_val;
        // A small validation set saturates quickly; on a tie keep the better-fit epoch.
        if (improved || (entry.validation_map == best_val && entry.loss < best_loss)) {
            result.params = snapshot(live);
            result.best_epoch = epoch;
            best_loss = entry.loss;
        }
        if (improved) {
            best_val = entry.validation_map;
            stale = 0;
        } else if (++stale >= options.patience) {
            break;
        }
    }
    return result;
}

std::vector<ScoredDoc> rank(ModelParams const& params, ModelConfig const& config, std::span<Instance const> candidates) {
    std::vector<ScoredDoc> out;
    out.reserve(candidates.size());
    for (auto const& inst : candidates) {
        out.push_back({inst.doc_id, predict(params, config, inst)});
    }
    sort_ranking(out);
    return out;
}

RankedRun rank_groups(ModelParams const& params, ModelConfig const& config, std::span<QueryGroup const> groups) {
    RankedRun run;
    for (auto const& g : groups) {
        run.queries[g.query_id] = rank(params, config, g.instances);
    }
    return run;
}

}  // namespace mphcnn
