#include "mphcnn/model.hpp"

#include <algorithm>
#include <charconv>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mphcnn/error.hpp"

namespace mphcnn {

// --- configuration ---------------------------------------------------------

std::vector<std::string> const& AblationFlags::names() {
    static std::vector<std::string> const n{"no_mean_pool", "no_max_pool", "no_idf", "no_word_module",
                                            "no_url_char", "no_doc_char", "no_all_char"};
    return n;
}

namespace {

bool* flag_slot(AblationFlags& f, std::string const& name) {
    if (name == "no_mean_pool") return &f.no_mean_pool;
    if (name == "no_max_pool") return &f.no_max_pool;
    if (name == "no_idf") return &f.no_idf;
    if (name == "no_word_module") return &f.no_word_module;
    if (name == "no_url_char") return &f.no_url_char;
    if (name == "no_doc_char") return &f.no_doc_char;
    if (name == "no_all_char") return &f.no_all_char;
    return nullptr;
}

std::string join_names(std::vector<std::string> const& names, char const* sep) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += (i ? sep : "") + names[i];
    }
    return out;
}

}  // namespace

void AblationFlags::set(std::string const& name) {
    bool* slot = flag_slot(*this, name);
    if (!slot) {
        throw config_error("unknown ablation flag '" + name + "'; valid flags: " + join_names(names(), ", "));
    }
    *slot = true;
}

std::vector<std::string> AblationFlags::active() const {
    std::vector<std::string> out;
    auto copy = *this;
    for (auto const& n : names()) {
        if (*flag_slot(copy, n)) {
            out.push_back(n);
        }
    }
    return out;
}

std::size_t ModelConfig::feature_dim() const noexcept {
    std::size_t per_layer = 0;
    if (word_active()) per_layer += query_len;
    if (doc_char_active()) per_layer += query_char_len;
    if (url_char_active()) per_layer += query_char_len;
    return (depth + 1) * pooling_count() * per_layer;
}

void ModelConfig::validate() const {
    if (pooling_count() == 0 || (!word_active() && !char_active())) {
        throw config_error("ablation flags " + join_names(ablation.active(), " + ") + " leave no features");
    }
    // One ablation row at a time; no_url_char together with no_doc_char is no_all_char.
    int rows = 0;
    rows += ablation.no_mean_pool ? 1 : 0;
    rows += ablation.no_max_pool ? 1 : 0;
    rows += ablation.no_idf ? 1 : 0;
    rows += ablation.no_word_module ? 1 : 0;
    rows += (ablation.no_url_char || ablation.no_doc_char || ablation.no_all_char) ? 1 : 0;
    if (rows > 1) {
        throw config_error("ablation flags " + join_names(ablation.active(), " + ")
                           + " combine several ablation rows; use at most one");
    }
    if (k_word == 0 || k_char == 0) {
        throw config_error("filter widths must be positive");
    }
    if (embedding_dim == 0 || mlp_hidden == 0 || (depth > 0 && filters == 0)) {
        throw config_error("embedding_dim, mlp_hidden and filters must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw config_error("dropout must lie in [0, 1)");
    }
    if (word_active() && (query_len == 0 || doc_len == 0 || word_vocab < 2)) {
        throw config_error("word module needs positive query/doc lengths and a vocabulary");
    }
    if (char_active() && (query_char_len == 0 || char_vocab < 2)) {
        throw config_error("character module needs a positive query length and a vocabulary");
    }
    if (doc_char_active() && doc_char_len == 0) {
        throw config_error("document character length must be positive");
    }
    if (url_char_active() && url_char_len == 0) {
        throw config_error("url character length must be positive");
    }
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    auto num = [](auto v) { return std::to_string(v); };
    char dr[32];
    auto const dr_end = std::to_chars(dr, dr + sizeof dr, dropout).ptr;
    return {
        {"depth", num(depth)},
        {"k_word", num(k_word)},
        {"k_char", num(k_char)},
        {"filters", num(filters)},
        {"embedding_dim", num(embedding_dim)},
        {"mlp_hidden", num(mlp_hidden)},
        {"dropout", std::string(dr, dr_end)},
        {"ablation", join_names(ablation.active(), ",")},
        {"mean_pool_on_raw", mean_pool_on_raw ? "1" : "0"},
        {"query_len", num(query_len)},
        {"doc_len", num(doc_len)},
        {"query_char_len", num(query_char_len)},
        {"doc_char_len", num(doc_char_len)},
        {"url_char_len", num(url_char_len)},
        {"word_vocab", num(word_vocab)},
        {"char_vocab", num(char_vocab)},
        {"seed", num(seed)},
    };
}

ModelConfig ModelConfig::from_map(std::map<std::string, std::string> const& kv) {
    ModelConfig c;
    auto get = [&](std::string const& key) -> std::string const& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw data_error("model config lacks key '" + key + "'");
        }
        return it->second;
    };
    auto size = [&](std::string const& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
    c.depth = size("depth");
    c.k_word = size("k_word");
    c.k_char = size("k_char");
    c.filters = size("filters");
    c.embedding_dim = size("embedding_dim");
    c.mlp_hidden = size("mlp_hidden");
    c.dropout = std::stod(get("dropout"));
    std::istringstream flags(get("ablation"));
    for (std::string f; std::getline(flags, f, ',');) {
        if (!f.empty()) {
            c.ablation.set(f);
        }
    }
    c.mean_pool_on_raw = get("mean_pool_on_raw") == "1";
    c.query_len = size("query_len");
    c.doc_len = size("doc_len");
    c.query_char_len = size("query_char_len");
    c.doc_char_len = size("doc_char_len");
    c.url_char_len = size("url_char_len");
    c.word_vocab = size("word_vocab");
    c.char_vocab = size("char_vocab");
    c.seed = std::stoull(get("seed"));
    return c;
}

// --- parameters --------------------------------------------------------------

std::vector<NamedTensor> ModelParams::named() {
    std::vector<NamedTensor> out;
    auto add = [&](std::string name, Tensor& t) {
        if (!t.empty()) {
            out.push_back({std::move(name), &t});
        }
    };
    add("word_embedding", word_embedding);
    add("trigram_embedding", trigram_embedding);
    for (std::size_t h = 0; h < word_conv.size(); ++h) {
        add("word_conv." + std::to_string(h + 1) + ".filters", word_conv[h].filters);
        add("word_conv." + std::to_string(h + 1) + ".bias", word_conv[h].bias);
    }
    for (std::size_t h = 0; h < char_conv.size(); ++h) {
        add("char_conv." + std::to_string(h + 1) + ".filters", char_conv[h].filters);
        add("char_conv." + std::to_string(h + 1) + ".bias", char_conv[h].bias);
    }
    add("hidden_weight", hidden_weight);
    add("hidden_bias", hidden_bias);
    add("output_weight", output_weight);
    add("output_bias", output_bias);
    return out;
}

std::vector<std::pair<std::string, Tensor const*>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor const*>> out;
    for (auto const& nt : const_cast<ModelParams&>(*this).named()) {
        out.emplace_back(nt.name, nt.tensor);
    }
    return out;
}

void ModelParams::zero_grad() {
    for (auto& nt : named()) {
        nt.tensor->zero_grad();
    }
}

void ModelParams::drop_grad() {
    for (auto& nt : named()) {
        nt.tensor->drop_grad();
    }
}

namespace {

void glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    double const limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& v : t.data()) {
        v = u(rng);
    }
}

Tensor embedding_table(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
    Tensor t({rows, dim});
    std::uniform_real_distribution<double> u(0.0, 0.1);
    for (std::size_t r = 1; r < rows; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            t.at(r, c) = u(rng);
        }
    }
    return t;
}

std::vector<ConvLayer> conv_stack(std::size_t depth, std::size_t filters, std::size_t k, std::size_t dim,
                                  std::mt19937_64& rng) {
    std::vector<ConvLayer> stack;
    for (std::size_t h = 0; h < depth; ++h) {
        std::size_t const in = h == 0 ? dim : filters;
        ConvLayer layer{Tensor({filters, k, in}), Tensor({filters})};
        glorot(layer.filters, k * in, k * filters, rng);
        stack.push_back(std::move(layer));
    }
    return stack;
}

}  // namespace

ModelParams init_params(ModelConfig const& config, std::mt19937_64& rng) {
    config.validate();
    ModelParams p;
    if (config.word_active()) {
        p.word_embedding = embedding_table(config.word_vocab, config.embedding_dim, rng);
        p.word_conv = conv_stack(config.depth, config.filters, config.k_word, config.embedding_dim, rng);
    }
    if (config.char_active()) {
        p.trigram_embedding = embedding_table(config.char_vocab, config.embedding_dim, rng);
        p.char_conv = conv_stack(config.depth, config.filters, config.k_char, config.embedding_dim, rng);
    }
    std::size_t const d = config.feature_dim();
    p.hidden_weight = Tensor({d, config.mlp_hidden});
    glorot(p.hidden_weight, d, config.mlp_hidden, rng);
    p.hidden_bias = Tensor({config.mlp_hidden});
    p.output_weight = Tensor({config.mlp_hidden, 2});
    glorot(p.output_weight, config.mlp_hidden, 2, rng);
    p.output_bias = Tensor({2});
    return p;
}

// --- forward -----------------------------------------------------------------

std::vector<Var> hierarchical_representations(Tape& tape, EncodedSequence const& seq, Var embedding,
                                              std::span<ConvVars const> layers) {
    std::vector<Var> reps;
    reps.reserve(layers.size() + 1);
    reps.push_back(mask_rows(tape, gather_rows(tape, embedding, seq.ids), seq.mask));
    for (auto const& layer : layers) {
        auto conv = conv1d_same(tape, reps.back(), layer.filters, layer.bias);
        reps.push_back(mask_rows(tape, relu(tape, conv), seq.mask));
    }
    return reps;
}

Var similarity_features(Tape& tape, Var query_rep, Var doc_rep, std::span<std::uint8_t const> doc_mask,
                        std::span<double const> query_weights, std::span<std::uint8_t const> query_mask,
                        SimilarityOptions const& options) {
    if (query_weights.size() != query_mask.size()) {
        throw dimension_error("similarity_features: query weight count does not match query length");
    }
    auto const s = matmul_nt(tape, query_rep, doc_rep);
    auto const normalized = softmax_rows_masked(tape, s, doc_mask);
    std::vector<double> weights(query_weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] = query_mask[i] ? (options.use_weights ? query_weights[i] : 1.0) : 0.0;
    }
    std::vector<Var> parts;
    if (options.max_pool) {
        parts.push_back(mul_constant(tape, pool_rows(tape, normalized, doc_mask, pool_kind::max), weights));
    }
    if (options.mean_pool) {
        auto const source = options.mean_on_raw ? s : normalized;
        parts.push_back(mul_constant(tape, pool_rows(tape, source, doc_mask, pool_kind::mean), weights));
    }
    return concat(tape, parts);
}

namespace {

void require_length(EncodedSequence const& seq, std::size_t expected, char const* what) {
    if (seq.length() != expected || seq.mask.size() != expected) {
        throw dimension_error(std::string("instance ") + what + " length " + std::to_string(seq.length())
                              + " does not match model config " + std::to_string(expected));
    }
}

void require_weights(std::vector<std::vector<double>> const& w, std::size_t depth, std::size_t len, char const* what) {
    if (w.size() != depth + 1 || std::any_of(w.begin(), w.end(), [len](auto const& v) { return v.size() != len; })) {
        throw dimension_error(std::string("instance ") + what + " weights do not match depth and query length");
    }
}

void require_table(Tensor const& t, std::size_t rows, std::size_t dim, char const* what) {
    if (t.rank() != 2 || t.rows() != rows || t.cols() != dim) {
        throw dimension_error(std::string(what) + " has shape " + shape_to_string(t.shape()) + ", config expects ["
                              + std::to_string(rows) + " x " + std::to_string(dim) + "]");
    }
}

template <class Params>
std::vector<ConvVars> stack_vars(Tape& tape, Params& stack) {
    std::vector<ConvVars> out;
    for (auto& layer : stack) {
        out.push_back({tape.parameter(layer.filters), tape.parameter(layer.bias)});
    }
    return out;
}

template <class Params>
ForwardOutput forward_impl(Tape& tape, Params& params, ModelConfig const& config, Instance const& inst,
                           std::mt19937_64* dropout_rng) {
    config.validate();
    SimilarityOptions const options{!config.ablation.no_max_pool, !config.ablation.no_mean_pool,
                                    !config.ablation.no_idf, config.mean_pool_on_raw};
    std::vector<Var> parts;
    if (config.word_active()) {
        require_length(inst.query_words, config.query_len, "query word");
        require_length(inst.doc_words, config.doc_len, "document word");
        require_weights(inst.word_weights, config.depth, config.query_len, "word");
        require_table(params.word_embedding, config.word_vocab, config.embedding_dim, "word embedding");
        if (params.word_conv.size() != config.depth) {
            throw dimension_error("word conv stack depth does not match model config");
        }
        auto const emb = tape.parameter(params.word_embedding);
        auto const layers = stack_vars(tape, params.word_conv);
        auto const q = hierarchical_representations(tape, inst.query_words, emb, layers);
        auto const d = hierarchical_representations(tape, inst.doc_words, emb, layers);
        for (std::size_t h = 0; h <= config.depth; ++h) {
            parts.push_back(similarity_features(tape, q[h], d[h], inst.doc_words.mask, inst.word_weights[h],
                                                inst.query_words.mask, options));
        }
    }
    if (config.char_active()) {
        require_length(inst.query_chars, config.query_char_len, "query character");
        require_weights(inst.char_weights, config.depth, config.query_char_len, "character");
        require_table(params.trigram_embedding, config.char_vocab, config.embedding_dim, "trigram embedding");
        if (params.char_conv.size() != config.depth) {
            throw dimension_error("character conv stack depth does not match model config");
        }
        auto const emb = tape.parameter(params.trigram_embedding);
        auto const layers = stack_vars(tape, params.char_conv);
        auto const q = hierarchical_representations(tape, inst.query_chars, emb, layers);
        if (config.doc_char_active()) {
            require_length(inst.doc_chars, config.doc_char_len, "document character");
            auto const d = hierarchical_representations(tape, inst.doc_chars, emb, layers);
            for (std::size_t h = 0; h <= config.depth; ++h) {
                parts.push_back(similarity_features(tape, q[h], d[h], inst.doc_chars.mask, inst.char_weights[h],
                                                    inst.query_chars.mask, options));
            }
        }
        if (config.url_char_active()) {
            require_length(inst.url_chars, config.url_char_len, "url character");
            auto const u = hierarchical_representations(tape, inst.url_chars, emb, layers);
            for (std::size_t h = 0; h <= config.depth; ++h) {
                parts.push_back(similarity_features(tape, q[h], u[h], inst.url_chars.mask, inst.char_weights[h],
                                                    inst.query_chars.mask, options));
            }
        }
    }
    auto const features = concat(tape, parts);
    if (params.hidden_weight.rank() != 2 || params.hidden_weight.rows() != config.feature_dim()) {
        throw dimension_error("hidden layer expects " + std::to_string(params.hidden_weight.rows())
                              + " features, config produces " + std::to_string(config.feature_dim()));
    }

    auto x = features;
    if (dropout_rng && config.dropout > 0.0) {
        std::bernoulli_distribution keep(1.0 - config.dropout);
        std::vector<double> mask(config.feature_dim());
        double const scale = 1.0 / (1.0 - config.dropout);
        for (auto& m : mask) {
            m = keep(*dropout_rng) ? scale : 0.0;
        }
        x = mul_constant(tape, x, mask);
    }
    auto const hidden = relu(tape, affine(tape, x, tape.parameter(params.hidden_weight),
                                          tape.parameter(params.hidden_bias)));
    auto const logits = affine(tape, hidden, tape.parameter(params.output_weight), tape.parameter(params.output_bias));
    return {logits, features};
}

}  // namespace

ForwardOutput forward(Tape& tape, ModelParams& params, ModelConfig const& config, Instance const& instance,
                      std::mt19937_64* dropout_rng) {
    return forward_impl(tape, params, config, instance, dropout_rng);
}

ForwardOutput forward(Tape& tape, ModelParams const& params, ModelConfig const& config, Instance const& instance) {
    return forward_impl(tape, params, config, instance, nullptr);
}

double predict(ModelParams const& params, ModelConfig const& config, Instance const& instance) {
    Tape tape;
    auto const out = forward(tape, params, config, instance);
    return softmax(tape.value(out.logits).data())[1];
}

std::vector<double> match_features(ModelParams const& params, ModelConfig const& config, Instance const& instance) {
    Tape tape;
    auto const out = forward(tape, params, config, instance);
    return tape.value(out.features).values();
}

double batch_loss(ModelParams const& params, ModelConfig const& config, std::span<Instance const> batch) {
    double total = 0.0;
    for (auto const& inst : batch) {
        Tape tape;
        auto const out = forward(tape, params, config, inst);
        total += tape.value(softmax_nll(tape, out.logits, inst.label == 1 ? 1 : 0))[0];
    }
    return total;
}

ParamCount param_count(ModelConfig const& config) {
    config.validate();
    auto stack = [&](std::size_t k) {
        std::size_t n = 0;
        for (std::size_t h = 1; h <= config.depth; ++h) {
            std::size_t const in = h == 1 ? config.embedding_dim : config.filters;
            n += config.filters * k * in + config.filters;
        }
        return n;
    };
    ParamCount c;
    if (config.word_active()) {
        c.conv += stack(config.k_word);
        c.embedding += config.word_vocab * config.embedding_dim;
    }
    if (config.char_active()) {
        c.conv += stack(config.k_char);
        c.embedding += config.char_vocab * config.embedding_dim;
    }
    c.mlp = config.feature_dim() * config.mlp_hidden + config.mlp_hidden + config.mlp_hidden * 2 + 2;
    return c;
}

// --- checkpoint --------------------------------------------------------------

namespace {

constexpr char checkpoint_magic[8] = {'M', 'P', 'H', 'C', 'N', 'N', 'C', 'K'};
constexpr std::uint32_t checkpoint_version = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<char const*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, std::string const& where) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw data_error(where + ": truncated checkpoint");
    }
    return value;
}

void put_string(std::ostream& out, std::string const& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, std::string const& where) {
    auto const len = get<std::uint32_t>(in, where);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) {
        throw data_error(where + ": truncated checkpoint");
    }
    return s;
}

}  // namespace

void Checkpoint::save(std::filesystem::path const& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw data_error("cannot write checkpoint: " + path.string());
    }
    out.write(checkpoint_magic, sizeof checkpoint_magic);
    put(out, checkpoint_version);

    std::ostringstream header;
    for (auto const& [k, v] : config.to_map()) {
        header << k << '=' << v << '\n';
    }
    header << "word_vocab_hash=" << word_vocab_hash << '\n';
    header << "char_vocab_hash=" << char_vocab_hash << '\n';
    if (tuned_lambda) {
        std::ostringstream l;
        l.precision(17);
        l << *tuned_lambda;
        header << "tuned_lambda=" << l.str() << '\n';
    }
    put_string(out, header.str());

    auto const arrays = params.named();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
    for (auto const& [name, tensor] : arrays) {
        put_string(out, name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor->rank()));
        for (auto dim : tensor->shape()) {
            put<std::uint64_t>(out, dim);
        }
        out.write(reinterpret_cast<char const*>(tensor->data().data()),
                  static_cast<std::streamsize>(tensor->size() * sizeof(double)));
    }
}

Checkpoint Checkpoint::load(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw data_error("cannot open checkpoint: " + path.string());
    }
    auto const where = path.string();
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0) {
        throw data_error(where + ": not a checkpoint file");
    }
    if (get<std::uint32_t>(in, where) != checkpoint_version) {
        throw data_error(where + ": unsupported checkpoint version");
    }
    std::map<std::string, std::string> kv;
    std::istringstream header(get_string(in, where));
    for (std::string line; std::getline(header, line);) {
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw data_error(where + ": malformed checkpoint header line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    Checkpoint ck;
    ck.config = ModelConfig::from_map(kv);
    ck.word_vocab_hash = std::stoull(kv.at("word_vocab_hash"));
    ck.char_vocab_hash = std::stoull(kv.at("char_vocab_hash"));
    if (auto it = kv.find("tuned_lambda"); it != kv.end()) {
        ck.tuned_lambda = std::stod(it->second);
    }

    std::mt19937_64 unused(0);
    ck.params = init_params(ck.config, unused);
    auto slots = ck.params.named();
    auto const count = get<std::uint32_t>(in, where);
    if (count != slots.size()) {
        throw data_error(where + ": checkpoint holds " + std::to_string(count) + " arrays, config expects "
                         + std::to_string(slots.size()));
    }
    for (auto& slot : slots) {
        auto const name = get_string(in, where);
        if (name != slot.name) {
            throw data_error(where + ": expected array '" + slot.name + "', found '" + name + "'");
        }
        auto const rank = get<std::uint32_t>(in, where);
        shape_t shape(rank);
        for (auto& dim : shape) {
            dim = get<std::uint64_t>(in, where);
        }
        if (shape != slot.tensor->shape()) {
            throw data_error(where + ": array '" + name + "' has shape " + shape_to_string(shape) + ", expected "
                             + shape_to_string(slot.tensor->shape()));
        }
        auto data = slot.tensor->data();
        if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
            throw data_error(where + ": truncated checkpoint");
        }
    }
    return ck;
}

}  // namespace mphcnn
