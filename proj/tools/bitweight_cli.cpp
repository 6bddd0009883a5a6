#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bitweight/bitweight.hpp"

namespace bw = bitweight;

namespace {

// Bad flag combinations detected after parsing; reported like parse errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FeatureArgs {
    std::string csv;
    std::string idx_images;
    std::string idx_labels;
    std::string label_column = "label";
};

void add_feature_options(CLI::App* sub, FeatureArgs& a, const std::string& prefix = "") {
    const std::string what = prefix.empty() ? "Feature" : "Held-out test feature";
    sub->add_option("--" + prefix + "features", a.csv, what + " CSV file");
    sub->add_option("--" + prefix + "idx-images", a.idx_images, "IDX image file (use with --" + prefix + "idx-labels)");
    sub->add_option("--" + prefix + "idx-labels", a.idx_labels, what + " IDX label file");
    if (prefix.empty()) sub->add_option("--label-column", a.label_column, "CSV label column name, empty for none");
}

bool has_features(const FeatureArgs& a) { return !a.csv.empty() || !a.idx_images.empty(); }

bw::FeatureMatrix load_features(const FeatureArgs& a, const std::string& label_column) {
    if (!a.csv.empty() && !a.idx_images.empty()) throw UsageError("give either a CSV or an IDX pair, not both");
    if (!a.csv.empty()) {
        std::optional<std::string> col;
        if (!label_column.empty()) col = label_column;
        return bw::io::load_features_csv(a.csv, col);
    }
    if (a.idx_images.empty() || a.idx_labels.empty()) throw UsageError("features required: --features or --idx-images with --idx-labels");
    return bw::io::load_idx(a.idx_images, a.idx_labels);
}

struct LearnerArgs {
    bw::LearnerConfig cfg;
    std::string optimizer = "egd";
    std::string init;

    bw::LearnerConfig resolved() const {
        bw::LearnerConfig out = cfg;
        out.optimizer = optimizer == "pgd" ? bw::Optimizer::Pgd : bw::Optimizer::Egd;
        return out;
    }
};

void add_learner_options(CLI::App* sub, LearnerArgs& a, bool offline, bool online) {
    sub->add_option("--c-xi", a.cfg.c_xi, "Margin penalty C_xi")->check(CLI::PositiveNumber);
    sub->add_option("--c-gamma", a.cfg.c_gamma, "Similar-pair penalty C_gamma")->check(CLI::NonNegativeNumber);
    sub->add_option("--eta", a.cfg.eta, "Learning rate")->check(CLI::PositiveNumber);
    if (offline) {
        sub->add_option("--optimizer", a.optimizer, "egd or pgd")->check(CLI::IsMember({"egd", "pgd"}));
        sub->add_option("--max-iters", a.cfg.max_iters, "Maximum offline iterations")->check(CLI::NonNegativeNumber);
        sub->add_option("--tol", a.cfg.tol, "Relative objective tolerance")->check(CLI::NonNegativeNumber);
    }
    if (online) {
        sub->add_option("--minibatch", a.cfg.minibatch_size, "Triplets per online update")->check(CLI::PositiveNumber);
        sub->add_option("--inner-iters", a.cfg.inner_iters, "EGD steps per online update")->check(CLI::PositiveNumber);
    }
}

std::optional<bw::BitWeights> maybe_weights(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return bw::io::load_weights(path);
}

void write_trace(const std::string& path, const std::vector<double>& trace) {
    if (path.empty()) return;
    std::string out = "step,objective\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out += std::to_string(i) + "," + bw::io::detail::format_double(trace[i]) + "\n";
    bw::io::detail::write_file(path, out);
}

std::vector<std::size_t> read_indices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::size_t> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = bw::io::detail::trim(line);
        if (t.empty()) continue;
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) throw bw::ParseError(lineno, path + ": not an index");
        out.push_back(v);
    }
    return out;
}

bw::ApMode ap_mode(const std::string& s) { return s == "11-point" ? bw::ApMode::ElevenPoint : bw::ApMode::AllPoint; }

// Expands "--config FILE" into --key=value arguments placed right after the
// subcommand, skipping keys that the command line sets itself.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    std::vector<std::string> extra;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = bw::io::detail::trim(line);
        if (t.empty() || t.front() == '#' || t.front() == '[') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw UsageError("config line without '=': " + std::string(t));
        std::string key(bw::io::detail::trim(t.substr(0, eq)));
        std::string value(bw::io::detail::trim(t.substr(eq + 1)));
        while (!key.empty() && key.front() == '-') key.erase(0, 1);
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        const std::string flag = "--" + key;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (!given) extra.push_back(flag + "=" + value);
    }
    const auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.empty() || a.front() != '-'; });
    const auto at = sub == args.end() ? args.begin() : sub + 1;
    args.insert(at, extra.begin(), extra.end());
    return args;
}

void print_config(const CLI::App* sub) {
    std::cerr << "# " << sub->get_name() << " configuration\n" << sub->config_to_str(true, false);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned per-bit weights for binary hash codes"};
    app.name("bitweight");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::uint64_t seed = 1;
    FeatureArgs features;
    std::string hash = "itq";
    std::size_t bits = 32;
    int itq_iters = 50;
    bool unit_variance = false;
    std::string out, model_path, codes_path, triplets_path, weights_path, init_path, text_out, trace_out;
    std::size_t count = 5000;
    LearnerArgs learner;

    auto add_hash_options = [&](CLI::App* sub) {
        sub->add_option("--hash", hash, "lsh or itq")->check(CLI::IsMember({"lsh", "itq"}));
        sub->add_option("--bits", bits, "Code length K")->check(CLI::Range(1, 1024));
        sub->add_option("--itq-iters", itq_iters, "ITQ iterations")->check(CLI::PositiveNumber);
        sub->add_flag("--unit-variance", unit_variance, "Scale features to unit variance before projecting");
    };
    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value file pre-seeding flags (flags win)");
    };

    auto* hash_train = app.add_subcommand("hash-train", "Train LSH or ITQ hash functions");
    add_config(hash_train);
    add_feature_options(hash_train, features);
    add_hash_options(hash_train);
    hash_train->add_option("--seed", seed, "Random seed");
    hash_train->add_option("--out", out, "Output model file")->required();

    auto* encode = app.add_subcommand("encode", "Encode features into a code database");
    add_config(encode);
    add_feature_options(encode, features);
    encode->add_option("--model", model_path, "Hash model file")->required();
    encode->add_option("--out", out, "Output code file")->required();

    auto* sample = app.add_subcommand("sample", "Sample ACDV triplets from labelled codes");
    add_config(sample);
    sample->add_option("--codes", codes_path, "Code database")->required();
    sample->add_option("--count", count, "Number of triplets")->check(CLI::PositiveNumber);
    sample->add_option("--seed", seed, "Random seed");
    sample->add_option("--out", out, "Output triplet file")->required();

    auto* train = app.add_subcommand("train", "Offline weight learning");
    add_config(train);
    train->add_option("--triplets", triplets_path, "Triplet file")->required();
    add_learner_options(train, learner, true, false);
    train->add_option("--init", init_path, "Initial weights (default all ones)");
    train->add_option("--seed", seed, "Run seed, echoed for the record");
    train->add_option("--out", out, "Output weight file")->required();
    train->add_option("--text-out", text_out, "Also write weights as text");
    train->add_option("--trace", trace_out, "Objective trace CSV");

    auto* train_online = app.add_subcommand("train-online", "Online passive-aggressive weight learning");
    add_config(train_online);
    train_online->add_option("--triplets", triplets_path, "Triplet file, streamed in minibatches")->required();
    add_learner_options(train_online, learner, false, true);
    train_online->add_option("--init", init_path, "Initial weights (default all ones)");
    train_online->add_option("--seed", seed, "Run seed, echoed for the record");
    train_online->add_option("--out", out, "Output weight file")->required();
    train_online->add_option("--text-out", text_out, "Also write weights as text");
    train_online->add_option("--trace", trace_out, "Per-update objective CSV");

    std::optional<std::size_t> query_index;
    std::string query_code;
    std::optional<std::size_t> radius;
    std::size_t limit = 10;
    auto* search = app.add_subcommand("search", "Rank a code database for one query");
    add_config(search);
    search->add_option("--codes", codes_path, "Code database")->required();
    search->add_option("--weights", weights_path, "Bit weights (default all ones)");
    auto* qi = search->add_option("--query-index", query_index, "Use database row as the query");
    search->add_option("--query-code", query_code, "Query as a 0/1 string, character k is bit k")->excludes(qi);
    search->add_option("--radius", radius, "Hamming radius filter (default K)");
    search->add_option("--limit", limit, "Results to print")->check(CLI::PositiveNumber);

    std::string queries_path, query_indices_path, ap = "all-point", pr_out, code_type = "unknown";
    bool include_self = false;
    auto* eval = app.add_subcommand("eval", "MAP and precision-recall over a query set");
    add_config(eval);
    eval->add_option("--codes", codes_path, "Code database")->required();
    eval->add_option("--weights", weights_path, "Bit weights (default plain Hamming)");
    auto* qf = eval->add_option("--queries", queries_path, "Query code file (labels used as ground truth)");
    eval->add_option("--query-indices", query_indices_path, "File of database row indices, one per line")->excludes(qf);
    eval->add_option("--ap-mode", ap, "all-point or 11-point")->check(CLI::IsMember({"all-point", "11-point"}));
    eval->add_flag("--include-self", include_self, "Keep a database query in its own ranking");
    eval->add_option("--code-type", code_type, "Label for the summary row");
    eval->add_option("--out", out, "Summary CSV (also printed)");
    eval->add_option("--pr-out", pr_out, "Mean precision-recall CSV");

    FeatureArgs test_features;
    std::size_t triplet_count = 5000;
    double query_fraction = 0.1;
    std::string mode = "offline", out_dir;
    auto* pipeline = app.add_subcommand("pipeline", "Hash, sample, learn and evaluate in one run");
    add_config(pipeline);
    add_feature_options(pipeline, features);
    add_feature_options(pipeline, test_features, "test-");
    add_hash_options(pipeline);
    pipeline->add_option("--triplets", triplet_count, "Number of training triplets")->check(CLI::PositiveNumber);
    pipeline->add_option("--mode", mode, "offline or online")->check(CLI::IsMember({"offline", "online"}));
    add_learner_options(pipeline, learner, true, true);
    pipeline->add_option("--query-fraction", query_fraction, "Fraction of each test class used as queries")->check(CLI::Range(0.0, 1.0));
    pipeline->add_option("--ap-mode", ap, "all-point or 11-point")->check(CLI::IsMember({"all-point", "11-point"}));
    pipeline->add_option("--seed", seed, "Run seed");
    pipeline->add_option("--out-dir", out_dir, "Directory for all stage outputs");

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    print_config(sub);

    try {
        if (sub == hash_train) {
            const bw::FeatureMatrix fm = load_features(features, features.label_column);
            const bw::HashOptions opts{unit_variance};
            const bw::HashModel m = hash == "lsh" ? bw::train_lsh(fm, bits, seed, opts) : bw::train_itq(fm, bits, itq_iters, seed, opts);
            bw::io::save_model(out, m);
        } else if (sub == encode) {
            const bw::HashModel m = bw::io::load_model(model_path);
            bw::io::save_codes(out, bw::encode(m, load_features(features, features.label_column)));
        } else if (sub == sample) {
            const bw::CodeDatabase db = bw::io::load_codes(codes_path);
            bw::io::save_triplets(out, bw::sample_triplets(db, count, seed));
        } else if (sub == train) {
            const bw::TrainResult r = bw::train_offline(bw::io::load_triplets(triplets_path), learner.resolved(), maybe_weights(init_path));
            bw::io::save_weights(out, r.weights);
            if (!text_out.empty()) bw::io::save_weights_text(text_out, r.weights);
            write_trace(trace_out, r.trace);
            std::cerr << "iterations " << r.iterations << ", objective " << r.trace.front() << " -> " << r.trace.back() << "\n";
        } else if (sub == train_online) {
            bw::io::TripletChunks chunks(triplets_path, learner.cfg.minibatch_size);
            std::optional<bw::BitWeights> w0 = maybe_weights(init_path);
            if (!w0) w0 = bw::BitWeights::ones(chunks.bits());
            const bw::OnlineResult r = bw::train_online(chunks, learner.resolved(), std::move(w0));
            bw::io::save_weights(out, r.weights);
            if (!text_out.empty()) bw::io::save_weights_text(text_out, r.weights);
            write_trace(trace_out, r.trace);
            std::cerr << "updates " << r.updates << "\n";
        } else if (sub == search) {
            const bw::CodeDatabase db = bw::io::load_codes(codes_path);
            const bw::BitWeights w = weights_path.empty() ? bw::BitWeights::ones(db.bits()) : bw::io::load_weights(weights_path);
            bw::BinaryCode q(db.bits());
            if (query_index) {
                q = bw::BinaryCode(db.code(*query_index));
            } else if (!query_code.empty()) {
                q = bw::BinaryCode::from_string(query_code);
            } else {
                throw UsageError("search needs --query-index or --query-code");
            }
            const bw::RankedList r = bw::search(q, db, w, radius.value_or(db.bits()), limit);
            std::cout << "rank,index,score,label\n";
            for (std::size_t i = 0; i < r.size(); ++i) {
                const auto& e = r.entries[i];
                std::cout << i + 1 << "," << e.index << "," << bw::io::detail::format_double(e.score) << "," << db.label(e.index) << "\n";
            }
        } else if (sub == eval) {
            const bw::CodeDatabase db = bw::io::load_codes(codes_path);
            std::vector<bw::Query> queries;
            if (!queries_path.empty()) {
                const bw::CodeDatabase qdb = bw::io::load_codes(queries_path);
                for (std::size_t i = 0; i < qdb.size(); ++i) queries.push_back({bw::BinaryCode(qdb.code(i)), qdb.label(i), std::nullopt});
            } else if (!query_indices_path.empty()) {
                queries = bw::queries_from_db(db, read_indices(query_indices_path));
            } else {
                throw UsageError("eval needs --queries or --query-indices");
            }
            bw::EvalOptions opts;
            opts.ap_mode = ap_mode(ap);
            opts.exclude_self = !include_self;
            bw::EvalReport rep = bw::evaluate(queries, db, maybe_weights(weights_path), opts);
            rep.code_type = code_type;
            const std::string csv = bw::io::summary_csv({rep});
            std::cout << csv;
            if (!out.empty()) bw::io::detail::write_file(out, csv);
            if (!pr_out.empty()) bw::io::save_pr_csv(pr_out, rep.mean_curve);
        } else if (sub == pipeline) {
            bw::PipelineConfig cfg;
            cfg.hash = hash == "lsh" ? bw::HashKind::Lsh : bw::HashKind::Itq;
            cfg.bits = bits;
            cfg.itq_iters = itq_iters;
            cfg.unit_variance = unit_variance;
            cfg.triplets = triplet_count;
            cfg.query_fraction = query_fraction;
            cfg.mode = mode == "online" ? bw::TrainingMode::Online : bw::TrainingMode::Offline;
            cfg.learner = learner.resolved();
            cfg.eval.ap_mode = ap_mode(ap);
            cfg.seed = seed;
            const bw::FeatureMatrix all = load_features(features, features.label_column);
            const bw::PipelineResult r = has_features(test_features)
                                             ? bw::run_pipeline(all, load_features(test_features, features.label_column), cfg)
                                             : bw::run_pipeline(all, cfg);
            if (!out_dir.empty()) bw::save_pipeline_outputs(out_dir, r);
            std::cout << bw::io::summary_csv({r.hamming, r.weighted});
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << sub->help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
