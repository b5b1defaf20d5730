// Command line front end: iterate, classify, solve, experiment, generate.

#include "mannfix/analysis.hpp"
#include "mannfix/experiments.hpp"
#include "mannfix/iteration.hpp"
#include "mannfix/model_io.hpp"
#include "mannfix/scheme.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#ifndef MANNFIX_VERSION
#define MANNFIX_VERSION "unknown"
#endif

using namespace mannfix;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string number(double x) {
    if (std::isnan(x)) return "";
    if (std::isinf(x)) return "inf";
    return fmt::format("{:.12g}", x);
}

json json_number(double x) { return std::isinf(x) ? json("inf") : json(x); }

json json_values(const ValueVector& v) {
    json out = json::array();
    for (double x : v) out.push_back(json_number(x));
    return out;
}

json json_policy(const std::optional<Policy>& p) {
    if (!p) return nullptr;
    json out = json::array();
    for (const auto& c : p->choice) out.push_back(c ? json(*c) : json(nullptr));
    return out;
}

/// Either a JSON array or whitespace-separated numbers.
ValueVector read_vector(const std::string& path) {
    const std::string text = read_text(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    ValueVector v;
    if (first != std::string::npos && text[first] == '[') {
        for (const auto& x : json::parse(text)) v.push_back(x.get<double>());
    } else {
        std::istringstream in(text);
        double x;
        while (in >> x) v.push_back(x);
        if (!in.eof()) throw std::runtime_error("'" + path + "' is not a list of numbers");
    }
    return v;
}

/// Exact value when policy enumeration fits the budget, else tight Kleene.
ValueVector reference_for(const Ssg& game, std::string& how) {
    try {
        how = "policy enumeration";
        return exact_ssg_value(game).value;
    } catch (const BudgetExceeded&) {
        how = "Kleene iteration";
        return reference_value(game);
    }
}

void print_violations(const InvalidModel& e) {
    std::cerr << "invalid model:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v.path << ": " << v.message << '\n';
}

// Table names S1..S6 or the alpha=...,beta=... grammar.
Scheme parse_scheme_arg(const std::string& text) {
    if (text.size() == 2 && text[0] == 'S' && text[1] >= '1' && text[1] <= '6') return table_scheme(text[1] - '0');
    return Scheme::parse(text);
}

struct IterateArgs {
    std::string model, scheme, x0 = "zero", mode = "full", out;
    std::size_t max_steps = 1000;
    std::optional<double> threshold;
    std::uint64_t seed = 1;
};

int run_iterate(const IterateArgs& a) {
    const Ssg game = load_model(a.model);
    const Scheme scheme = parse_scheme_arg(a.scheme);
    const std::size_t d = game.size();
    ValueVector x0 = a.x0 == "zero" ? ValueVector(d, 0.0) : read_vector(a.x0);
    require_dimension("--x0", d, x0.size());

    std::string how;
    const ValueVector reference = reference_for(game, how);
    const auto provider = OperatorProvider::constant(bellman_operator(game), ZeroBox::unbounded(d));
    StoppingRule stop;
    stop.max_steps = a.max_steps;
    stop.change_threshold = a.threshold;
    RecordOptions record;
    record.dense_until = a.max_steps;
    record.iterates = false;

    Trajectory t;
    if (a.mode == "full") {
        t = iterate(provider, scheme, x0, stop, reference, record);
    } else if (a.mode == "chaotic") {
        const IndexSetSequence round_robin = [d](std::size_t n) { return IndexSet{n % d}; };
        t = chaotic_iterate(provider, VectorScheme::local_counter(scheme, d, round_robin), round_robin, x0, stop,
                            reference, record);
    } else {
        t = random_chaotic_iterate(provider, scheme, a.seed, x0, stop, reference, record);
    }

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw std::runtime_error("cannot write '" + a.out + "'");
    }
    std::ostream& out = a.out.empty() ? std::cout : file;
    out << "step,error,max_change,alpha_min,beta_min\n";
    for (std::size_t k = 0; k < t.size(); ++k)
        out << t.steps[k] << ',' << number(t.errors[k]) << ',' << number(t.max_change[k]) << ','
            << number(t.alpha_min[k]) << ',' << number(t.beta_min[k]) << '\n';
    std::cerr << fmt::format("{} steps, stopped by {}, final error {} (reference by {})\n", t.steps_taken,
                             to_string(t.reason), number(t.errors.back()), how);
    return 0;
}

int run_classify(const std::string& model) {
    const Ssg chain = load_model(model);
    const auto c = classify_chain(chain);
    const auto v = exact_chain_value(chain).value;
    std::cout << "state,label,essential,value\n";
    for (std::size_t s = 0; s < chain.size(); ++s)
        std::cout << s << ',' << to_string(c.labels[s]) << ',' << (c.essential[s] ? "yes" : "no") << ','
                  << number(v[s]) << '\n';
    return 0;
}

int run_solve(const std::string& model, const std::string& method, std::size_t budget, double threshold,
              std::size_t max_steps) {
    const Ssg game = load_model(model);
    json out;
    if (method == "enum") {
        const auto r = exact_ssg_value(game, budget);
        out = {{"method", to_string(r.method)},
               {"value", json_values(r.value)},
               {"min_policy", json_policy(r.min_policy)},
               {"max_policy", json_policy(r.max_policy)}};
    } else {
        const auto r = kleene_iterate(bellman_operator(game), game.size(), threshold, max_steps);
        out = {{"method", "kleene"}, {"value", json_values(r.value)}, {"converged", r.converged}, {"steps", r.steps}};
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

int run_experiment(const std::string& config_path, const std::string& mode, const std::string& out_dir,
                   bool paper_scale) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_text(config_path));
    if (paper_scale) cfg.apply_paper_scale();
    cfg.generator.validate();
    fs::create_directories(out_dir);

    const auto games = generate_games(cfg);
    const auto schemes = resolve_schemes(cfg);
    std::vector<RunRecord> records;
    if (mode == "full" || mode == "both") records = run_full_experiment(games, schemes, cfg.run);
    if (mode == "chaotic" || mode == "both") {
        auto chaotic = run_chaotic_experiment(games, schemes, cfg.run);
        records.insert(records.end(), std::make_move_iterator(chaotic.begin()), std::make_move_iterator(chaotic.end()));
    }
    write_records_csv(records, (fs::path(out_dir) / "records.csv").string());
    write_aggregate_csv(aggregate(records), (fs::path(out_dir) / "aggregate.csv").string());
    if (cfg.run.per_state_errors) write_state_errors_csv(records, (fs::path(out_dir) / "state_errors.csv").string());

    json meta;
    meta["config"] = json::parse(cfg.to_json());
    meta["mode"] = mode;
    meta["seeds"] = cfg.run.seeds;
    meta["generator"] = meta["config"]["generator"];
    json scheme_list = json::array();
    for (const auto& s : schemes) scheme_list.push_back({{"name", s.name}, {"spec", s.scheme.to_string()}});
    meta["schemes"] = scheme_list;
    meta["games"] = games.size();
    meta["error_norm"] = "sup";
    meta["versions"] = {{"mannfix", MANNFIX_VERSION}, {"compiler", __VERSION__}, {"nlohmann_json",
        fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)}};
    std::ofstream(fs::path(out_dir) / "meta.json") << meta.dump(2) << '\n';
    std::cerr << fmt::format("{} games, {} schemes, {} records written to {}\n", games.size(), schemes.size(),
                             records.size(), out_dir);
    return 0;
}

int run_generate(const std::string& config_path, std::size_t count, const std::string& out_dir) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_text(config_path));
    cfg.generator.validate();
    fs::create_directories(out_dir);
    std::mt19937_64 rng(cfg.generator.seed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto g = generate_random_ssg(cfg.generator, rng);
        save_model(g.game, (fs::path(out_dir) / fmt::format("game_{:03}.json", i)).string());
        std::ofstream(fs::path(out_dir) / fmt::format("game_{:03}.value.json", i)) << json_values(g.reference).dump()
                                                                                  << '\n';
        std::cerr << fmt::format("game {}: {} states, {} attempts\n", i, g.game.size(), g.stats.attempts);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dampened Mann iteration for stochastic games"};
    app.set_version_flag("--version", MANNFIX_VERSION);
    app.require_subcommand(1);

    IterateArgs it;
    auto* iterate_cmd = app.add_subcommand("iterate", "Run one iteration on a model and write its error curve");
    iterate_cmd->add_option("--model", it.model, "Model file (JSON)")->required()->check(CLI::ExistingFile);
    iterate_cmd->add_option("--scheme", it.scheme, "S1..S6 or e.g. alpha=const:0.5,beta=harmonic")->required();
    iterate_cmd->add_option("--x0", it.x0, "zero, or a file with one value per state")->capture_default_str();
    iterate_cmd->add_option("--max-steps", it.max_steps)->capture_default_str();
    iterate_cmd->add_option("--threshold", it.threshold, "Stop once the sup-norm change is below this");
    iterate_cmd->add_option("--mode", it.mode)
        ->check(CLI::IsMember({"full", "chaotic", "random-chaotic"}))
        ->capture_default_str();
    iterate_cmd->add_option("--seed", it.seed, "Component selection seed (random-chaotic)")->capture_default_str();
    iterate_cmd->add_option("--out", it.out, "CSV output (default stdout)");

    std::string model;
    auto* classify_cmd = app.add_subcommand("classify", "Classify the states of a Markov chain");
    classify_cmd->add_option("--model", model)->required()->check(CLI::ExistingFile);

    std::string method = "enum";
    std::size_t budget = 1'000'000, max_steps = 100'000;
    double threshold = 1e-12;
    auto* solve_cmd = app.add_subcommand("solve", "Value and optimal policies of a model as JSON");
    solve_cmd->add_option("--model", model)->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--method", method)->check(CLI::IsMember({"enum", "kleene"}))->capture_default_str();
    solve_cmd->add_option("--budget", budget, "Joint policy limit for enum")->capture_default_str();
    solve_cmd->add_option("--threshold", threshold, "Kleene change threshold")->capture_default_str();
    solve_cmd->add_option("--max-steps", max_steps, "Kleene step limit")->capture_default_str();

    std::string config, mode = "both", out_dir;
    bool paper_scale = false;
    auto* experiment_cmd = app.add_subcommand("experiment", "Run the sampled-game experiments");
    experiment_cmd->add_option("--config", config, "Experiment config (JSON); defaults if omitted")
        ->check(CLI::ExistingFile);
    experiment_cmd->add_option("--mode", mode)->check(CLI::IsMember({"full", "chaotic", "both"}))->capture_default_str();
    experiment_cmd->add_option("--out-dir", out_dir)->required();
    experiment_cmd->add_flag("--paper-scale", paper_scale, "Use the published number of games");

    std::size_t count = 1;
    auto* generate_cmd = app.add_subcommand("generate", "Write random normalized games as model files");
    generate_cmd->add_option("--config", config)->check(CLI::ExistingFile);
    generate_cmd->add_option("--count", count)->capture_default_str();
    generate_cmd->add_option("--out-dir", out_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*iterate_cmd) return run_iterate(it);
        if (*classify_cmd) return run_classify(model);
        if (*solve_cmd) return run_solve(model, method, budget, threshold, max_steps);
        if (*experiment_cmd) return run_experiment(config, mode, out_dir, paper_scale);
        if (*generate_cmd) return run_generate(config, count, out_dir);
    } catch (const InvalidModel& e) {
        print_violations(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
