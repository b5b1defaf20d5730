#include "mannfix/analysis.hpp"
#include "mannfix/experiments.hpp"
#include "mannfix/iteration.hpp"
#include "mannfix/model_io.hpp"
#include "mannfix/sampling.hpp"
#include "mannfix/scheme.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mannfix;

namespace {

py::dict trajectory_dict(const Trajectory& t) {
    py::dict d;
    d["steps"] = t.steps;
    d["errors"] = t.errors;
    d["max_change"] = t.max_change;
    d["alpha_min"] = t.alpha_min;
    d["beta_min"] = t.beta_min;
    d["iterates"] = t.iterates;
    d["final_value"] = t.final_value;
    d["steps_taken"] = t.steps_taken;
    d["reason"] = to_string(t.reason);
    return d;
}

StoppingRule make_stop(std::size_t max_steps, std::optional<double> change, std::optional<double> error) {
    StoppingRule s;
    s.max_steps = max_steps;
    s.change_threshold = change;
    s.error_threshold = error;
    return s;
}

py::object policy_list(const std::optional<Policy>& p) {
    if (!p) return py::none();
    return py::cast(p->choice);
}

} // namespace

PYBIND11_MODULE(_mannfix, m) {
    m.doc() = "Dampened Mann iteration for stochastic games";

    py::class_<Scheme>(m, "Scheme")
        .def_static("parse", &Scheme::parse)
        .def("__call__", &Scheme::operator())
        .def("to_string", &Scheme::to_string)
        .def("__repr__", [](const Scheme& s) { return "Scheme('" + s.to_string() + "')"; })
        .def("progressing", [](const Scheme& s) { return s.declared_flags().progressing; });
    m.def("table_scheme", &table_scheme, py::arg("index"), py::arg("uniform_seed") = 0);
    m.def("synthesize_scheme", [](std::function<double(std::size_t)> eps) { return synthesize_scheme(std::move(eps)); });

    py::enum_<Player>(m, "Player").value("MAX", Player::Max).value("MIN", Player::Min);

    py::class_<Ssg>(m, "Ssg")
        .def("__len__", &Ssg::size)
        .def("action_count", &Ssg::action_count)
        .def("pair_count", &Ssg::pair_count)
        .def("is_chain", &Ssg::is_chain)
        .def("player", [](const Ssg& g, std::size_t s) { return g.state(s).player; })
        .def("with_scaled_rewards", &Ssg::with_scaled_rewards)
        .def("to_json", &model_to_json, py::arg("indent") = 2);
    m.def("parse_model", &parse_model);
    m.def("load_model", &load_model);

    py::register_exception<InvalidModel>(m, "InvalidModel", PyExc_ValueError);
    py::register_exception<BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);

    m.def("bellman_apply", &bellman_apply);
    m.def("state_action_bellman_apply", &state_action_bellman_apply);
    m.def("split_state_action", &split_state_action);
    m.def("k_step_apply", [](const Ssg& g, std::size_t k, const ValueVector& v) { return k_step_operator(g, k)(v); });
    m.def("mann_step", &mann_step);

    m.def("classify_chain", [](const Ssg& chain) {
        std::vector<std::string> out;
        for (auto label : classify_chain(chain).labels) out.emplace_back(to_string(label));
        return out;
    });
    m.def(
        "exact_value",
        [](const Ssg& g, std::size_t budget) {
            const auto r = exact_ssg_value(g, budget);
            py::dict d;
            d["value"] = r.value;
            d["min_policy"] = policy_list(r.min_policy);
            d["max_policy"] = policy_list(r.max_policy);
            d["method"] = to_string(r.method);
            return d;
        },
        py::arg("game"), py::arg("budget") = 1'000'000);
    m.def(
        "kleene",
        [](const Ssg& g, double threshold, std::size_t max_steps) {
            const auto r = kleene_iterate(bellman_operator(g), g.size(), threshold, max_steps);
            return py::make_tuple(r.value, r.converged, r.steps);
        },
        py::arg("game"), py::arg("threshold") = 1e-12, py::arg("max_steps") = 100000);

    m.def(
        "iterate_game",
        [](const Ssg& g, const Scheme& scheme, const ValueVector& x0, std::size_t max_steps,
           std::optional<double> change_threshold, std::optional<double> error_threshold,
           std::optional<ValueVector> reference, const std::string& mode, std::uint64_t seed) {
            const auto f = OperatorProvider::constant(bellman_operator(g), ZeroBox::unbounded(g.size()));
            const auto stop = make_stop(max_steps, change_threshold, error_threshold);
            RecordOptions rec;
            rec.dense_until = max_steps;
            if (mode == "full") return trajectory_dict(iterate(f, scheme, x0, stop, reference, rec));
            if (mode == "random-chaotic")
                return trajectory_dict(random_chaotic_iterate(f, scheme, seed, x0, stop, reference, rec));
            if (mode == "chaotic") {
                const std::size_t d = g.size();
                const IndexSetSequence rr = [d](std::size_t n) { return IndexSet{n % d}; };
                return trajectory_dict(
                    chaotic_iterate(f, VectorScheme::local_counter(scheme, d, rr), rr, x0, stop, reference, rec));
            }
            throw std::invalid_argument("mode must be full, chaotic or random-chaotic");
        },
        py::arg("game"), py::arg("scheme"), py::arg("x0"), py::arg("max_steps") = 1000,
        py::arg("change_threshold") = py::none(), py::arg("error_threshold") = py::none(),
        py::arg("reference") = py::none(), py::arg("mode") = "full", py::arg("seed") = 1);

    m.def(
        "iterate_scalar",
        [](std::function<double(std::size_t, double)> f, const Scheme& scheme, double x0, std::size_t max_steps,
           double bound) {
            const OperatorProvider p(ZeroBox{{bound}}, [f](std::size_t n, const ValueVector& x) {
                return ValueVector{f(n, x[0])};
            });
            RecordOptions rec;
            rec.dense_until = max_steps;
            return trajectory_dict(iterate(p, scheme, {x0}, make_stop(max_steps, {}, {}), std::nullopt, rec));
        },
        py::arg("f"), py::arg("scheme"), py::arg("x0"), py::arg("max_steps") = 1000,
        py::arg("bound") = kInfinity);

    py::class_<Sampler>(m, "Sampler")
        .def(py::init<Ssg>())
        .def("observe", [](Sampler& s, std::size_t state, std::size_t action, std::uint64_t seed) {
            Rng rng(seed);
            s.observe(state, action, rng);
        })
        .def("batch_observe", [](Sampler& s, std::size_t k, std::uint64_t seed) {
            Rng rng(seed);
            s.batch_observe(k, rng);
        })
        .def("empirical_ssg", &Sampler::empirical_ssg)
        .def("empirical_bellman_apply", &Sampler::empirical_bellman_apply)
        .def("validity_violations", [](const Sampler& s) {
            return sampling_validity_check(s.empirical_ssg(), s.prior(), s.truth()).size();
        })
        .def("observations", [](const Sampler& s) { return s.state().steps; })
        .def("counts_to_json", &Sampler::counts_to_json)
        .def("load_counts_json", &Sampler::load_counts_json);

    m.def(
        "generate_game",
        [](std::size_t min_states, std::size_t max_states, std::size_t max_actions, std::uint64_t seed) {
            GeneratorConfig cfg;
            cfg.min_states = min_states;
            cfg.max_states = max_states;
            cfg.max_actions = max_actions;
            cfg.validate();
            std::mt19937_64 rng(seed);
            auto g = generate_random_ssg(cfg, rng);
            return py::make_tuple(std::move(g.game), std::move(g.reference));
        },
        py::arg("min_states") = 15, py::arg("max_states") = 15, py::arg("max_actions") = 5, py::arg("seed") = 1);

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& mode) {
            const auto cfg = config_json.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(config_json);
            const auto games = generate_games(cfg);
            const auto schemes = resolve_schemes(cfg);
            std::vector<RunRecord> recs;
            if (mode == "full" || mode == "both") recs = run_full_experiment(games, schemes, cfg.run);
            if (mode == "chaotic" || mode == "both") {
                auto c = run_chaotic_experiment(games, schemes, cfg.run);
                recs.insert(recs.end(), c.begin(), c.end());
            }
            py::list rows;
            for (const auto& r : aggregate(recs)) {
                py::dict d;
                d["scheme"] = r.scheme;
                d["mode"] = to_string(r.mode);
                d["step"] = r.step;
                d["mean"] = r.mean;
                d["p25"] = r.p25;
                d["p75"] = r.p75;
                d["min"] = r.min;
                d["max"] = r.max;
                rows.append(d);
            }
            return rows;
        },
        py::arg("config_json") = "", py::arg("mode") = "both");
}
