#include "mannfix/model_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace mannfix {

using nlohmann::json;

namespace {

std::string index_path(const std::string& base, const char* key, std::size_t i) {
    return base + (base.empty() ? "" : ".") + key + "[" + std::to_string(i) + "]";
}

Action read_action(const json& node, const std::string& path, std::vector<Violation>& out) {
    Action action;
    if (!node.is_object()) {
        out.push_back({path, "action must be an object"});
        return action;
    }
    if (auto it = node.find("reward"); it == node.end())
        out.push_back({path + ".reward", "missing"});
    else if (!it->is_number())
        out.push_back({path + ".reward", "must be a number"});
    else
        action.reward = it->get<double>();

    auto it = node.find("transitions");
    if (it == node.end()) return action; // no successors: terminates surely
    if (!it->is_array()) {
        out.push_back({path + ".transitions", "must be an array"});
        return action;
    }
    for (std::size_t k = 0; k < it->size(); ++k) {
        const json& entry = (*it)[k];
        const std::string tpath = index_path(path, "transitions", k);
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() || !entry[1].is_number()) {
            out.push_back({tpath, "transition must be [target_index, probability]"});
            continue;
        }
        if (entry[0].get<long long>() < 0) {
            out.push_back({tpath, "target index must be >= 0"});
            continue;
        }
        action.transitions.push_back({entry[0].get<std::size_t>(), entry[1].get<double>()});
    }
    return action;
}

} // namespace

Ssg parse_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidModel(std::vector<Violation>{{"$", std::string("malformed JSON: ") + e.what()}});
    }
    std::vector<Violation> out;
    if (!doc.is_object() || !doc.contains("states") || !doc["states"].is_array())
        throw InvalidModel(std::vector<Violation>{{"states", "top-level object with a \"states\" array required"}});

    const json& states_node = doc["states"];
    std::vector<State> states(states_node.size());
    for (std::size_t s = 0; s < states_node.size(); ++s) {
        const json& node = states_node[s];
        const std::string path = index_path("", "states", s);
        if (!node.is_object()) {
            out.push_back({path, "state must be an object"});
            continue;
        }
        auto player = node.find("player");
        if (player == node.end() || !player->is_string() ||
            (player->get<std::string>() != "max" && player->get<std::string>() != "min"))
            out.push_back({path + ".player", "must be \"max\" or \"min\""});
        else
            states[s].player = player->get<std::string>() == "max" ? Player::Max : Player::Min;

        auto actions = node.find("actions");
        if (actions == node.end()) continue;
        if (!actions->is_array()) {
            out.push_back({path + ".actions", "must be an array"});
            continue;
        }
        for (std::size_t a = 0; a < actions->size(); ++a)
            states[s].actions.push_back(read_action((*actions)[a], index_path(path, "actions", a), out));
    }
    Ssg game(std::move(states));
    for (auto& v : validate_ssg(game)) out.push_back(std::move(v));
    if (!out.empty()) throw InvalidModel(std::move(out));
    return game;
}

Ssg load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_model(buffer.str());
}

std::string model_to_json(const Ssg& game, int indent) {
    json states = json::array();
    for (const auto& state : game.states()) {
        json actions = json::array();
        for (const auto& action : state.actions) {
            json transitions = json::array();
            for (const auto& t : action.transitions) transitions.push_back({t.target, t.prob});
            actions.push_back({{"reward", action.reward}, {"transitions", transitions}});
        }
        states.push_back({{"player", to_string(state.player)}, {"actions", actions}});
    }
    return json{{"states", states}}.dump(indent);
}

void save_model(const Ssg& game, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
    out << model_to_json(game) << '\n';
}

} // namespace mannfix
