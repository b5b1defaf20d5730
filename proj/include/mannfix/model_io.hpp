#pragma once

#include "mannfix/ssg.hpp"

#include <string>

namespace mannfix {

// Model files are UTF-8 JSON:
//   {"states":[{"player":"max"|"min",
//               "actions":[{"reward":r,"transitions":[[target,p],...]}]}]}
// Loading validates and throws InvalidModel with one violation per problem,
// each carrying a path such as "states[3].actions[0].reward".

Ssg parse_model(const std::string& text);
Ssg load_model(const std::string& path);

std::string model_to_json(const Ssg& game, int indent = 2);
void save_model(const Ssg& game, const std::string& path);

} // namespace mannfix
