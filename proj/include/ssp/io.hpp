#pragma once

#include <string>

#include "ssp/cemd.hpp"
#include "ssp/tree.hpp"

namespace ssp::io {

// Parsed signal file: a level-order tree or an h x w grid.
struct Signal {
  enum class Kind { kTree, kGrid };
  Kind kind = Kind::kTree;
  tree::TreeSignal tree;
  cemd::GridSignal grid;
};

// Parse errors carry a line/field diagnostic in what().
struct ParseError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// JSON object {kind, b|h/w, p, weights: flat array}; CSV is one value per
// line for trees and one comma-separated row per grid row.
Signal parse_signal_json(const std::string& text);
Signal parse_signal_csv(const std::string& text);
std::string serialize_signal_json(const Signal& s);
std::string serialize_signal_csv(const Signal& s);

// Dispatch on the .json / .csv extension.
Signal load_signal(const std::string& path);
void save_signal(const std::string& path, const Signal& s);

// Exact decimal serialization for result values: integers print without a
// fractional part, anything else with round-trip precision.
std::string value_to_string(double v);

}  // namespace ssp::io
