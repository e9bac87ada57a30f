#include "ssp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ssp::io {

namespace {

using nlohmann::json;

double checked_weight(const json& v, std::size_t pos) {
  if (!v.is_number()) throw ParseError("weights[" + std::to_string(pos) + "]: not a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError("weights[" + std::to_string(pos) + "]: not finite");
  return d;
}

}  // namespace

Signal parse_signal_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("top level: expected an object");
  std::string kind = j.value("kind", "");
  if (kind != "tree" && kind != "grid") throw ParseError("kind: expected \"tree\" or \"grid\"");
  if (!j.contains("weights") || !j["weights"].is_array())
    throw ParseError("weights: expected an array");

  Signal s;
  std::vector<double> w;
  w.reserve(j["weights"].size());
  for (std::size_t i = 0; i < j["weights"].size(); ++i)
    w.push_back(checked_weight(j["weights"][i], i));
  double p = j.value("p", 1.0);
  if (!(p >= 1.0)) throw ParseError("p: must be at least 1");

  if (kind == "tree") {
    s.kind = Signal::Kind::kTree;
    int b = j.value("b", 2);
    if (b < 2) throw ParseError("b: arity must be at least 2");
    if (w.empty()) throw ParseError("weights: tree must be nonempty");
    s.tree = tree::TreeSignal{std::move(w), b, p};
  } else {
    s.kind = Signal::Kind::kGrid;
    if (!j.contains("h") || !j.contains("w")) throw ParseError("grid: h and w are required");
    int h = j["h"].get<int>(), width = j["w"].get<int>();
    if (h < 1 || width < 1) throw ParseError("grid: h and w must be positive");
    if (static_cast<std::size_t>(h) * static_cast<std::size_t>(width) != w.size())
      throw ParseError("weights: length " + std::to_string(w.size()) + " does not match h*w");
    s.grid = cemd::GridSignal{h, width, std::move(w), p};
  }
  return s;
}

Signal parse_signal_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      double v = 0;
      auto begin = field.data();
      auto end = field.data() + field.size();
      while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
      while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc{} || ptr != end)
        throw ParseError("line " + std::to_string(lineno) + ": bad number \"" + field + "\"");
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty CSV input");

  Signal s;
  std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != width)
      throw ParseError("line " + std::to_string(r + 1) + ": expected " + std::to_string(width) +
                       " fields");
  if (width == 1) {
    s.kind = Signal::Kind::kTree;
    std::vector<double> w(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) w[r] = rows[r][0];
    s.tree = tree::TreeSignal{std::move(w), 2, 1.0};
  } else {
    s.kind = Signal::Kind::kGrid;
    std::vector<double> w;
    for (const auto& row : rows)
      for (double v : row) w.push_back(v);
    s.grid = cemd::GridSignal{static_cast<int>(rows.size()), static_cast<int>(width), std::move(w),
                              1.0};
  }
  return s;
}

std::string value_to_string(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string serialize_signal_json(const Signal& s) {
  json j;
  if (s.kind == Signal::Kind::kTree) {
    j["kind"] = "tree";
    j["b"] = s.tree.arity;
    j["p"] = s.tree.norm_p;
    j["weights"] = s.tree.weights;
  } else {
    j["kind"] = "grid";
    j["h"] = s.grid.h;
    j["w"] = s.grid.w;
    j["p"] = s.grid.norm_p;
    j["weights"] = s.grid.values;
  }
  return j.dump(2) + "\n";
}

std::string serialize_signal_csv(const Signal& s) {
  std::ostringstream out;
  char buf[64];
  if (s.kind == Signal::Kind::kTree) {
    for (double v : s.tree.weights) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << "\n";
    }
  } else {
    for (int r = 0; r < s.grid.h; ++r) {
      for (int c = 0; c < s.grid.w; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", s.grid.at(r, c));
        out << buf << (c + 1 == s.grid.w ? "\n" : ",");
      }
    }
  }
  return out.str();
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Signal load_signal(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (ends_with(path, ".csv")) return parse_signal_csv(buf.str());
  return parse_signal_json(buf.str());
}

void save_signal(const std::string& path, const Signal& s) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << (ends_with(path, ".csv") ? serialize_signal_csv(s) : serialize_signal_json(s));
}

}  // namespace ssp::io
