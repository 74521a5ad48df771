#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "fairsample/graph.hpp"

namespace fairsample {

// Shortest round-trip decimal form; reloading reproduces the exact double,
// and re-serializing a loaded file reproduces the exact bytes.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  detail::require(res.ec == std::errc(), "format_double: conversion failed");
  return std::string(buf, res.ptr);
}

namespace io_detail {

inline double parse_double(const std::string& tok, const std::string& where) {
  double out = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  detail::require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(),
                  where + ": malformed number '" + tok + "'");
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace io_detail

struct GraphFiles {
  std::string edge_path;
  std::string feature_path;
  std::string meta_path;

  static GraphFiles from_prefix(const std::string& prefix) {
    return {prefix + ".edges.tsv", prefix + ".features.csv", prefix + ".meta.json"};
  }
};

/// Load and validate a graph from its three files. Node ids are assigned
/// densely in feature-file order; the edge file refers to the external ids.
inline AttributedGraph load_graph(const std::string& edge_path, const std::string& feature_path,
                                  const std::string& meta_path) {
  std::ifstream meta_in(meta_path);
  detail::require(meta_in.good(), "cannot open meta file " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(meta_in);
  detail::require(meta.contains("sensitive_domain_size") && meta.contains("feature_dim"),
                  meta_path + ": missing sensitive_domain_size or feature_dim");
  const int zeta = meta["sensitive_domain_size"].get<int>();
  const int d = meta["feature_dim"].get<int>();
  const std::string name = meta.value("name", "");

  std::ifstream feat_in(feature_path);
  detail::require(feat_in.good(), "cannot open feature file " + feature_path);
  std::string line;
  int lineno = 0;
  detail::require(static_cast<bool>(std::getline(feat_in, line)), feature_path + ": empty file");
  ++lineno;
  {
    std::string expected = "id,s,y";
    for (int j = 0; j < d; ++j) expected += ",f" + std::to_string(j);
    detail::require(io_detail::strip_cr(line) == expected,
                    feature_path + ":1: bad header, expected '" + expected + "'");
  }

  std::vector<std::string> node_ids;
  std::vector<int> sensitive;
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  std::map<std::string, int> id_map;
  while (std::getline(feat_in, line)) {
    ++lineno;
    line = io_detail::strip_cr(line);
    if (line.empty()) continue;
    const std::string where = feature_path + ":" + std::to_string(lineno);
    auto cells = io_detail::split(line, ',');
    detail::require(static_cast<int>(cells.size()) == d + 3, where + ": expected " +
                                                                 std::to_string(d + 3) + " cells");
    detail::require(!cells[0].empty(), where + ": empty node id");
    detail::require(id_map.emplace(cells[0], static_cast<int>(node_ids.size())).second,
                    where + ": duplicate node id '" + cells[0] + "'");
    node_ids.push_back(cells[0]);
    detail::require(!cells[1].empty(), where + ": node missing sensitive value");
    const double sv = io_detail::parse_double(cells[1], where);
    detail::require(sv >= 0 && sv == static_cast<int>(sv), where + ": sensitive value must be a non-negative integer");
    sensitive.push_back(static_cast<int>(sv));
    if (cells[2].empty()) {
      labels.push_back(-1);
    } else {
      const double y = io_detail::parse_double(cells[2], where);
      detail::require(y == 0.0 || y == 1.0, where + ": label must be 0 or 1");
      labels.push_back(static_cast<int>(y));
    }
    std::vector<double> feat(d);
    for (int j = 0; j < d; ++j) {
      feat[j] = io_detail::parse_double(cells[3 + j], where);
      detail::require(std::isfinite(feat[j]), where + ": non-finite feature value");
    }
    rows.push_back(std::move(feat));
  }
  detail::require(!rows.empty(), feature_path + ": no nodes");

  std::ifstream edge_in(edge_path);
  detail::require(edge_in.good(), "cannot open edge file " + edge_path);
  std::vector<std::pair<int, int>> edges;
  lineno = 0;
  while (std::getline(edge_in, line)) {
    ++lineno;
    line = io_detail::strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = edge_path + ":" + std::to_string(lineno);
    auto cells = io_detail::split(line, '\t');
    detail::require(cells.size() == 2, where + ": expected 'u<TAB>v'");
    auto u = id_map.find(cells[0]);
    auto v = id_map.find(cells[1]);
    detail::require(u != id_map.end(), where + ": edge references unknown node '" + cells[0] + "'");
    detail::require(v != id_map.end(), where + ": edge references unknown node '" + cells[1] + "'");
    detail::require(u->second != v->second, where + ": self-loop rejected");
    edges.emplace_back(u->second, v->second);
  }

  DenseTensor features = DenseTensor::from_rows(rows);
  return AttributedGraph(std::move(node_ids), std::move(edges), std::move(features),
                         std::move(sensitive), std::move(labels), zeta, name);
}

inline AttributedGraph load_graph(const GraphFiles& files) {
  return load_graph(files.edge_path, files.feature_path, files.meta_path);
}

inline void save_graph(const AttributedGraph& g, const GraphFiles& files) {
  {
    std::ofstream out(files.edge_path);
    detail::require(out.good(), "cannot write " + files.edge_path);
    for (const auto& [u, v] : g.edges()) out << g.node_id(u) << '\t' << g.node_id(v) << '\n';
  }
  {
    std::ofstream out(files.feature_path);
    detail::require(out.good(), "cannot write " + files.feature_path);
    out << "id,s,y";
    for (int j = 0; j < g.feature_dim(); ++j) out << ",f" << j;
    out << '\n';
    for (int v = 0; v < g.node_count(); ++v) {
      out << g.node_id(v) << ',' << g.group_of(v) << ',';
      if (g.has_label(v)) out << g.label(v);
      for (int j = 0; j < g.feature_dim(); ++j) out << ',' << format_double(g.features().at(v, j));
      out << '\n';
    }
  }
  {
    nlohmann::json meta;
    meta["sensitive_domain_size"] = g.sensitive_domain();
    meta["feature_dim"] = g.feature_dim();
    if (!g.name().empty()) meta["name"] = g.name();
    std::ofstream out(files.meta_path);
    detail::require(out.good(), "cannot write " + files.meta_path);
    out << meta.dump(2) << '\n';
  }
}

inline void save_split(const DataSplit& split, const std::string& path) {
  nlohmann::json j;
  j["train"] = split.train;
  j["validation"] = split.validation;
  j["test"] = split.test;
  j["seed"] = split.seed;
  std::ofstream out(path);
  detail::require(out.good(), "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline DataSplit load_split(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open split file " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  DataSplit s;
  s.train = j.at("train").get<std::vector<int>>();
  s.validation = j.at("validation").get<std::vector<int>>();
  s.test = j.at("test").get<std::vector<int>>();
  s.seed = j.value("seed", 0ULL);
  return s;
}

}  // namespace fairsample
