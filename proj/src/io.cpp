#include "mfgmm/io.hpp"

#include "mfgmm/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mfgmm::io {

namespace {

double number(const json &j, const std::string &where) {
  if (!j.is_number())
    throw ConfigError(fmt::format("{}: expected a number", where));
  return j.get<double>();
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

bool parse_double(std::string s, double &out) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' '))
    s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ')
    ++b;
  const char *first = s.data() + b;
  const char *last = s.data() + s.size();
  if (first == last)
    return false;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

} // namespace

const json &field(const json &j, const std::string &name,
                  const std::string &where) {
  if (!j.is_object() || !j.contains(name))
    throw ConfigError(fmt::format("{}: missing field '{}'", where, name));
  return j.at(name);
}

json matrix_json(const MatrixXd &m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int c = 0; c < m.cols(); ++c)
      r.push_back(m(i, c));
    rows.push_back(r);
  }
  return rows;
}

json vector_json(const VectorXd &v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i)
    a.push_back(v[i]);
  return a;
}

MatrixXd matrix_from_json(const json &j, const std::string &where) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ConfigError(fmt::format("{}: expected an array of rows", where));
  const auto rows = j.size(), cols = j.front().size();
  MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ConfigError(
          fmt::format("{}: row {} has the wrong length", where, i + 1));
    for (std::size_t c = 0; c < cols; ++c)
      m(i, c) = number(j[i][c], fmt::format("{}[{}][{}]", where, i + 1, c + 1));
  }
  return m;
}

VectorXd vector_from_json(const json &j, const std::string &where) {
  if (!j.is_array())
    throw ConfigError(fmt::format("{}: expected an array", where));
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[i] = number(j[i], fmt::format("{}[{}]", where, i + 1));
  return v;
}

namespace {

json components_json(const VectorXd &w, const std::vector<VectorXd> &means,
                     const std::vector<MatrixXd> &precisions) {
  json j;
  j["weights"] = vector_json(w);
  j["means"] = json::array();
  for (const auto &m : means)
    j["means"].push_back(vector_json(m));
  j["precisions"] = json::array();
  for (const auto &p : precisions)
    j["precisions"].push_back(matrix_json(p));
  return j;
}

template <typename T> void read_components(const json &j, const std::string &where, T &out) {
  out.weights = vector_from_json(field(j, "weights", where), where + ".weights");
  const json &means = field(j, "means", where);
  const json &precs = field(j, "precisions", where);
  if (!means.is_array() || !precs.is_array())
    throw ConfigError(fmt::format("{}: means and precisions must be arrays", where));
  for (std::size_t k = 0; k < means.size(); ++k)
    out.means.push_back(
        vector_from_json(means[k], fmt::format("{}.means[{}]", where, k + 1)));
  for (std::size_t k = 0; k < precs.size(); ++k) {
    const std::string w = fmt::format("{}.precisions[{}]", where, k + 1);
    // scalars are accepted for one-dimensional data
    if (precs[k].is_number())
      out.precisions.push_back(MatrixXd::Constant(1, 1, number(precs[k], w)));
    else
      out.precisions.push_back(matrix_from_json(precs[k], w));
  }
}

} // namespace

json to_json(const ModelPoint &xi) {
  return components_json(xi.weights, xi.means, xi.precisions);
}

ModelPoint point_from_json(const json &j) {
  ModelPoint xi;
  read_components(j, "point", xi);
  xi.validate();
  return xi;
}

json to_json(const TrueMixture &tm) {
  json j = components_json(tm.weights, tm.means, tm.precisions);
  j["classSizes"] = tm.classSizes;
  json labels = json::array();
  for (int z : tm.trueLabels)
    labels.push_back(z + 1);
  j["trueLabels"] = labels;
  return j;
}

TrueMixture truth_from_json(const json &j) {
  TrueMixture tm;
  read_components(j, "truth", tm);
  if (j.contains("trueLabels")) {
    const json &l = j.at("trueLabels");
    if (!l.is_array())
      throw ConfigError("truth.trueLabels: expected an array");
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (!l[i].is_number_integer())
        throw ConfigError(fmt::format("truth.trueLabels[{}]: expected an integer", i + 1));
      tm.trueLabels.push_back(l[i].get<int>() - 1);
    }
  }
  if (j.contains("classSizes")) {
    const json &c = j.at("classSizes");
    if (!c.is_array())
      throw ConfigError("truth.classSizes: expected an array");
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_number_integer() || c[i].get<int>() < 0)
        throw ConfigError(
            fmt::format("truth.classSizes[{}]: expected a nonnegative integer", i + 1));
      tm.classSizes.push_back(c[i].get<int>());
    }
  } else if (!tm.trueLabels.empty()) {
    tm.classSizes.assign(tm.weights.size(), 0);
    for (int z : tm.trueLabels)
      if (z >= 0 && z < tm.K())
        ++tm.classSizes[z];
  }
  tm.validate();
  if (!tm.classSizes.empty() && static_cast<int>(tm.classSizes.size()) != tm.K())
    throw ConfigError(fmt::format("truth.classSizes: expected {} entries", tm.K()));
  return tm;
}

json to_json(const PriorConfig &pr) {
  json j;
  j["R"] = pr.R;
  j["a"] = pr.a;
  json s = json::array();
  for (int k = 0; k < pr.sigma_k.size(); ++k) {
    if (std::isfinite(pr.sigma_k[k]))
      s.push_back(pr.sigma_k[k]);
    else
      s.push_back(nullptr);
  }
  j["sigma_k"] = s;
  j["dirichlet_alpha"] = pr.dirichlet_alpha;
  return j;
}

PriorConfig priors_from_json(const json &j, int K) {
  PriorConfig pr = PriorConfig::flat(K, 3.0);
  pr.R = number(field(j, "R", "priors"), "priors.R");
  pr.a = number(field(j, "a", "priors"), "priors.a");
  pr.dirichlet_alpha =
      number(field(j, "dirichlet_alpha", "priors"), "priors.dirichlet_alpha");
  const json &s = field(j, "sigma_k", "priors");
  if (s.is_null() || s.is_number()) {
    pr.sigma_k = VectorXd::Constant(K, s.is_null() ? kInf : s.get<double>());
  } else {
    if (!s.is_array() || static_cast<int>(s.size()) != K)
      throw ConfigError(
          fmt::format("priors.sigma_k: expected null, a number or {} entries", K));
    pr.sigma_k.resize(K);
    for (int k = 0; k < K; ++k)
      pr.sigma_k[k] = s[k].is_null()
                          ? kInf
                          : number(s[k], fmt::format("priors.sigma_k[{}]", k + 1));
  }
  pr.validate(K);
  return pr;
}

json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(fmt::format("cannot open {}", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(fmt::format("{}: invalid JSON ({})", path, e.what()));
  }
}

void write_json(const std::string &path, const json &j) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError(fmt::format("cannot write {}", path));
  out << j.dump(2) << "\n";
}

void write_dataset_csv(const std::string &path, const Dataset &ds) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError(fmt::format("cannot write {}", path));
  out << "n";
  for (int p = 0; p < ds.P(); ++p)
    out << ",x" << p + 1;
  out << "\n";
  for (int n = 0; n < ds.N(); ++n) {
    out << n + 1;
    for (int p = 0; p < ds.P(); ++p)
      out << fmt::format(",{:.17g}", ds.points(n, p));
    out << "\n";
  }
}

Dataset read_dataset_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(fmt::format("cannot open {}", path));
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError(fmt::format("{}: empty file", path));
  const auto header = split(line);
  if (header.size() < 2 || header[0] != "n")
    throw ConfigError(fmt::format("{}, row 1: expected header n,x1,...,xP", path));
  const int P = static_cast<int>(header.size()) - 1;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r")
      continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != P + 1)
      throw ConfigError(fmt::format("{}, row {}: expected {} fields, got {}",
                                    path, lineno, P + 1, cells.size()));
    double idx = 0.0;
    if (!parse_double(cells[0], idx) ||
        idx != static_cast<double>(rows.size() + 1))
      throw ConfigError(fmt::format("{}, row {}: bad index '{}'", path, lineno,
                                    cells[0]));
    std::vector<double> r(P);
    for (int p = 0; p < P; ++p)
      if (!parse_double(cells[p + 1], r[p]))
        throw ConfigError(fmt::format("{}, row {}: bad value '{}' in column x{}",
                                      path, lineno, cells[p + 1], p + 1));
    rows.push_back(std::move(r));
  }
  if (rows.empty())
    throw ConfigError(fmt::format("{}: no data rows", path));
  Dataset ds{MatrixXd(rows.size(), P)};
  for (std::size_t n = 0; n < rows.size(); ++n)
    for (int p = 0; p < P; ++p)
      ds.points(n, p) = rows[n][p];
  return ds;
}

} // namespace mfgmm::io
