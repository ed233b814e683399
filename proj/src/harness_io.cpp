#include "skt/harness.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace skt {

namespace {

constexpr const char* kDiagnosticsTag = "# skt-diagnostics v1";
constexpr const char* kFieldTag = "# skt-field v1";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || (errno == ERANGE && std::isinf(v)))
    throw ConfigError(where + ": cannot parse number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename '" + tmp.string() + "': " + ec.message());
  }
}

DiagnosticsRow make_row(const StepReport& r) {
  DiagnosticsRow row;
  row.step = r.index;
  row.time = r.time;
  row.tau = r.tau;
  row.mass = r.mass;
  row.l1 = r.monitors.norms.l1;
  row.l2 = r.monitors.norms.l2;
  row.l3 = r.monitors.norms.l3;
  row.fisher = r.monitors.fisher;
  row.entropy = r.entropy;
  row.dissipation = r.dissipation;
  row.h_eta = r.monitors.h_eta;
  row.ck_bound = r.monitors.ck_bound;
  row.l1_deviation = r.monitors.l1_deviation;
  row.newton_iters = r.newton_iters;
  row.entropy_margin = r.entropy_margin;
  row.entropy_ok = r.entropy_ok;
  return row;
}

std::vector<std::string> diagnostics_columns(Eigen::Index n) {
  std::vector<std::string> cols{"step", "time", "tau"};
  const auto per_species = [&](const char* base) {
    for (Eigen::Index i = 1; i <= n; ++i) cols.push_back(std::string(base) + "_" + std::to_string(i));
  };
  per_species("mass");
  per_species("l1");
  per_species("l2");
  per_species("l3");
  per_species("fisher");
  cols.insert(cols.end(), {"entropy", "dissipation", "h_eta"});
  per_species("ck_bound");
  per_species("l1_deviation");
  cols.insert(cols.end(), {"newton_iters", "entropy_margin", "entropy_ok"});
  return cols;
}

void write_diagnostics(const std::vector<DiagnosticsRow>& rows, const std::string& path) {
  const Eigen::Index n = rows.empty() ? 0 : rows.front().mass.size();
  std::ostringstream os;
  os << kDiagnosticsTag << "\n";
  const auto cols = diagnostics_columns(n);
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << "\n";
  for (const auto& r : rows) {
    detail::require(r.mass.size() == n, "write_diagnostics: rows disagree on species count");
    os << r.step << "," << fmt(r.time) << "," << fmt(r.tau);
    for (const Vector* v : {&r.mass, &r.l1, &r.l2, &r.l3, &r.fisher})
      for (Eigen::Index i = 0; i < n; ++i) os << "," << fmt((*v)(i));
    os << "," << fmt(r.entropy) << "," << fmt(r.dissipation) << "," << fmt(r.h_eta);
    for (const Vector* v : {&r.ck_bound, &r.l1_deviation})
      for (Eigen::Index i = 0; i < n; ++i) os << "," << fmt((*v)(i));
    os << "," << r.newton_iters << "," << fmt(r.entropy_margin) << "," << (r.entropy_ok ? 1 : 0)
       << "\n";
  }
  atomic_write(path, os.str());
}

std::vector<DiagnosticsRow> read_diagnostics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read diagnostics '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kDiagnosticsTag)
    throw ConfigError(path + ": missing diagnostics header");
  if (!std::getline(in, line)) throw ConfigError(path + ": missing column row");
  const auto header = split(line, ',');
  // 3 + 5n + 3 + 2n + 3 columns
  const auto extra = static_cast<long>(header.size()) - 9;
  if (extra < 0 || extra % 7 != 0) throw ConfigError(path + ": unexpected column count");
  const Eigen::Index n = extra / 7;
  if (header != diagnostics_columns(n)) throw ConfigError(path + ": unexpected column names");

  std::vector<DiagnosticsRow> rows;
  long lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) throw ConfigError(where + ": wrong number of fields");
    std::size_t k = 0;
    const auto next = [&] { return parse_double(cells[k++], where); };
    const auto vec = [&] {
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = next();
      return v;
    };
    DiagnosticsRow r;
    r.step = static_cast<long>(next());
    r.time = next();
    r.tau = next();
    r.mass = vec();
    r.l1 = vec();
    r.l2 = vec();
    r.l3 = vec();
    r.fisher = vec();
    r.entropy = next();
    r.dissipation = next();
    r.h_eta = next();
    r.ck_bound = vec();
    r.l1_deviation = vec();
    r.newton_iters = static_cast<int>(next());
    r.entropy_margin = next();
    r.entropy_ok = next() != 0.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_field(const SpeciesField& field, const std::string& path, double time) {
  const Grid& g = field.grid;
  std::ostringstream os;
  os << kFieldTag << "\n";
  os << "dim " << g.dim() << "\n";
  os << "cells " << g.cells(0) << " " << (g.dim() == 2 ? g.cells(1) : 1) << "\n";
  os << "length " << fmt(g.length(0)) << " " << fmt(g.dim() == 2 ? g.length(1) : 1.0) << "\n";
  os << "species " << field.species() << "\n";
  os << "time " << fmt(time) << "\n";
  for (Eigen::Index i = 0; i < field.species(); ++i) {
    for (Eigen::Index c = 0; c < field.values.cols(); ++c) os << (c ? " " : "") << fmt(field.values(i, c));
    os << "\n";
  }
  atomic_write(path, os.str());
}

SpeciesField load_field(const std::string& path, double* time) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read field '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kFieldTag) throw ConfigError(path + ": missing field header");

  const auto expect = [&](const char* key) {
    if (!std::getline(in, line)) throw ConfigError(path + ": missing '" + key + "'");
    std::istringstream is(line);
    std::string k;
    is >> k;
    if (k != key) throw ConfigError(path + ": expected '" + key + "', found '" + k + "'");
    std::vector<std::string> rest;
    for (std::string t; is >> t;) rest.push_back(t);
    return rest;
  };
  const auto d = expect("dim");
  const auto c = expect("cells");
  const auto l = expect("length");
  const auto s = expect("species");
  const auto t = expect("time");
  if (d.size() != 1 || c.size() != 2 || l.size() != 2 || s.size() != 1 || t.size() != 1)
    throw ConfigError(path + ": malformed header");
  const int dim = std::stoi(d[0]);
  const int nx = std::stoi(c[0]);
  const int ny = std::stoi(c[1]);
  const double lx = parse_double(l[0], path);
  const double ly = parse_double(l[1], path);
  const long n = std::stol(s[0]);
  if (time) *time = parse_double(t[0], path);
  if (n < 1) throw ConfigError(path + ": species must be >= 1");
  const Grid grid = dim == 2 ? Grid::rectangle(nx, ny, lx, ly) : Grid::line(nx, lx);

  SpeciesField field{grid, Matrix(n, grid.num_cells())};
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ConfigError(path + ": missing species row");
    std::istringstream is(line);
    Eigen::Index cidx = 0;
    for (std::string tok; is >> tok; ++cidx) {
      if (cidx >= grid.num_cells()) throw ConfigError(path + ": too many values in species row");
      field.values(i, cidx) = parse_double(tok, path);
    }
    if (cidx != grid.num_cells()) throw ConfigError(path + ": too few values in species row");
  }
  return field;
}

}  // namespace skt
