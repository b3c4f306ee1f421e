// Command-line front end over the C API.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <filesystem>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "derham_c.h"
#include "json.hpp"

using nlohmann::ordered_json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIO = 3;

struct CliError {
  int code;
  std::string message;
};

int exit_for(dp_status s) {
  switch (s) {
    case DP_OK: return kExitPass;
    case DP_ERR_INVALID_ARGUMENT:
    case DP_ERR_CAP_EXCEEDED:
    case DP_ERR_EMPTY_SPACE:
    case DP_ERR_TRIVIAL_RANGE:
    case DP_ERR_NON_NESTED: return kExitUsage;
    case DP_ERR_IO:
    case DP_ERR_PARSE:
    case DP_ERR_DEGENERATE_ELEMENT:
    case DP_ERR_NON_MANIFOLD:
    case DP_ERR_DUPLICATE_ELEMENT:
    case DP_ERR_CONNECTIVITY_MISMATCH: return kExitIO;
    default: return kExitFail;
  }
}

void check(dp_status s) {
  if (s != DP_OK) {
    std::string msg = dp_status_name(s);
    const std::string detail = dp_last_error();
    if (detail.rfind(msg, 0) == 0) {
      msg = detail;
    } else if (!detail.empty()) {
      msg += ": " + detail;
    }
    throw CliError{exit_for(s), msg};
  }
}

struct MeshFree {
  void operator()(dp_mesh* m) const { dp_mesh_free(m); }
};
using MeshPtr = std::unique_ptr<dp_mesh, MeshFree>;

bool is_token(const std::string& s) {
  static const std::regex re(R"(reftet|cube\d+|star\d+|stretched\d+:[0-9.eE+-]+)");
  return std::regex_match(s, re);
}

/// A generator token or a mesh file path.
MeshPtr open_mesh(const std::string& spec) {
  dp_mesh* m = nullptr;
  check(is_token(spec) && !std::filesystem::exists(spec) ? dp_mesh_generate(spec.c_str(), &m) : dp_mesh_load(spec.c_str(), &m));
  return MeshPtr(m);
}

std::string hex(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

uint64_t fnv(uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}
constexpr uint64_t kFnvBasis = 14695981039346656037ULL;

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

ordered_json jnum(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

const char* bc_name(int bc) { return bc == DP_BC_NONE ? "none" : "homogeneous"; }

dp_bc parse_bc(const std::string& s) {
  if (s == "none") return DP_BC_NONE;
  if (s == "homogeneous" || s == "hom" || s == "dirichlet") return DP_BC_HOMOGENEOUS;
  throw CliError{kExitUsage, "unknown boundary condition '" + s + "'"};
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    try {
      std::size_t used = 0;
      if (dots != std::string::npos) {
        const int a = std::stoi(item.substr(0, dots), &used);
        if (used != dots) throw std::invalid_argument(item);
        const std::string rest = item.substr(dots + 2);
        const int b = std::stoi(rest, &used);
        if (used != rest.size() || b < a) throw std::invalid_argument(item);
        for (int i = a; i <= b; ++i) out.push_back(i);
      } else {
        out.push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      }
    } catch (const std::exception&) {
      throw CliError{kExitUsage, "bad integer list '" + s + "'"};
    }
  }
  if (out.empty()) throw CliError{kExitUsage, "empty integer list"};
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct Globals {
  uint64_t seed = 1;
  int cap = 3000;
  std::string format;
  std::string out;

  std::string fmt(const char* fallback) const { return format.empty() ? fallback : format; }

  void emit(const std::string& text) const {
    if (out.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw CliError{kExitIO, "cannot write " + out};
    f << text;
  }
};

ordered_json envelope(const char* command, const std::string& input_hash, uint64_t seed) {
  ordered_json j;
  j["tool"] = "derham";
  j["tool_version"] = dp_version();
  j["command"] = command;
  j["input_hash"] = input_hash;
  j["seed"] = seed;
  return j;
}

ordered_json constant_json(const dp_constant_report& r) {
  ordered_json j;
  j["l"] = r.l;
  j["p"] = r.p;
  j["bc"] = bc_name(r.bc);
  j["h_omega"] = jnum(r.h_omega);
  j["lambda_min_pos"] = jnum(r.lambda_min_pos);
  j["constant"] = jnum(r.constant);
  j["kernel_dim"] = r.kernel_dim;
  j["dim"] = r.dim;
  j["infsup"] = jnum(r.infsup);
  j["potential_norm"] = jnum(r.potential_norm);
  j["seed"] = r.seed;
  return j;
}

const std::vector<std::string> kConstantColumns{"l",         "p",      "bc",     "h_omega",        "lambda_min_pos",
                                                "constant",  "kernel_dim", "dim", "infsup", "potential_norm", "seed"};

std::string constant_csv_row(const dp_constant_report& r) {
  return std::to_string(r.l) + "," + std::to_string(r.p) + "," + bc_name(r.bc) + "," + num(r.h_omega) + "," +
         num(r.lambda_min_pos) + "," + num(r.constant) + "," + std::to_string(r.kernel_dim) + "," +
         std::to_string(r.dim) + "," + num(r.infsup) + "," + num(r.potential_norm) + "," + std::to_string(r.seed);
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

void require_format(const std::string& f) {
  if (f != "json" && f != "csv") throw CliError{kExitUsage, "format must be json or csv"};
}

// ---------------------------------------------------------------- mesh

struct MeshOptions {
  std::string shape = "cube";
  int n = 1;
  double aspect = 4.0;
  std::string file;
  double scale = 1.0;
};

std::string shape_token(const std::string& shape, int n, double aspect) {
  if (shape == "cube") return "cube" + std::to_string(n);
  if (shape == "reftet") return "reftet";
  if (shape == "star") return "star" + std::to_string(n);
  if (shape == "stretched") return "stretched" + std::to_string(n) + ":" + num(aspect);
  throw CliError{kExitUsage, "unknown shape '" + shape + "' (cube, reftet, star, stretched)"};
}

int cmd_mesh_gen(const Globals& g, const MeshOptions& o) {
  MeshPtr m = open_mesh(shape_token(o.shape, o.n, o.aspect));
  if (o.scale != 1.0) {
    dp_mesh* s = nullptr;
    check(dp_mesh_scale(m.get(), o.scale, &s));
    m.reset(s);
  }
  if (g.out.empty()) {
    check(dp_mesh_save(m.get(), "/dev/stdout"));
  } else {
    check(dp_mesh_save(m.get(), g.out.c_str()));
  }
  return kExitPass;
}

int cmd_mesh_info(const Globals& g, const MeshOptions& o) {
  MeshPtr m = open_mesh(o.file);
  dp_mesh_info info{};
  check(dp_mesh_info_get(m.get(), &info));
  const std::string hash = hex(dp_mesh_hash(m.get()));
  const std::string f = g.fmt("json");
  require_format(f);
  if (f == "csv") {
    g.emit("V,E,F,T,boundary_faces,euler,rho,h_omega,h_min,h_max,input_hash\n" + std::to_string(info.vertices) + "," +
           std::to_string(info.edges) + "," + std::to_string(info.faces) + "," + std::to_string(info.tets) + "," +
           std::to_string(info.boundary_faces) + "," + std::to_string(info.euler) + "," + num(info.rho) + "," +
           num(info.h_omega) + "," + num(info.h_min) + "," + num(info.h_max) + "," + hash + "\n");
    return kExitPass;
  }
  ordered_json j = envelope("mesh info", hash, g.seed);
  ordered_json r;
  r["V"] = info.vertices;
  r["E"] = info.edges;
  r["F"] = info.faces;
  r["T"] = info.tets;
  r["boundary_faces"] = info.boundary_faces;
  r["euler"] = info.euler;
  r["rho"] = jnum(info.rho);
  r["h_omega"] = jnum(info.h_omega);
  r["h_min"] = jnum(info.h_min);
  r["h_max"] = jnum(info.h_max);
  j["report"] = r;
  g.emit(j.dump(2) + "\n");
  return kExitPass;
}

// ---------------------------------------------------------------- constants / equivalence

struct LevelOptions {
  std::string mesh = "cube1";
  int l = 1;
  int p = 0;
  std::string bc = "none";
  bool cross_checks = false;
  int samples = 20;
  double tol = 1e-8;
  int oracle_degree = -1;
  std::string oracle_mesh;
};

int cmd_constants(const Globals& g, const LevelOptions& o) {
  MeshPtr m = open_mesh(o.mesh);
  const dp_bc bc = parse_bc(o.bc);
  dp_constant_report r{};
  check(dp_constant(m.get(), o.l, o.p, bc, g.cap, o.cross_checks ? 1 : 0, g.seed, &r));
  const std::string hash = hex(dp_mesh_hash(m.get()));

  std::optional<dp_route1_report> oracle;
  MeshPtr om;
  if (o.oracle_degree >= 0) {
    if (!o.oracle_mesh.empty()) om = open_mesh(o.oracle_mesh);
    dp_route1_report r1{};
    check(dp_route1(m.get(), om.get(), o.l, o.p, bc, o.oracle_degree, o.samples, g.seed, &r1));
    oracle = r1;
  }

  const std::string f = g.fmt("json");
  require_format(f);
  if (f == "csv") {
    g.emit("# derham " + std::string(dp_version()) + " input_hash=" + hash + " seed=" + std::to_string(g.seed) +
           "\n" + join(kConstantColumns) + "\n" + constant_csv_row(r) + "\n");
    return kExitPass;
  }
  ordered_json j = envelope("constants", hash, g.seed);
  j["report"] = constant_json(r);
  if (oracle) {
    ordered_json o1;
    o1["oracle_mesh"] = o.oracle_mesh.empty() ? o.mesh : o.oracle_mesh;
    o1["oracle_degree"] = o.oracle_degree;
    o1["nested"] = oracle->nested != 0;
    o1["samples"] = oracle->samples;
    o1["min_ratio"] = jnum(oracle->min_ratio);
    o1["max_ratio"] = jnum(oracle->max_ratio);
    j["oracle"] = o1;
  }
  g.emit(j.dump(2) + "\n");
  return kExitPass;
}

int cmd_equivalence(const Globals& g, const LevelOptions& o) {
  MeshPtr m = open_mesh(o.mesh);
  dp_equivalence_report e{};
  check(dp_equivalence(m.get(), o.l, o.p, parse_bc(o.bc), g.cap, o.samples, g.seed, o.tol, &e));
  const dp_constant_report& r = e.constant;
  const double ch = r.constant * r.h_omega;
  ordered_json j = envelope("equivalence", hex(dp_mesh_hash(m.get())), g.seed);
  j["pass"] = e.pass != 0;
  j["report"] = constant_json(r);
  ordered_json v;
  v["constant_times_h"] = jnum(ch);
  v["inverse_infsup"] = jnum(1.0 / r.infsup);
  v["potential_norm"] = jnum(r.potential_norm);
  v["extremal_stability"] = jnum(r.stability);
  v["sampled_stability"] = jnum(e.stability_sampled);
  v["infsup_error"] = jnum(e.infsup_error);
  v["potential_error"] = jnum(e.potential_error);
  v["stability_error"] = jnum(e.stability_error);
  v["sampled_excess"] = jnum(e.sampled_excess);
  v["tolerance"] = o.tol;
  j["values"] = v;
  g.emit(j.dump(2) + "\n");
  std::fprintf(stderr, "%s: C*h=%s 1/infsup=%s potential_norm=%s stability=%s (C=%s)\n", e.pass ? "pass" : "FAIL",
               num(ch).c_str(), num(1.0 / r.infsup).c_str(), num(r.potential_norm).c_str(),
               num(r.stability).c_str(), num(r.constant).c_str());
  return e.pass ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------- project

struct ProjectOptions {
  std::string kind = "hdiv";
  std::string mesh = "cube1";
  std::string rich_mesh;
  std::string input;
  int l = 2;
  int p = 0;
  int rich_degree = -1;
  std::string bc = "none";
  int samples = 10;
};

int cmd_project(const Globals& g, const ProjectOptions& o) {
  MeshPtr m = open_mesh(o.mesh);
  dp_projection_report r{};
  std::vector<std::string> failures;
  if (o.kind == "hdiv") {
    if (o.bc != "none") throw CliError{kExitUsage, "flux equilibration supports bc=none only"};
    if (!o.input.empty()) {
      check(dp_project_hdiv_file(m.get(), o.p, o.input.c_str(), &r));
    } else {
      check(dp_project_hdiv(m.get(), o.p, o.samples, g.seed, &r));
    }
    if (!(r.commuting_residual <= 1e-9)) failures.push_back("commuting residual");
    if (!(r.projection_residual <= 1e-10)) failures.push_back("projection residual");
    if (!(r.partition_of_unity <= 1e-13)) failures.push_back("partition of unity");
    if (!(r.max_compatibility <= 1e-9)) failures.push_back("star compatibility");
  } else if (o.kind == "min") {
    MeshPtr rich;
    if (!o.rich_mesh.empty()) rich = open_mesh(o.rich_mesh);
    const int q = o.rich_degree >= 0 ? o.rich_degree : o.p + 1;
    check(dp_project_min(m.get(), rich.get(), o.l, o.p, parse_bc(o.bc), q, o.samples, g.seed, &r));
    if (!(r.commuting_residual <= 1e-9)) failures.push_back("commuting residual");
    if (!(r.projection_residual <= 1e-10)) failures.push_back("projection residual");
    if (std::isfinite(r.bound) && !(r.stability_ratio <= r.bound + 1e-6)) failures.push_back("graph-norm bound");
  } else {
    throw CliError{kExitUsage, "unknown projection kind '" + o.kind + "' (hdiv, min)"};
  }

  ordered_json j = envelope("project", hex(dp_mesh_hash(m.get())), g.seed);
  j["pass"] = failures.empty();
  ordered_json rep;
  rep["kind"] = o.kind;
  rep["level"] = r.level;
  rep["p"] = o.p;
  rep["bc"] = o.bc;
  rep["input"] = o.input.empty() ? "random" : o.input;
  rep["samples"] = r.samples;
  rep["commuting_residual"] = jnum(r.commuting_residual);
  rep["projection_residual"] = jnum(r.projection_residual);
  rep["stability_ratio"] = jnum(r.stability_ratio);
  rep["norm_kind"] = r.graph_norm ? "graph" : "L2";
  rep["bound"] = jnum(r.bound);
  if (o.kind == "hdiv") {
    rep["partition_of_unity"] = jnum(r.partition_of_unity);
    rep["max_compatibility"] = jnum(r.max_compatibility);
    rep["conformity"] = jnum(r.conformity);
    rep["divergence_partition"] = jnum(r.divergence_partition);
  }
  j["report"] = rep;
  j["failures"] = failures;
  g.emit(j.dump(2) + "\n");
  for (const auto& f : failures) std::fprintf(stderr, "assertion failed: %s\n", f.c_str());
  return failures.empty() ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------- study

struct StudyOptions {
  std::string shape = "cube";
  std::string n = "1..2";
  std::string l = "0";
  std::string p = "0";
  std::string bc = "none";
  double aspect = 4.0;
  int jobs = 0;
  bool cross_checks = true;
};

struct Cell {
  int n = 0, l = 0, p = 0;
  dp_bc bc = DP_BC_NONE;
  std::string token;
  // results
  dp_status status = DP_OK;
  std::string error;
  int tets = 0;
  double rho = 0.0;
  uint64_t hash = 0;
  dp_constant_report report{};
};

void run_cell(Cell& c, int cap, bool cross, uint64_t seed) {
  dp_mesh* m = nullptr;
  c.status = dp_mesh_generate(c.token.c_str(), &m);
  if (c.status == DP_OK) {
    MeshPtr mesh(m);
    dp_mesh_info info{};
    c.status = dp_mesh_info_get(m, &info);
    c.tets = info.tets;
    c.rho = info.rho;
    c.hash = dp_mesh_hash(m);
    if (c.status == DP_OK) c.status = dp_constant(m, c.l, c.p, c.bc, cap, cross ? 1 : 0, seed, &c.report);
  }
  if (c.status != DP_OK) c.error = dp_last_error();
}

int cmd_study(const Globals& g, const StudyOptions& o) {
  const std::vector<int> ns = parse_int_list(o.n), ls = parse_int_list(o.l), ps = parse_int_list(o.p);
  std::vector<dp_bc> bcs;
  for (const auto& b : split(o.bc)) bcs.push_back(parse_bc(b));
  std::sort(bcs.begin(), bcs.end());
  bcs.erase(std::unique(bcs.begin(), bcs.end()), bcs.end());
  for (int l : ls)
    if (l < 0 || l > 2) throw CliError{kExitUsage, "study levels must lie in 0..2"};
  for (int p : ps)
    if (p < 0 || p > 3) throw CliError{kExitUsage, "study degrees must lie in 0..3"};
  const std::string f = g.fmt("csv");
  require_format(f);

  std::vector<Cell> cells;
  for (int l : ls)
    for (int p : ps)
      for (int n : ns)
        for (dp_bc bc : bcs) {
          Cell c;
          c.n = n;
          c.l = l;
          c.p = p;
          c.bc = bc;
          c.token = shape_token(o.shape, n, o.aspect);
          cells.push_back(c);
        }

  // Largest cells first so the pool stays busy; results are stored by index.
  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(cells[a].n, cells[a].p) > std::tie(cells[b].n, cells[b].p);
  });
  unsigned jobs = o.jobs > 0 ? static_cast<unsigned>(o.jobs) : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < order.size();) run_cell(cells[order[k]], g.cap, o.cross_checks, g.seed);
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitPass;
  std::vector<const Cell*> rows;
  for (const Cell& c : cells) {
    if (c.status == DP_OK) {
      rows.push_back(&c);
      continue;
    }
    if (c.status == DP_ERR_EMPTY_SPACE || c.status == DP_ERR_TRIVIAL_RANGE) {
      std::fprintf(stderr, "skipped %s l=%d p=%d bc=%s: %s\n", c.token.c_str(), c.l, c.p, bc_name(c.bc),
                   c.error.c_str());
      continue;
    }
    std::fprintf(stderr, "error in %s l=%d p=%d bc=%s: %s: %s\n", c.token.c_str(), c.l, c.p, bc_name(c.bc),
                 dp_status_name(c.status), c.error.c_str());
    code = std::max(code, exit_for(c.status));
  }
  if (code != kExitPass) return code;

  std::sort(rows.begin(), rows.end(), [](const Cell* a, const Cell* b) {
    return std::tie(a->l, a->p, a->n, a->bc) < std::tie(b->l, b->p, b->n, b->bc);
  });

  // Level-0 checks on convex shapes: the 1/pi bound and growth under refinement and degree.
  std::vector<std::string> failures;
  const bool convex = o.shape == "cube" || o.shape == "stretched" || o.shape == "reftet";
  const double bound = 1.0 / M_PI + 1e-9;
  for (const Cell* a : rows) {
    if (a->l != 0 || a->bc != DP_BC_NONE) continue;
    char buf[160];
    if (convex && o.shape == "cube" && a->report.constant > bound) {
      std::snprintf(buf, sizeof buf, "n=%d p=%d: constant %.15g exceeds 1/pi", a->n, a->p, a->report.constant);
      failures.push_back(buf);
    }
    for (const Cell* b : rows) {
      if (b->l != 0 || b->bc != DP_BC_NONE || o.shape != "cube") continue;
      const bool refine = b->p == a->p && b->n > a->n;
      const bool enrich = b->n == a->n && b->p > a->p;
      if ((refine || enrich) && b->report.constant < a->report.constant - 1e-10) {
        std::snprintf(buf, sizeof buf, "constant decreases from (n=%d,p=%d) to (n=%d,p=%d)", a->n, a->p, b->n, b->p);
        failures.push_back(buf);
      }
    }
  }

  uint64_t h = fnv(kFnvBasis, o.shape + "|" + o.n + "|" + o.l + "|" + o.p + "|" + o.bc + "|" + num(o.aspect) +
                                  "|" + std::to_string(g.cap) + "|" + (o.cross_checks ? "x" : "-"));
  for (const Cell* c : rows) h = fnv(h, hex(c->hash));
  const std::string hash = hex(h);

  if (f == "csv") {
    std::string s = "# derham " + std::string(dp_version()) + " input_hash=" + hash + " seed=" + std::to_string(g.seed) +
                    " cap=" + std::to_string(g.cap) + "\n";
    s += "shape,n,|T|,rho,l,p,bc,dim,constant,infsup,potential_norm,kernel_dim\n";
    for (const Cell* c : rows) {
      s += o.shape + "," + std::to_string(c->n) + "," + std::to_string(c->tets) + "," + num(c->rho) + "," +
           std::to_string(c->l) + "," + std::to_string(c->p) + "," + bc_name(c->bc) + "," +
           std::to_string(c->report.dim) + "," + num(c->report.constant) + "," + num(c->report.infsup) + "," +
           num(c->report.potential_norm) + "," + std::to_string(c->report.kernel_dim) + "\n";
    }
    g.emit(s);
  } else {
    ordered_json j = envelope("study", hash, g.seed);
    j["pass"] = failures.empty();
    ordered_json arr = ordered_json::array();
    for (const Cell* c : rows) {
      ordered_json r = constant_json(c->report);
      r["shape"] = o.shape;
      r["n"] = c->n;
      r["T"] = c->tets;
      r["rho"] = jnum(c->rho);
      arr.push_back(r);
    }
    j["rows"] = arr;
    j["failures"] = failures;
    g.emit(j.dump(2) + "\n");
  }
  for (const auto& msg : failures) std::fprintf(stderr, "assertion failed: %s\n", msg.c_str());
  return failures.empty() ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------- piola

struct PiolaOptions {
  std::string mesh = "stretched1:4";
  std::string reference;
  int p = 0;
  std::string bc = "none";
  double scale = 0.5;
};

ordered_json arr(const double* v, int n) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < n; ++i) a.push_back(jnum(v[i]));
  return a;
}

int cmd_piola(const Globals& g, const PiolaOptions& o) {
  MeshPtr m = open_mesh(o.mesh);
  MeshPtr ref;
  if (!o.reference.empty()) ref = open_mesh(o.reference);
  const dp_bc bc = parse_bc(o.bc);
  dp_route3_report r{};
  check(dp_route3(m.get(), ref.get(), o.p, bc, g.seed, &r));

  std::vector<std::string> failures;
  for (double c : r.commuting)
    if (!(c <= 1e-10)) failures.push_back("commuting identity");
  for (double c : r.conformity)
    if (!(c <= 1e-10)) failures.push_back("conformity after transport");
  if (!r.bound_holds) failures.push_back("transported-constant inequality");
  // With the similarity reference |psi^2| has a closed form.
  const double closed = ref ? NAN : std::sqrt(r.h_omega / r.h_ref);
  const double closed_err = ref ? NAN : std::abs(r.norm[2] / closed - 1.0);
  if (!ref && !(closed_err <= 1e-9)) failures.push_back("closed-form norm of psi^2");

  ordered_json sim;
  if (o.scale > 0.0 && o.scale != 1.0) {
    // Same reference, physical mesh scaled by s: |psi^2| scales by sqrt(s), |psi^-l||psi^{l+1}| by s.
    dp_mesh* sm = nullptr;
    check(dp_mesh_scale(m.get(), o.scale, &sm));
    MeshPtr scaled(sm);
    MeshPtr fixed;
    if (!ref) {
      dp_mesh* rm = nullptr;
      check(dp_mesh_scale(m.get(), 1.0 / r.h_omega, &rm));
      fixed.reset(rm);
    }
    dp_route3_report a{}, b{};
    const dp_mesh* reference = ref ? ref.get() : fixed.get();
    check(dp_route3(m.get(), reference, o.p, bc, g.seed, &a));
    check(dp_route3(scaled.get(), reference, o.p, bc, g.seed, &b));
    const double psi2_err = std::abs(b.norm[2] / a.norm[2] - std::sqrt(o.scale));
    ordered_json prod = ordered_json::array();
    double prod_err = 0.0;
    for (int l = 0; l < 3; ++l) {
      const double ra = a.inverse_norm[l] * a.norm[l + 1], rb = b.inverse_norm[l] * b.norm[l + 1];
      prod.push_back(jnum(rb / ra));
      prod_err = std::max(prod_err, std::abs(rb / ra - o.scale));
    }
    if (!(psi2_err <= 1e-9)) failures.push_back("similarity scaling of psi^2");
    if (!(prod_err <= 1e-9)) failures.push_back("similarity scaling of norm products");
    sim["scale"] = o.scale;
    sim["psi2_ratio"] = jnum(b.norm[2] / a.norm[2]);
    sim["psi2_expected"] = std::sqrt(o.scale);
    sim["psi2_error"] = jnum(psi2_err);
    sim["norm_product_ratios"] = prod;
    sim["norm_product_error"] = jnum(prod_err);
  }

  ordered_json j = envelope("piola", hex(dp_mesh_hash(m.get())), g.seed);
  j["pass"] = failures.empty();
  ordered_json rep;
  rep["p"] = o.p;
  rep["bc"] = bc_name(bc);
  rep["h_omega"] = jnum(r.h_omega);
  rep["h_ref"] = jnum(r.h_ref);
  rep["norm"] = arr(r.norm, 4);
  rep["inverse_norm"] = arr(r.inverse_norm, 4);
  rep["commuting"] = arr(r.commuting, 3);
  rep["conformity"] = arr(r.conformity, 4);
  rep["constant_direct"] = arr(r.constant_direct, 2);
  rep["constant_reference"] = arr(r.constant_reference, 2);
  rep["transported_bound"] = arr(r.transported_bound, 2);
  rep["bound_holds"] = r.bound_holds != 0;
  rep["psi2_closed_form"] = jnum(closed);
  rep["psi2_closed_form_error"] = jnum(closed_err);
  j["report"] = rep;
  if (!sim.is_null()) j["similarity"] = sim;
  j["failures"] = failures;
  g.emit(j.dump(2) + "\n");
  for (const auto& f : failures) std::fprintf(stderr, "assertion failed: %s\n", f.c_str());
  return failures.empty() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete de Rham complexes and Poincare constants on tetrahedral meshes"};
  app.set_version_flag("--version", std::string(dp_version()));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "PRNG seed")->capture_default_str();
  app.add_option("--cap", g.cap, "Largest admissible dim V^l (<= 0 disables)")->capture_default_str();
  app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--out", g.out, "Output file (default stdout)");

  std::function<int()> action;
  const char* mesh_help = "Generator token (reftet, cube<n>, star<k>, stretched<n>:<aspect>) or mesh file";

  auto* mesh = app.add_subcommand("mesh", "Generate or inspect meshes");
  mesh->require_subcommand(1);
  mesh->fallthrough();
  MeshOptions mo;
  auto* gen = mesh->add_subcommand("gen", "Write a generated mesh in the text format");
  gen->add_option("--shape", mo.shape, "cube, reftet, star, stretched")->capture_default_str();
  gen->add_option("--n", mo.n, "Subdivisions per axis (tets in the star for shape star)")->capture_default_str();
  gen->add_option("--aspect", mo.aspect, "x-axis stretch for shape stretched")->capture_default_str();
  gen->add_option("--scale", mo.scale, "Scale all vertices")->capture_default_str();
  gen->fallthrough();
  gen->callback([&] { action = [&] { return cmd_mesh_gen(g, mo); }; });
  auto* info = mesh->add_subcommand("info", "Print entity counts and geometry");
  info->add_option("mesh", mo.file, mesh_help)->required();
  info->fallthrough();
  info->callback([&] { action = [&] { return cmd_mesh_info(g, mo); }; });

  LevelOptions lo;
  auto add_level = [&](CLI::App* c) {
    c->add_option("--mesh", lo.mesh, mesh_help)->capture_default_str();
    c->add_option("--l", lo.l, "Level 0..2")->check(CLI::Range(0, 2))->capture_default_str();
    c->add_option("--p", lo.p, "Degree 0..3")->check(CLI::Range(0, 3))->capture_default_str();
    c->add_option("--bc", lo.bc, "none or homogeneous")->capture_default_str();
    c->fallthrough();
  };
  auto* cons = app.add_subcommand("constants", "Best discrete Poincare constant of one level");
  add_level(cons);
  cons->add_flag("--cross-checks", lo.cross_checks, "Also compute inf-sup, potential norm and extremal stability");
  cons->add_option("--oracle-degree", lo.oracle_degree, "Compare minimal potentials with a richer oracle space");
  cons->add_option("--oracle-mesh", lo.oracle_mesh, "Nested refinement used by the oracle");
  cons->add_option("--samples", lo.samples, "Oracle samples")->capture_default_str();
  cons->callback([&] { action = [&] { return cmd_constants(g, lo); }; });

  auto* eq = app.add_subcommand("equivalence", "Check the four characterizations of the constant agree");
  add_level(eq);
  eq->add_option("--samples", lo.samples, "Random stability samples")->capture_default_str();
  eq->add_option("--tol", lo.tol, "Agreement tolerance")->capture_default_str();
  eq->callback([&] { action = [&] { return cmd_equivalence(g, lo); }; });

  ProjectOptions po;
  auto* proj = app.add_subcommand("project", "Commuting projections: flux equilibration or minimizing");
  proj->add_option("--kind", po.kind, "hdiv or min")->capture_default_str();
  proj->add_option("--mesh", po.mesh, mesh_help)->capture_default_str();
  proj->add_option("--rich-mesh", po.rich_mesh, "Nested refinement carrying the input fields (min)");
  proj->add_option("--rich-degree", po.rich_degree, "Degree of the input space (min, default p+1)");
  proj->add_option("--input", po.input, "Broken field file (hdiv)");
  proj->add_option("--l", po.l, "Level 1..3 (min)")->check(CLI::Range(1, 3))->capture_default_str();
  proj->add_option("--p", po.p, "Target degree")->check(CLI::Range(0, 3))->capture_default_str();
  proj->add_option("--bc", po.bc, "none or homogeneous")->capture_default_str();
  proj->add_option("--samples", po.samples, "Random inputs")->capture_default_str();
  proj->fallthrough();
  proj->callback([&] { action = [&] { return cmd_project(g, po); }; });

  StudyOptions so;
  auto* study = app.add_subcommand("study", "Table of constants over meshes, levels, degrees and bc");
  study->add_option("--shape", so.shape, "cube, stretched or star")->capture_default_str();
  study->add_option("--n", so.n, "Sizes, e.g. 1..4 or 1,2")->capture_default_str();
  study->add_option("--l", so.l, "Levels, e.g. 0,1,2")->capture_default_str();
  study->add_option("--p", so.p, "Degrees, e.g. 0..1")->capture_default_str();
  study->add_option("--bc", so.bc, "none,homogeneous")->capture_default_str();
  study->add_option("--aspect", so.aspect, "Stretch for shape stretched")->capture_default_str();
  study->add_option("--jobs", so.jobs, "Worker threads (default: hardware)");
  study->add_flag("!--no-cross-checks", so.cross_checks, "Skip inf-sup and potential-norm columns");
  study->fallthrough();
  study->callback([&] { action = [&] { return cmd_study(g, so); }; });

  PiolaOptions pio;
  auto* piola = app.add_subcommand("piola", "Transport to a reference mesh by piecewise Piola maps");
  piola->add_option("--mesh", pio.mesh, mesh_help)->capture_default_str();
  piola->add_option("--reference", pio.reference, "Reference mesh (default: recentered, scaled by 1/h)");
  piola->add_option("--p", pio.p, "Degree")->check(CLI::Range(0, 3))->capture_default_str();
  piola->add_option("--bc", pio.bc, "none or homogeneous")->capture_default_str();
  piola->add_option("--scale", pio.scale, "Similarity factor for the scaling check (1 disables)")->capture_default_str();
  piola->fallthrough();
  piola->callback([&] { action = [&] { return cmd_piola(g, pio); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
}
