// Acceptance checks: one PASS/FAIL line per criterion.

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "derham/derham.hpp"
#include "derham/equilibration.hpp"
#include "derham/poincare.hpp"

#ifndef DERHAM_CLI_PATH
#define DERHAM_CLI_PATH "derham_cli"
#endif

using namespace derham;

namespace {

std::shared_ptr<const Mesh> share(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }
std::shared_ptr<const Mesh> cube(int n) { return share(generate::cube_freudenthal(n)); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int run(const char* id, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0 && secs > time_limit) {
    o.pass = false;
    o.detail += fmt(" [over time limit %.0f s]", time_limit);
  }
  std::printf("%s %s %s (%.2f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

int svd_rank_oracle(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i) r += s[i] > 1e-9 * s[0];
  return r;
}

Outcome ac1() {
  double worst = 0.0;
  bool exact = true;
  for (int n = 1; n <= 2; ++n)
    for (int p = 0; p <= 1; ++p)
      for (auto bc : {Boundary::none, Boundary::homogeneous}) {
        const Complex c = build_complex(cube(n), p, bc);
        for (int l = 0; l < 2; ++l) {
          const Eigen::MatrixXd a = restrict_free(c.diff[l], c.spaces[l + 1], c.spaces[l]);
          const Eigen::MatrixXd b = restrict_free(c.diff[l + 1], c.spaces[l + 2], c.spaces[l + 1]);
          if (a.size() == 0 || b.size() == 0) continue;
          worst = std::max(worst, (b * a).cwiseAbs().maxCoeff());
          if (p == 0) {
            // Integer arithmetic: entries are exactly -1, 0, 1.
            const Eigen::MatrixX<long long> ai = a.cast<long long>(), bi = b.cast<long long>();
            exact = exact && (ai.cast<double>() - a).cwiseAbs().maxCoeff() == 0.0;
            exact = exact && (bi.cast<double>() - b).cwiseAbs().maxCoeff() == 0.0;
            exact = exact && (bi * ai).cwiseAbs().maxCoeff() == 0;
          }
        }
      }
  return {worst <= 1e-12 && exact, fmt("max|D D| = %.3g, p=0 integer composition %s", worst, exact ? "zero" : "NONZERO")};
}

Outcome ac2() {
  bool ok = true;
  std::string detail;
  for (int n = 1; n <= 2; ++n)
    for (int p = 0; p <= 1; ++p) {
      const Complex c = build_complex(cube(n), p, Boundary::none);
      std::array<int, 4> dims{}, ranks{};
      for (int l = 0; l < 4; ++l) dims[l] = c.spaces[l].free_dim();
      for (int l = 0; l < 3; ++l) ranks[l] = svd_rank_oracle(restrict_free(c.diff[l], c.spaces[l + 1], c.spaces[l]));
      const int h0 = dims[0] - ranks[0];
      const int h1 = dims[1] - ranks[1] - ranks[0];
      const int h2 = dims[2] - ranks[2] - ranks[1];
      const ComplexReport r = complex_report(cube(n), p, Boundary::none);
      ok = ok && h0 == 1 && h1 == 0 && h2 == 0;
      ok = ok && r.cohomology[0] == h0 && r.cohomology[1] == h1 && r.cohomology[2] == h2;
      for (int l = 0; l < 3; ++l) ok = ok && r.ranks[l] == ranks[l];
      if (n == 1 && p == 0) {
        const std::array<int, 3> ker{dims[0] - ranks[0], dims[1] - ranks[1], dims[2] - ranks[2]};
        ok = ok && ker == std::array<int, 3>{1, 7, 12} && ranks[2] == 6;
        ok = ok && r.kernel_dims[0] == 1 && r.kernel_dims[1] == 7 && r.kernel_dims[2] == 12;
        detail = fmt("cube1 p0 kernels (%d,%d,%d) rank(div)=%d", ker[0], ker[1], ker[2], ranks[2]);
      }
    }
  return {ok, detail + ", cohomology (1,0,0) on cube n=1,2 p=0,1"};
}

Outcome ac3() {
  double e_inf = 0.0, e_pot = 0.0, e_stab = 0.0;
  int cases = 0;
  const std::array<std::shared_ptr<const Mesh>, 3> meshes{cube(1), cube(2), share(generate::vertex_star_synthetic(8))};
  for (const auto& m : meshes)
    for (int l = 1; l <= 2; ++l)
      for (int p = 0; p <= 1; ++p)
        for (auto bc : {Boundary::none, Boundary::homogeneous}) {
          LevelProblem prob;
          try {
            prob = LevelProblem::build(m, l, p, bc);
          } catch (const Error& e) {
            if (e.code() == ErrorCode::empty_space) continue;
            throw;
          }
          const EquivalenceReport r = equivalence(prob, 10, 1);
          e_inf = std::max(e_inf, r.infsup_error);
          e_pot = std::max(e_pot, r.potential_error);
          e_stab = std::max(e_stab, r.stability_error);
          ++cases;
        }
  const bool ok = e_inf <= 1e-8 && e_pot <= 1e-8 && e_stab <= 1e-8 && cases > 0;
  return {ok, fmt("%d cases: max |infsup C h - 1| = %.2g, |pot/(C h) - 1| = %.2g, |stab - C| = %.2g", cases, e_inf,
                  e_pot, e_stab)};
}

Outcome ac4() {
  const double bound = 1.0 / M_PI + 1e-9;
  double c[2][4];
  bool ok = true;
  for (int p = 0; p <= 1; ++p)
    for (int n = 1; n <= 4; ++n) {
      c[p][n - 1] = constant(LevelProblem::build(cube(n), 0, p, Boundary::none)).constant;
      ok = ok && c[p][n - 1] <= bound;
      if (n > 1) ok = ok && c[p][n - 1] >= c[p][n - 2] - 1e-10;
    }
  for (int n = 0; n < 4; ++n) ok = ok && c[1][n] >= c[0][n] - 1e-10;
  return {ok, fmt("p0: %.6f %.6f %.6f %.6f  p1: %.6f %.6f %.6f %.6f  (1/pi = %.6f)", c[0][0], c[0][1], c[0][2], c[0][3],
                  c[1][0], c[1][1], c[1][2], c[1][3], 1.0 / M_PI)};
}

Outcome ac5() {
  const double target = 1.0 / (3.0 * M_PI);
  double c[4];
  bool ok = true;
  for (int n = 1; n <= 4; ++n) {
    c[n - 1] = constant(LevelProblem::build(cube(n), 2, 0, Boundary::none)).constant;
    if (n > 1) ok = ok && c[n - 1] >= c[n - 2] - 1e-10;
  }
  const double rel = std::abs(c[3] - target) / target;
  ok = ok && rel <= 0.05;
  return {ok, fmt("C = %.6f %.6f %.6f %.6f, n=4 off 1/(3 pi) by %.2f%%", c[0], c[1], c[2], c[3], 100.0 * rel)};
}

Outcome ac6() {
  double comm = 0.0, proj = 0.0, pou = 0.0, compat = 0.0, reproduce = 0.0;
  for (int n = 1; n <= 2; ++n)
    for (int p = 0; p <= 1; ++p) {
      const auto m = cube(n);
      const SpaceHandle rich = SpaceHandle::build(m, 2, p + 1, Boundary::none);
      const SpaceHandle rt = SpaceHandle::build(m, 2, p, Boundary::none);
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SplitMix64 rng(seed);
        const EquilibrationResult r = commuting_projection_hdiv(m, p, broken_from_space(rich, rng.vector(rich.global_dim())));
        comm = std::max(comm, r.report.commuting_residual);
        proj = std::max(proj, r.report.projection_residual);
        pou = std::max(pou, r.partition_of_unity);
        compat = std::max(compat, r.max_compatibility);
      }
      // Projection property on RT_p inputs.
      SplitMix64 rng(99);
      const Eigen::VectorXd c = rng.vector(rt.global_dim());
      const EquilibrationResult r = commuting_projection_hdiv(m, p, broken_from_space(rt, c), false);
      reproduce = std::max(reproduce, (r.coeffs - c).cwiseAbs().maxCoeff() / c.cwiseAbs().maxCoeff());
    }
  const bool ok = comm <= 1e-9 && proj <= 1e-10 && reproduce <= 1e-10 && pou <= 1e-13 && compat <= 1e-9;
  return {ok, fmt("commuting %.2g, idempotency %.2g, RT_p reproduced %.2g, partition of unity %.2g, compatibility %.2g",
                  comm, proj, reproduce, pou, compat)};
}

Outcome ac7() {
  bool ok = true;
  std::string detail;
  const MinimizingProjection proj(cube(1), 0, Boundary::none, cube(2), 1);
  for (int l = 1; l <= 2; ++l) {
    const double c = constant(LevelProblem::build(cube(1), l, 0, Boundary::none)).constant;
    const double bound = std::sqrt(10.0 + 8.0 * c * c);
    double worst = 0.0, comm = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SplitMix64 rng(seed);
      const ProjectionReport r = proj.report(l, rng.vector(proj.rich_dim(l)), c);
      worst = std::max(worst, r.stability_ratio);
      comm = std::max(comm, r.commuting_residual);
    }
    ok = ok && worst <= bound + 1e-6 && comm <= 1e-9;
    detail += fmt("%sl=%d ratio %.4f <= %.4f (commuting %.1g)", l > 1 ? ", " : "", l, worst, bound, comm);
  }
  return {ok, detail};
}

Outcome ac8() {
  const auto stretched = share(generate::stretched_cube(1, 4.0));
  const Route3Report own = route3_transport(stretched, 0, Boundary::none);
  const auto unit_ref = share(normalized_reference(generate::cube_freudenthal(1)));
  const Route3Report other = route3_transport(stretched, 0, Boundary::none, unit_ref);
  double comm = 0.0, conf = 0.0;
  for (const Route3Report* r : {&own, &other}) {
    for (double c : r->commuting) comm = std::max(comm, c);
    for (double c : r->conformity) conf = std::max(conf, c);
  }
  const bool bound = own.bound_holds && other.bound_holds;

  // Similarity: same reference, physical mesh scaled by 1/2.
  const auto m = cube(1);
  const Route3Report a = route3_transport(m, 0, Boundary::none, unit_ref);
  const Route3Report b = route3_transport(share(m->scaled(0.5)), 0, Boundary::none, unit_ref);
  const double scaling = std::abs(b.norm[2] / a.norm[2] - std::sqrt(0.5));
  const double closed = std::abs(b.norm[2] - std::sqrt(b.h_omega / b.h_ref));
  const bool ok = comm <= 1e-10 && conf <= 1e-10 && bound && scaling <= 1e-9 && closed <= 1e-9;
  return {ok, fmt("commuting %.2g, conformity %.2g, bound %s (l=1: %.4f <= %.4f, l=2: %.4f <= %.4f), psi2 scaling err %.2g",
                  comm, conf, bound ? "holds" : "VIOLATED", other.constant_direct[0], other.transported_bound[0],
                  other.constant_direct[1], other.transported_bound[1], scaling)};
}

Outcome ac9() {
  const auto dir = std::filesystem::temp_directory_path() / ("derham_ac9_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string args = " --seed 11 study --shape cube --n 1..2 --l 0,1,2 --p 0,1 --bc none,homogeneous";
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  const int ra = std::system((std::string(DERHAM_CLI_PATH) + " --out " + a + args + " --jobs 1").c_str());
  const int rb = std::system((std::string(DERHAM_CLI_PATH) + " --out " + b + args + " --jobs 4").c_str());
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const std::string ca = slurp(a), cb = slurp(b);
  std::filesystem::remove_all(dir);
  const long rows = std::count(ca.begin(), ca.end(), '\n') - 2;
  const bool ok = ra == 0 && rb == 0 && !ca.empty() && ca == cb;
  return {ok, fmt("two study runs (1 and 4 workers): %s, %ld rows", ca == cb ? "byte-identical" : "DIFFERENT", rows)};
}

}  // namespace

int main() {
  int failed = 0;
  failed += run("AC1", 10, ac1);
  failed += run("AC2", 10, ac2);
  failed += run("AC3", 180, ac3);
  failed += run("AC4", 0, ac4);
  failed += run("AC5", 120, ac5);
  failed += run("AC6", 120, ac6);
  failed += run("AC7", 0, ac7);
  failed += run("AC8", 0, ac8);
  failed += run("AC9", 0, ac9);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed ? 1 : 0;
}
