#include "cli.hpp"

#include "rbflow/config.hpp"
#include "rbflow/estimates.hpp"
#include "rbflow/fiber_ode.hpp"
#include "rbflow/flow.hpp"
#include "rbflow/io.hpp"
#include "rbflow/svg.hpp"
#include "rbflow/symbol.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace rbflow::cli {

namespace fs = std::filesystem;

namespace {

std::string sha256_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cli: cannot read " + p.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += {hex[md[i] >> 4], hex[md[i] & 15]};
  return out;
}

unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RBFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("cli: RBFLOW_THREADS must be a positive integer");
    n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

/// Runs fn(i) for i < count on up to thread_count() workers; results go by index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Context {
  std::string subcommand;
  fs::path out;
  Config cfg;
  std::vector<std::string> artifacts;

  std::ofstream create(const std::string& name) {
    if (name.empty() || fs::path(name).is_absolute() || name.find("..") != std::string::npos)
      throw ConfigError("cli: output '" + name + "' must be a plain path under --out");
    const fs::path p = out / name;
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cli: cannot write " + p.string());
    if (std::find(artifacts.begin(), artifacts.end(), name) == artifacts.end()) artifacts.push_back(name);
    return os;
  }

  void write_text(const std::string& name, const std::string& text) { create(name) << text; }

  void write_manifest() {
    std::ofstream os(out / "manifest.cfg", std::ios::binary);
    os << "# rbflow manifest\n# subcommand: " << subcommand << "\n";
    os << cfg.render();
    for (const auto& a : artifacts) os << "# sha256 " << sha256_file(out / a) << "  " << a << "\n";
  }
};

std::vector<int> int_list(const Config& c, const std::string& key) {
  std::vector<int> out;
  for (double v : c.list(key)) {
    if (v != std::floor(v)) throw ConfigError("cli: key '" + key + "' expects integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}


// --- symbol -----------------------------------------------------------------

const std::vector<KeySpec> kSymbolKeys = {
    {"n", "3", "dimensions, comma separated"},
    {"rho", "0", "rho values, comma separated"},
    {"variant", "deturck", "raw | deturck | operator_L"},
    {"output", "symbol.csv", "CSV file under --out"},
};

int run_symbol(Context& ctx) {
  const auto variant = parse_symbol_variant(ctx.cfg.str("variant"));
  std::ostringstream text;
  CsvWriter w(text, {"n", "rho", "eigenvalue", "multiplicity", "classification"});
  for (int n : int_list(ctx.cfg, "n"))
    for (double rho : ctx.cfg.list("rho")) {
      const ParabolicityReport rep = classify(n, rho);
      std::vector<EigenvalueCount> groups = rep.eigenvalues;
      if (variant != SymbolVariant::deturck) {
        Vector ev = real_spectrum(symbol(n, rho, variant).mat);
        std::sort(ev.begin(), ev.end());
        groups = group_eigenvalues(ev);
      }
      for (const auto& g : groups)
        w.row_cells({std::to_string(n), format_double(rho), format_double(g.value), std::to_string(g.multiplicity),
                     to_string(rep.classification)});
    }
  ctx.write_text(ctx.cfg.str("output"), text.str());
  std::cout << text.str();
  return ok;
}

// --- fiber ------------------------------------------------------------------

const std::vector<KeySpec> kFiberKeys = {
    {"start", "1,0.5,0", "lambda,mu,nu with lambda >= mu >= nu"},
    {"rho", "0", "rho"},
    {"t_end", "1", "final time"},
    {"tol", "1e-10", "absolute and relative tolerance"},
    {"samples", "101", "uniform dense-output samples"},
    {"output", "trajectory.csv", "CSV file under --out"},
    {"plot", "true", "write trajectory.svg"},
};

int run_fiber(Context& ctx) {
  const auto s = ctx.cfg.list("start");
  if (s.size() != 3) throw ConfigError("cli: start needs three values");
  const double rho = ctx.cfg.num("rho");
  const Trajectory tr = integrate_eigen({s[0], s[1], s[2], 0.0}, rho, ctx.cfg.num("t_end"), ctx.cfg.num("tol"));
  const long samples = ctx.cfg.integer("samples");
  if (samples < 2) throw ConfigError("cli: samples must be at least 2");
  std::ostringstream text;
  CsvWriter w(text, {"t", "lambda", "mu", "nu"});
  std::vector<Series> series{{"lambda", {}, {}}, {"mu", {}, {}}, {"nu", {}, {}}};
  for (long i = 0; i < samples; ++i) {
    const double t = i + 1 == samples ? tr.t_final() : tr.t_begin() + (tr.t_final() - tr.t_begin()) * i / (samples - 1);
    const EigenState e = eigen_state_at(tr, t);
    w.row({t, e.lambda, e.mu, e.nu});
    for (int c = 0; c < 3; ++c) {
      series[c].x.push_back(t);
      series[c].y.push_back(c == 0 ? e.lambda : c == 1 ? e.mu : e.nu);
    }
  }
  ctx.write_text(ctx.cfg.str("output"), text.str());
  if (ctx.cfg.flag("plot"))
    ctx.write_text("trajectory.svg", svg_plot(series, {"eigenvalue system, rho = " + format_double(rho), "t", "eigenvalues"}));
  std::cout << "fiber: status=" << to_string(tr.status) << " t_final=" << format_double(tr.t_final())
            << " steps=" << tr.steps << " rejected=" << tr.rejected << "\n";
  return tr.status == RunStatus::blow_up ? blow_up : ok;
}

// --- cones ------------------------------------------------------------------

const std::vector<KeySpec> kConeKeys = {
    {"cones", "sec_nonneg,ricci_nonneg,pinching:0.1,pinching:0.2,pinching:0.3333333333333333", "cone names"},
    {"rho", "0,0.1,0.2", "rho values"},
    {"count", "1000", "starts per cone and rho"},
    {"seed", "1", "random seed"},
    {"scale", "1", "size of random starts"},
    {"t_end", "10", "final time of each run"},
    {"tol", "1e-10", "integrator tolerance"},
    {"margin_tol", "1e-8", "allowed scaled margin dip"},
    {"output", "cones.csv", "per-run CSV under --out"},
    {"summary", "cones_summary.csv", "per-cone summary CSV under --out"},
};

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

int run_cones(Context& ctx) {
  const auto names = ctx.cfg.words("cones");
  const auto rhos = ctx.cfg.list("rho");
  const long count = ctx.cfg.integer("count");
  if (count < 1) throw ConfigError("cli: count must be positive");
  const double scale = ctx.cfg.num("scale"), t_end = ctx.cfg.num("t_end"), tol = ctx.cfg.num("tol");
  const double margin_tol = ctx.cfg.num("margin_tol");
  std::mt19937_64 rng(static_cast<std::uint64_t>(ctx.cfg.integer("seed")));
  struct Job {
    ConeSpec cone;
    double rho;
    EigenState start;
  };
  std::vector<Job> jobs;
  for (const auto& name : names) {
    const ConeSpec cone = parse_cone(name);
    for (double rho : rhos)
      for (long i = 0; i < count; ++i) jobs.push_back({cone, rho, random_cone_start(cone, rng, scale)});
  }
  std::vector<ConeRun> runs(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) { runs[i] = run_cone(jobs[i].start, jobs[i].rho, jobs[i].cone, t_end, tol); });

  std::ostringstream text, summary;
  CsvWriter w(text, {"cone", "rho", "lambda0", "mu0", "nu0", "status", "exit_time", "t_final", "lambda", "mu", "nu",
                     "min_scaled_margin"});
  CsvWriter s(summary, {"cone", "rho", "runs", "exits", "blow_ups", "min_scaled_margin"});
  bool violated = false;
  for (std::size_t g = 0; g < jobs.size(); g += count) {
    long exits = 0, blow_ups = 0;
    double worst = kInf;
    for (std::size_t i = g; i < g + count; ++i) {
      const ConeRun& r = runs[i];
      const bool bad = r.exit_time.has_value() || r.min_scaled_margin < -margin_tol;
      exits += bad;
      blow_ups += r.status == RunStatus::blow_up;
      worst = std::min(worst, r.min_scaled_margin);
      w.row_cells({to_string(r.cone), format_double(r.rho), format_double(r.start.lambda), format_double(r.start.mu),
                   format_double(r.start.nu), to_string(r.status), cell(r.exit_time), format_double(r.final_state.t),
                   format_double(r.final_state.lambda), format_double(r.final_state.mu), format_double(r.final_state.nu),
                   format_double(r.min_scaled_margin)});
    }
    violated |= exits > 0;
    s.row_cells({to_string(jobs[g].cone), format_double(jobs[g].rho), std::to_string(count), std::to_string(exits),
                 std::to_string(blow_ups), format_double(worst)});
    std::cout << "cones: " << to_string(jobs[g].cone) << " rho=" << format_double(jobs[g].rho) << " exits=" << exits
              << " min_scaled_margin=" << format_double(worst) << "\n";
  }
  ctx.write_text(ctx.cfg.str("output"), text.str());
  ctx.write_text(ctx.cfg.str("summary"), summary.str());
  if (violated) std::cerr << "rbflow cones: INVARIANT VIOLATION: a start left its cone\n";
  return violated ? invariant_violation : ok;
}

// --- hi ---------------------------------------------------------------------

const std::vector<KeySpec> kHiKeys = {
    {"rho", "0,0.1,0.15", "rho values in [0, 1/6)"},
    {"count", "1000", "starts per rho"},
    {"seed", "1", "random seed"},
    {"t_end", "10", "final time of each run"},
    {"tol", "1e-10", "integrator tolerance"},
    {"margin_tol", "1e-6", "allowed scaled K(t) margin dip"},
    {"decrease_tol", "1e-6", "allowed scaled decrease of f"},
    {"scalar_normalization", "false", "use R = 2 tr on the left of the bound"},
    {"output", "hi.csv", "per-run CSV under --out"},
    {"summary", "hi_summary.csv", "per-rho summary CSV under --out"},
    {"plot", "true", "write hi_fmin.svg"},
};

int run_hi(Context& ctx) {
  const auto rhos = ctx.cfg.list("rho");
  const long count = ctx.cfg.integer("count");
  if (count < 1) throw ConfigError("cli: count must be positive");
  const double t_end = ctx.cfg.num("t_end"), tol = ctx.cfg.num("tol");
  const double margin_tol = ctx.cfg.num("margin_tol"), decrease_tol = ctx.cfg.num("decrease_tol");
  const bool scalar = ctx.cfg.flag("scalar_normalization");
  std::mt19937_64 rng(static_cast<std::uint64_t>(ctx.cfg.integer("seed")));
  std::vector<std::pair<double, EigenState>> jobs;
  for (double rho : rhos) {
    const ConeSpec cone = ConeSpec::hamilton_ivey(rho, scalar);
    for (long i = 0; i < count; ++i) jobs.emplace_back(rho, random_cone_start(cone, rng));
  }
  std::vector<ConeRun> runs(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    runs[i] = run_cone(jobs[i].second, jobs[i].first, ConeSpec::hamilton_ivey(jobs[i].first, scalar), t_end, tol);
  });
  std::ostringstream text, summary;
  CsvWriter w(text, {"rho", "lambda0", "mu0", "nu0", "status", "t_final", "min_scaled_margin", "f_min",
                     "f_max_decrease", "min_trace_slack"});
  CsvWriter s(summary, {"rho", "runs", "violations", "min_scaled_margin", "f_min", "f_max_decrease"});
  std::vector<Series> scatter;
  bool violated = false;
  for (std::size_t g = 0; g < jobs.size(); g += count) {
    long bad = 0;
    double worst = kInf, fmin = kInf, fdec = 0.0;
    Series ser{"rho = " + format_double(jobs[g].first), {}, {}};
    for (std::size_t i = g; i < g + count; ++i) {
      const ConeRun& r = runs[i];
      const bool v = r.min_scaled_margin < -margin_tol || r.f_max_decrease > decrease_tol;
      bad += v;
      worst = std::min(worst, r.min_scaled_margin);
      if (std::isfinite(r.f_min)) fmin = std::min(fmin, r.f_min);
      fdec = std::max(fdec, r.f_max_decrease);
      ser.x.push_back(static_cast<double>(i - g));
      ser.y.push_back(r.f_min);
      w.row_cells({format_double(r.rho), format_double(r.start.lambda), format_double(r.start.mu),
                   format_double(r.start.nu), to_string(r.status), format_double(r.final_state.t),
                   format_double(r.min_scaled_margin), format_double(r.f_min), format_double(r.f_max_decrease),
                   format_double(r.min_trace_slack)});
    }
    scatter.push_back(std::move(ser));
    violated |= bad > 0;
    s.row_cells({format_double(jobs[g].first), std::to_string(count), std::to_string(bad), format_double(worst),
                 format_double(fmin), format_double(fdec)});
    std::cout << "hi: rho=" << format_double(jobs[g].first) << " violations=" << bad
              << " min_scaled_margin=" << format_double(worst) << " f_min=" << format_double(fmin) << "\n";
  }
  ctx.write_text(ctx.cfg.str("output"), text.str());
  ctx.write_text(ctx.cfg.str("summary"), summary.str());
  if (ctx.cfg.flag("plot")) {
    PlotOptions opt{"Hamilton-Ivey sweep: minimum of f per start", "start", "f_min"};
    opt.scatter = true;
    ctx.write_text("hi_fmin.svg", svg_plot(scatter, opt));
  }
  if (violated) std::cerr << "rbflow hi: INVARIANT VIOLATION: K(t) membership or monotonicity of f failed\n";
  return violated ? invariant_violation : ok;
}

// --- flow -------------------------------------------------------------------

const std::vector<KeySpec> kFlowKeys = {
    {"n", "2", "dimension"},
    {"rho", "0", "rho < 1/(2(n-1))"},
    {"grid", "", "points per axis, comma separated; default 32 per axis (1 for the sphere model)"},
    {"model", "finite_difference", "finite_difference | round_sphere"},
    {"init", "conformal_bump", "flat | perturbation | conformal_bump | rough | sphere"},
    {"amplitude", "0.3", "initial-data amplitude"},
    {"max_mode", "2", "highest Fourier mode of random initial data"},
    {"c0", "1", "sphere scale factor"},
    {"seed", "1", "random seed"},
    {"dt_policy", "cfl", "fixed | cfl"},
    {"dt", "1e-3", "fixed step, or cap of CFL steps"},
    {"cfl", "0.1", "CFL number"},
    {"t_end", "0.1", "final time"},
    {"blow_up_threshold", "1e6", "threshold on sup |Riem|"},
    {"uhlenbeck", "true", "evolve the Uhlenbeck frame"},
    {"energy_k", "-1", "largest k of energy monitors (< 0: off)"},
    {"sample_every", "1", "monitor every this many steps"},
    {"residuals", "", "targets: christoffel, scalar, ricci, riemann, weyl, volume"},
    {"residual_dt", "1e-4", "step of the centered residual stencil"},
    {"monitors_csv", "monitors.csv", "monitor series under --out"},
    {"residuals_csv", "residuals.csv", "residual series under --out"},
    {"snapshot", "final_metric.rbtf", "final metric, binary tensor field under --out"},
    {"plots", "true", "write SVG line plots"},
    {"plot_log", "false", "log scale for the curvature plots"},
};

MetricField initial_metric(const Config& c, int n, const Grid& grid) {
  const std::string init = c.str("init");
  const double amp = c.num("amplitude");
  const unsigned seed = static_cast<unsigned>(c.integer("seed"));
  if (init == "flat") return MetricField::flat(grid, n);
  if (init == "perturbation") return random_perturbation(grid, n, amp, seed, static_cast<int>(c.integer("max_mode")));
  if (init == "sphere") {
    if (grid.size() != 1) throw ConfigError("cli: init = sphere needs a single-point grid");
    return sphere_fiber(c.num("c0"), n);
  }
  if (n != 2) throw ConfigError("cli: init = " + init + " needs n = 2");
  if (init == "conformal_bump")
    return conformal_metric(
        scalar_field(grid, [amp](std::span<const double> x) { return amp * std::sin(x[0]) * std::sin(x[1]); }));
  if (init == "rough") return conformal_metric(band_limited_field(grid, static_cast<int>(c.integer("max_mode")), amp, seed));
  throw ConfigError("cli: unknown init '" + init + "'");
}

int run_flow(Context& ctx) {
  const Config& c = ctx.cfg;
  FlowConfig fc;
  fc.n = static_cast<int>(c.integer("n"));
  fc.rho = c.num("rho");
  const std::string model = c.str("model");
  if (model == "finite_difference") fc.model = CurvatureModel::finite_difference;
  else if (model == "round_sphere") fc.model = CurvatureModel::round_sphere;
  else throw ConfigError("cli: unknown model '" + model + "'");
  fc.dims = int_list(c, "grid");
  if (fc.dims.empty()) fc.dims.assign(fc.n, fc.model == CurvatureModel::round_sphere ? 1 : 32);
  const std::string policy = c.str("dt_policy");
  if (policy == "fixed") fc.dt_policy = DtPolicy::fixed;
  else if (policy == "cfl") fc.dt_policy = DtPolicy::cfl;
  else throw ConfigError("cli: unknown dt_policy '" + policy + "'");
  fc.dt = c.num("dt");
  fc.cfl = c.num("cfl");
  fc.t_end = c.num("t_end");
  fc.blow_up_threshold = c.num("blow_up_threshold");
  fc.uhlenbeck = c.flag("uhlenbeck");
  fc.energy_k = static_cast<int>(c.integer("energy_k"));
  fc.sample_every = static_cast<int>(c.integer("sample_every"));
  std::vector<ResidualTarget> targets;
  for (const auto& w : c.words("residuals")) targets.push_back(parse_residual_target(w));
  fc.keep_snapshots = !targets.empty();
  fc.validate();

  const MetricField g0 = initial_metric(c, fc.n, Grid(fc.dims));
  const FlowResult r = run(fc, g0);

  std::vector<std::string> header{"t", "R_min", "R_max", "vol", "sup_riem", "total_R", "riem_l2_sq", "uhlenbeck_defect"};
  for (int k = 0; k <= fc.energy_k; ++k)
    for (const char* name : {"A_", "f_", "grad_riem_l2_sq_"}) header.push_back(name + std::to_string(k));
  std::ostringstream mon;
  CsvWriter w(mon, header);
  std::vector<Series> rs{{"R_min", {}, {}}, {"R_max", {}, {}}}, sup{{"sup_riem", {}, {}}};
  for (const auto& m : r.samples) {
    std::vector<double> row{m.t, m.r_min, m.r_max, m.volume, m.sup_riem, m.total_scalar, m.riem_l2_sq, m.uhlenbeck_defect};
    for (int k = 0; k <= fc.energy_k; ++k) {
      row.push_back(m.energy_a[k]);
      row.push_back(m.energy_f[k]);
      row.push_back(m.grad_riem_l2_sq[k]);
    }
    w.row(row);
    rs[0].x.push_back(m.t), rs[0].y.push_back(m.r_min);
    rs[1].x.push_back(m.t), rs[1].y.push_back(m.r_max);
    sup[0].x.push_back(m.t), sup[0].y.push_back(m.sup_riem);
  }
  ctx.write_text(c.str("monitors_csv"), mon.str());

  if (!targets.empty()) {
    std::vector<std::string> rh{"t"};
    for (auto t : targets) rh.push_back(to_string(t));
    std::ostringstream res;
    CsvWriter rw(res, rh);
    const double rdt = c.num("residual_dt");
    for (const auto& s : r.snapshots) {
      std::vector<double> row{s.t};
      try {
        const FlowState prev = step(s, fc.rho, -rdt, fc.model), next = step(s, fc.rho, rdt, fc.model);
        for (auto t : targets) row.push_back(evolution_residual(prev, s, next, fc.rho, t).value);
      } catch (const DegenerateMetricError&) {
        row.resize(targets.size() + 1, std::numeric_limits<double>::quiet_NaN());
      }
      rw.row(row);
    }
    ctx.write_text(c.str("residuals_csv"), res.str());
  }
  {
    std::ostringstream bin;
    write_tensor_field(bin, r.final_state.g.as_tensor_field());
    ctx.write_text(c.str("snapshot"), bin.str());
  }
  if (c.flag("plots")) {
    PlotOptions o{"scalar curvature", "t", "R"};
    o.log_y = c.flag("plot_log");
    ctx.write_text("scalar.svg", svg_plot(rs, o));
    PlotOptions o2{"sup |Riem|", "t", "sup |Riem|_g"};
    o2.log_y = c.flag("plot_log");
    ctx.write_text("sup_riem.svg", svg_plot(sup, o2));
  }

  // Invariants that must hold on every run in the parabolic range.
  std::string violation;
  for (std::size_t i = 1; i < r.samples.size(); ++i) {
    const double prev = r.samples[i - 1].r_min;
    if (r.samples[i].r_min < prev - 1e-8 * std::max(1.0, std::abs(prev))) {
      violation = "R_min decreased at t = " + format_double(r.samples[i].t);
      break;
    }
  }
  if (violation.empty() && fc.uhlenbeck && r.status == FlowStatus::completed && r.samples.back().uhlenbeck_defect > 1e-6)
    violation = "Uhlenbeck defect " + format_double(r.samples.back().uhlenbeck_defect) + " exceeds 1e-6";

  const auto& last = r.samples.back();
  std::cout << "flow: status=" << to_string(r.status) << " t=" << format_double(r.last_good_time) << " steps=" << r.steps
            << " R_min=" << format_double(last.r_min) << " sup_riem=" << format_double(last.sup_riem) << "\n";
  if (!r.message.empty()) std::cout << "flow: " << r.message << "\n";
  if (r.status == FlowStatus::blow_up) return blow_up;
  if (r.status == FlowStatus::positivity_lost) return positivity_lost;
  if (!violation.empty()) {
    std::cerr << "rbflow flow: INVARIANT VIOLATION: " << violation << "\n";
    return invariant_violation;
  }
  return ok;
}

// --- estimates --------------------------------------------------------------

const std::vector<KeySpec> kEstimateKeys = {
    {"seed", "1", "random seed"},
    {"count", "500", "fields in the corpus"},
    {"max_mode", "6", "highest Fourier mode per axis"},
    {"grid", "64,64", "coarse grid"},
    {"k_max", "4", "largest k; all 0 < j < k are reported"},
    {"p", "inf,2,4", "p exponents"},
    {"q", "2", "q exponent"},
    {"refine", "false", "also evaluate on the grid with half the spacing"},
    {"stability_tol", "0.1", "allowed relative change under refinement"},
    {"output", "estimates.csv", "per-field CSV under --out"},
    {"summary", "estimates_summary.csv", "percentile summary under --out"},
};

int run_estimates(Context& ctx) {
  const Config& c = ctx.cfg;
  const long count = c.integer("count");
  const int max_mode = static_cast<int>(c.integer("max_mode")), k_max = static_cast<int>(c.integer("k_max"));
  const auto dims = int_list(c, "grid");
  const auto ps = c.list("p");
  const double q = c.num("q"), stab = c.num("stability_tol");
  const bool refine = c.flag("refine");
  if (count < 1 || k_max < 2 || dims.empty()) throw ConfigError("cli: need count >= 1, k_max >= 2 and a grid");
  const unsigned seed = static_cast<unsigned>(c.integer("seed"));
  struct Key {
    int j, k;
    double p;
  };
  std::vector<Key> keys;
  for (int k = 2; k <= k_max; ++k)
    for (int j = 1; j < k; ++j)
      for (double p : ps) keys.push_back({j, k, p});

  auto ratios_on = [&](const std::vector<int>& d, unsigned s) {
    const Grid grid(d);
    const Quadrature quad(MetricField::flat(grid, grid.dim()));
    const auto tower = derivative_tower(band_limited_field(grid, max_mode, 1.0, s), k_max, quad.gamma);
    std::vector<double> out;
    for (const auto& key : keys) {
      const auto r = interpolation_ratio(tower, key.j, key.k, key.p, q, quad);
      out.push_back(r ? *r : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
  };
  std::vector<int> fine = dims;
  for (auto& d : fine) d *= 2;
  std::vector<std::vector<double>> coarse(count), refined(refine ? count : 0);
  parallel_for(count, [&](std::size_t i) {
    const unsigned s = seed * 1000003u + static_cast<unsigned>(i);
    coarse[i] = ratios_on(dims, s);
    if (refine) refined[i] = ratios_on(fine, s);
  });

  std::ostringstream text, summary;
  std::vector<std::string> header{"field", "j", "k", "p", "q", "ratio"};
  if (refine) header.insert(header.end(), {"ratio_fine", "relative_change"});
  CsvWriter w(text, header);
  CsvWriter s(summary, {"j", "k", "p", "q", "p50", "p90", "p99", "max", "max_relative_change"});
  long unstable = 0;
  for (std::size_t kk = 0; kk < keys.size(); ++kk) {
    std::vector<double> vals;
    double worst_change = 0.0;
    for (long i = 0; i < count; ++i) {
      std::vector<double> row{double(i), double(keys[kk].j), double(keys[kk].k), keys[kk].p, q, coarse[i][kk]};
      if (refine) {
        const double change = std::abs(coarse[i][kk] / refined[i][kk] - 1.0);
        row.push_back(refined[i][kk]);
        row.push_back(change);
        worst_change = std::max(worst_change, change);
        unstable += !(change <= stab);
      }
      w.row(row);
      vals.push_back(coarse[i][kk]);
    }
    std::sort(vals.begin(), vals.end());
    auto pct = [&](double f) { return vals[std::min<std::size_t>(vals.size() - 1, static_cast<std::size_t>(f * (vals.size() - 1) + 0.5))]; };
    s.row({double(keys[kk].j), double(keys[kk].k), keys[kk].p, q, pct(0.5), pct(0.9), pct(0.99), vals.back(),
           refine ? worst_change : std::numeric_limits<double>::quiet_NaN()});
  }
  ctx.write_text(c.str("output"), text.str());
  ctx.write_text(c.str("summary"), summary.str());
  std::cout << "estimates: fields=" << count << " ratios=" << keys.size() * count;
  if (refine) std::cout << " unstable=" << unstable;
  std::cout << "\n";
  if (unstable > 0) {
    std::cerr << "rbflow estimates: INVARIANT VIOLATION: " << unstable << " ratios moved more than "
              << format_double(stab) << " under refinement\n";
    return invariant_violation;
  }
  return ok;
}

// --- plots ------------------------------------------------------------------

const std::vector<KeySpec> kPlotKeys = {
    {"csv", "", "input CSV with header t,<name>,..."},
    {"log_y", "false", "log scale"},
    {"scatter", "false", "markers instead of lines"},
    {"title", "", "plot title"},
};

int run_plots(Context& ctx) {
  const std::string path = ctx.cfg.str("csv");
  if (path.empty()) throw ConfigError("cli: plots needs csv = <file>");
  std::ifstream is(path);
  if (!is) throw ConfigError("cli: cannot open '" + path + "'");
  CsvTable table;
  try {
    table = read_csv(is);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("cli: ") + e.what());
  }
  if (table.header.empty() || table.header[0] != "t") throw ConfigError("cli: CSV header must start with t");
  const std::string stem = fs::path(path).stem().string();
  for (std::size_t col = 1; col < table.header.size(); ++col) {
    Series s{table.header[col], {}, {}};
    for (const auto& row : table.rows) s.x.push_back(row[0]), s.y.push_back(row[col]);
    PlotOptions o{ctx.cfg.str("title").empty() ? table.header[col] : ctx.cfg.str("title"), "t", table.header[col]};
    o.log_y = ctx.cfg.flag("log_y");
    o.scatter = ctx.cfg.flag("scatter");
    ctx.write_text(stem + "_" + table.header[col] + ".svg", svg_plot({s}, o));
  }
  std::cout << "plots: " << table.header.size() - 1 << " series from " << path << "\n";
  return ok;
}

struct Command {
  std::string name, help;
  const std::vector<KeySpec>* keys;
  int (*fn)(Context&);
};

const std::vector<Command> kCommands = {
    {"symbol", "principal-symbol spectra and classification", &kSymbolKeys, run_symbol},
    {"fiber", "eigenvalue ODE trajectory", &kFiberKeys, run_fiber},
    {"cones", "preserved-cone sweep of the eigenvalue ODE", &kConeKeys, run_cones},
    {"hi", "Hamilton-Ivey sweep", &kHiKeys, run_hi},
    {"flow", "method-of-lines flow run", &kFlowKeys, run_flow},
    {"estimates", "interpolation-ratio corpus", &kEstimateKeys, run_estimates},
    {"plots", "SVG plots of a CSV series", &kPlotKeys, run_plots},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rbflow: numerical lab for the Ricci-Bourguignon flow"};
  app.require_subcommand(1);
  std::string out = "rbflow_out";
  app.add_option("--out", out, "output directory")->capture_default_str();
  struct Bound {
    CLI::App* sub;
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : kCommands) {
    auto b = std::make_unique<Bound>();
    b->sub = app.add_subcommand(cmd.name, cmd.help);
    b->sub->fallthrough();
    b->sub->add_option("--config", b->config, "key = value file");
    for (const auto& k : *cmd.keys) {
      std::string names = "--" + k.key;
      if (k.key.find('_') != std::string::npos) {
        std::string dashed = k.key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        names += ",--" + dashed;
      }
      b->options[k.key] = b->sub->add_option(names, b->values[k.key], k.help + " [" + k.default_value + "]");
    }
    bound.push_back(std::move(b));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }
  for (std::size_t i = 0; i < kCommands.size(); ++i) {
    Bound& b = *bound[i];
    if (!b.sub->parsed()) continue;
    const Command& cmd = kCommands[i];
    try {
      Context ctx{cmd.name, fs::path(out), Config(*cmd.keys), {}};
      if (!b.config.empty()) ctx.cfg.load_file(b.config);
      for (const auto& [key, opt] : b.options)
        if (opt->count() > 0) ctx.cfg.set(key, b.values[key]);
      fs::create_directories(ctx.out);
      const int code = cmd.fn(ctx);
      ctx.write_manifest();
      return code;
    } catch (const ConfigError& e) {
      std::cerr << "rbflow " << cmd.name << ": " << e.what() << "\n";
      return usage;
    } catch (const std::exception& e) {
      std::cerr << "rbflow " << cmd.name << ": error: " << e.what() << "\n";
      return usage;
    }
  }
  return usage;
}

}  // namespace rbflow::cli
