#include "facetflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

namespace facetflow {

namespace {

double get_num(const nlohmann::json& j, const std::string& path, double fallback,
               bool required = false) {
  const nlohmann::json* cur = &j;
  std::string field;
  std::istringstream is(path);
  while (std::getline(is, field, '.')) {
    if (!cur->is_object() || !cur->contains(field)) {
      if (required) throw ConfigError("config: missing field '" + path + "'");
      return fallback;
    }
    cur = &cur->at(field);
  }
  if (!cur->is_number()) throw ConfigError("config: field '" + path + "' must be a number");
  return cur->get<double>();
}

std::string csv(double v) { return format_double(v); }

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  ScenarioConfig c;
  if (j.contains("preset")) {
    const auto& p = j.at("preset");
    if (p.is_string()) {
      c.preset = p.get<std::string>();
    } else if (p.is_object()) {
      if (p.contains("file")) {
        c.preset = "file";
        c.profile_file = p.at("file").get<std::string>();
      } else {
        c.preset = p.at("name").get<std::string>();
        if (p.contains("m")) c.corner_m = p.at("m").get<int>();
        if (p.contains("e")) c.perturbation = p.at("e").get<double>();
      }
    } else {
      throw ConfigError("config: field 'preset' must be a string or object");
    }
  }
  if (j.contains("anisotropy")) {
    const auto& a = j.at("anisotropy");
    if (a.is_string()) {
      c.anisotropy = a.get<std::string>();
      if (c.anisotropy != "square" && c.anisotropy != "pentagon")
        throw ConfigError("config: anisotropy must be 'square', 'pentagon' or custom");
    } else if (a.is_object()) {
      c.anisotropy = "custom";
      c.corners = a.at("corners").get<std::vector<double>>();
      c.weights = a.at("weights").get<std::vector<double>>();
    } else {
      throw ConfigError("config: field 'anisotropy' malformed");
    }
  }
  if (j.contains("solvers")) {
    c.solvers = j.at("solvers").get<std::vector<std::string>>();
    for (const auto& s : c.solvers)
      if (s != "tracker" && s != "regularized" && s != "scheme")
        throw ConfigError("config: solvers[*] must be tracker|regularized|scheme, got '" + s + "'");
  }
  c.T = get_num(j, "T", c.T);
  if (!(c.T >= 0)) throw ConfigError("config: T must be nonnegative");
  if (j.contains("sample_times")) {
    c.sample_times = j.at("sample_times").get<std::vector<double>>();
    if (!std::is_sorted(c.sample_times.begin(), c.sample_times.end()))
      throw ConfigError("config: sample_times must be sorted");
    for (double t : c.sample_times)
      if (t < 0 || t > c.T) throw ConfigError("config: sample_times must lie in [0, T]");
  }
  c.regularized.epsilon = get_num(j, "regularized.epsilon", c.regularized.epsilon);
  c.regularized.dt = get_num(j, "regularized.dt", c.regularized.dt);
  c.regularized.theta = get_num(j, "regularized.theta", c.regularized.theta);
  c.regularized.newton_tol = get_num(j, "regularized.newton_tol", c.regularized.newton_tol);
  c.regularized_n = int(get_num(j, "regularized.n", c.regularized_n));
  c.scheme_n = int(get_num(j, "scheme.n", c.scheme_n));
  c.scheme_h = get_num(j, "scheme.h", c.scheme_h);
  c.scheme_grad_tol = get_num(j, "scheme.grad_tol", c.scheme_grad_tol);
  if (j.contains("scheme") && j.at("scheme").contains("eps_ladder"))
    c.scheme_eps_ladder = j.at("scheme").at("eps_ladder").get<std::vector<double>>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (!(c.regularized.epsilon > 0)) throw ConfigError("config: regularized.epsilon must be > 0");
  if (!(c.regularized.dt > 0)) throw ConfigError("config: regularized.dt must be > 0");
  if (!(c.scheme_h > 0)) throw ConfigError("config: scheme.h must be > 0");
  if (c.regularized_n < 16) throw ConfigError("config: regularized.n must be >= 16");
  if (c.scheme_n < 16) throw ConfigError("config: scheme.n must be >= 16");
  return c;
}

nlohmann::json ScenarioConfig::to_json() const {
  nlohmann::json j;
  if (preset == "file") {
    j["preset"] = {{"file", profile_file.value_or("")}};
  } else if (preset == "corner") {
    j["preset"] = {{"name", preset}, {"m", corner_m}};
  } else if (preset == "perturbed-square") {
    j["preset"] = {{"name", preset}, {"e", perturbation}};
  } else {
    j["preset"] = preset;
  }
  if (anisotropy == "custom")
    j["anisotropy"] = {{"corners", corners}, {"weights", weights}};
  else
    j["anisotropy"] = anisotropy;
  j["solvers"] = solvers;
  j["T"] = T;
  j["sample_times"] = sample_times;
  j["regularized"] = {{"n", regularized_n},
                      {"epsilon", regularized.epsilon},
                      {"dt", regularized.dt},
                      {"theta", regularized.theta},
                      {"newton_tol", regularized.newton_tol}};
  j["scheme"] = {{"n", scheme_n},
                 {"h", scheme_h},
                 {"eps_ladder", scheme_eps_ladder},
                 {"grad_tol", scheme_grad_tol}};
  j["seed"] = seed;
  return j;
}

AnisotropyJ ScenarioConfig::make_anisotropy() const {
  if (anisotropy == "square") return AnisotropyJ::square();
  if (anisotropy == "pentagon") return presets::pentagon();
  return AnisotropyJ(corners, weights);
}

Profile ScenarioConfig::make_profile() const {
  if (preset == "parabola") return presets::parabola();
  if (preset == "minimal") return presets::minimal();
  if (preset == "minimal-reversed") return presets::minimal_reversed();
  if (preset == "corner") return presets::corner(corner_m);
  if (preset == "two-hump") return presets::two_hump();
  if (preset == "perturbed-square") return presets::perturbed_square(perturbation);
  if (preset == "polygon") return presets::polygon(make_anisotropy());
  if (preset == "random") {
    Rng rng(seed);
    return presets::random_jr(rng);
  }
  if (preset == "file") {
    if (!profile_file) throw ConfigError("config: preset.file missing path");
    std::ifstream in(*profile_file);
    if (!in) throw ConfigError("config: profile file '" + *profile_file + "' not found");
    nlohmann::json j;
    in >> j;
    return Profile::from_json(j);
  }
  throw ConfigError("config: unknown preset '" + preset + "'");
}

nlohmann::json CrossValidation::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const Row& r : rows) {
    nlohmann::json row;
    row["t"] = r.t;
    if (r.tracker_vs_regularized_sup >= 0) {
      row["tracker_vs_regularized_sup"] = r.tracker_vs_regularized_sup;
      row["tracker_vs_regularized_l2"] = r.tracker_vs_regularized_l2;
    }
    if (r.tracker_vs_scheme_sup >= 0) {
      row["tracker_vs_scheme_sup"] = r.tracker_vs_scheme_sup;
      row["tracker_vs_scheme_l2"] = r.tracker_vs_scheme_l2;
    }
    j["rows"].push_back(row);
  }
  j["violations"] = violations;
  j["notes"] = notes;
  return j;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text,
                std::vector<std::string>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolverError("cannot write " + path.string());
  out << text;
  written.push_back(path.filename().string());
}

std::string milestones_json(const Milestones& m) {
  nlohmann::json j;
  auto fin = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
  };
  j["T_cx"] = fin(m.t_cx);
  j["T_fa"] = fin(m.t_fa);
  j["T_1"] = fin(m.t_1);
  j["asymptotic_rate"] = m.asymptotic_rate;
  j["N_sequence"] = m.facet_counts;
  j["t_sequence"] = m.epoch_times;
  return j.dump(2) + "\n";
}

const char* event_kind_name(EventRecord::Kind k) {
  switch (k) {
    case EventRecord::Kind::creation: return "creation";
    case EventRecord::Kind::merge: return "merge";
    case EventRecord::Kind::zero_extinction: return "zero_extinction";
    case EventRecord::Kind::collinear_merge: return "collinear_merge";
    case EventRecord::Kind::discard: return "discard";
    case EventRecord::Kind::full_faceting: return "full_faceting";
    case EventRecord::Kind::asymptotic_entry: return "asymptotic_entry";
  }
  return "unknown";
}

}  // namespace

ScenarioArtifacts run_scenario(const ScenarioConfig& cfg,
                               const std::filesystem::path& out_dir) {
  ScenarioArtifacts art;
  art.config = cfg;
  AnisotropyJ J = cfg.make_anisotropy();
  Profile p0 = cfg.make_profile();
  {
    auto bad = p0.validate(J);
    if (!bad.empty())
      throw ConfigError("config: initial profile invalid: " + bad.front());
  }
  std::filesystem::create_directories(out_dir);

  auto want = [&](const std::string& s) {
    return std::find(cfg.solvers.begin(), cfg.solvers.end(), s) != cfg.solvers.end();
  };
  std::vector<double> times = cfg.sample_times;
  if (times.empty()) times = {cfg.T};

  // --- tracker ---------------------------------------------------------
  std::optional<Tracker> tracker;
  std::vector<std::vector<double>> tracker_w(times.size());
  std::vector<std::vector<double>> tracker_w_scheme(times.size());
  const int n_grid = cfg.regularized_n;
  if (want("tracker") && J.is_square()) {
    tracker.emplace(p0, J);
    std::ostringstream traj;
    traj << "t,facet_id,xi_minus,xi_plus,tau,omega_minus,omega_plus\n";
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      tracker->advance_to(times[ti]);
      for (const FacetState& f : tracker->facets()) {
        double r = std::fmod(f.xi_minus, kTwoPi);
        if (r < 0) r += kTwoPi;
        traj << csv(times[ti]) << ',' << f.id << ',' << csv(r) << ','
             << csv(r + f.length()) << ',' << csv(f.tau) << ',' << csv(f.omega_minus)
             << ',' << csv(f.omega_plus) << "\n";
      }
      tracker_w[ti].resize(n_grid);
      for (int g = 0; g < n_grid; ++g)
        tracker_w[ti][g] = tracker->eval_w(kTwoPi * double(g) / double(n_grid));
      tracker_w_scheme[ti].resize(cfg.scheme_n);
      for (int g = 0; g < cfg.scheme_n; ++g)
        tracker_w_scheme[ti][g] = tracker->eval_w(kTwoPi * double(g) / double(cfg.scheme_n));
    }
    write_text(out_dir / "tracker_trajectory.csv", traj.str(), art.written_files);

    nlohmann::json ev = nlohmann::json::array();
    for (const EventRecord& e : tracker->events()) {
      ev.push_back({{"time", e.time},
                    {"kind", event_kind_name(e.kind)},
                    {"facets", e.facet_ids},
                    {"n_after", e.n_after}});
    }
    write_text(out_dir / "tracker_events.json", ev.dump(2) + "\n", art.written_files);
    art.milestones = tracker->milestones();
    write_text(out_dir / "tracker_milestones.json", milestones_json(*art.milestones),
               art.written_files);
  } else if (want("tracker")) {
    art.cross.notes.push_back("tracker skipped: non-square anisotropy");
  }

  // --- regularized ------------------------------------------------------
  std::vector<std::vector<double>> reg_w(times.size());
  if (want("regularized")) {
    RegularizedSolver solver(J, cfg.regularized);
    if (auto warn = solver.resolution_warning(n_grid); !warn.empty())
      art.cross.notes.push_back(warn);
    GridField f = GridField::sample(p0, n_grid);
    std::ostringstream snap, obs;
    snap << "t,s,lambda,phi,omega\n";
    obs << "t,tv,phi_min,phi_max,energy,dissipation\n";
    Observables o0 = solver.observables(f);
    double tv0 = o0.tv, lo0 = o0.phi_min, hi0 = o0.phi_max;
    bool tv_ok = true, range_ok = true;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      solver.run(f, times[ti]);
      Observables o = solver.observables(f);
      tv_ok = tv_ok && o.tv <= tv0 + 1e-8;
      range_ok = range_ok && o.phi_min >= lo0 - 1e-8 && o.phi_max <= hi0 + 1e-8;
      tv0 = std::min(tv0, o.tv);
      obs << csv(f.t) << ',' << csv(o.tv) << ',' << csv(o.phi_min) << ','
          << csv(o.phi_max) << ',' << csv(o.energy) << ',' << csv(solver.dissipation())
          << "\n";
      reg_w[ti].resize(n_grid);
      for (int g = 0; g < n_grid; ++g) {
        double s = kTwoPi * double(g) / double(n_grid);
        reg_w[ti][g] = f.values[g] + 0.5 * s * s;
        double phi = f.phi_half(g);
        snap << csv(f.t) << ',' << csv(s) << ',' << csv(f.values[g]) << ','
             << csv(phi) << ',' << csv(solver.energy().d1(phi)) << "\n";
      }
    }
    if (!tv_ok)
      art.cross.violations.push_back(
          "regularized solver: total-variation monotonicity failed");
    if (!range_ok)
      art.cross.violations.push_back("regularized solver: maximum principle failed");
    write_text(out_dir / "regularized_snapshots.csv", snap.str(), art.written_files);
    write_text(out_dir / "regularized_observables.csv", obs.str(), art.written_files);
  }

  // --- semi-discrete scheme ---------------------------------------------
  std::vector<std::vector<double>> scheme_w(times.size());
  if (want("scheme")) {
    SemiDiscreteScheme scheme(J, cfg.scheme_n, cfg.scheme_h, cfg.scheme_eps_ladder,
                              cfg.scheme_grad_tol);
    SchemeRun run = scheme.run(p0, cfg.T, true);
    std::ostringstream diag, snap;
    diag << "k,t,components,l1_change,sup_change,xi_inclusion,off_xi_dev,omega_slope_var\n";
    for (const StepDiagnostics& d : run.diagnostics) {
      diag << d.k << ',' << csv(d.t) << ',' << d.components_new << ','
           << csv(d.l1_change) << ',' << csv(d.sup_change) << ','
           << (d.xi_inclusion ? 1 : 0) << ',' << csv(d.off_xi_deviation) << ','
           << csv(d.omega_slope_variation) << "\n";
      if (!d.xi_inclusion)
        art.cross.violations.push_back(
            "scheme: facet-set inclusion failed at step " + std::to_string(d.k));
      if (d.components_new > d.components_prev)
        art.cross.violations.push_back(
            "scheme: component count increased at step " + std::to_string(d.k));
    }
    const double ds = kTwoPi / double(cfg.scheme_n);
    snap << "t,s,lambda,phi\n";
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      int k = std::min<int>(int(run.fields.size()) - 1,
                            int(std::llround(times[ti] / cfg.scheme_h)));
      const auto& lam = run.fields[k];
      scheme_w[ti].resize(cfg.scheme_n);
      for (int g = 0; g < cfg.scheme_n; ++g) {
        double s = ds * double(g);
        scheme_w[ti][g] = lam[g] + 0.5 * s * s;
        double next = (g + 1 < cfg.scheme_n) ? lam[g + 1] : lam[0];
        snap << csv(double(k) * cfg.scheme_h) << ',' << csv(s) << ',' << csv(lam[g])
             << ',' << csv((next - lam[g]) / ds + s + 0.5 * ds) << "\n";
      }
    }
    write_text(out_dir / "scheme_diagnostics.csv", diag.str(), art.written_files);
    write_text(out_dir / "scheme_snapshots.csv", snap.str(), art.written_files);
  }

  // --- cross validation ---------------------------------------------------
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    CrossValidation::Row row;
    row.t = times[ti];
    if (!tracker_w[ti].empty() && !reg_w[ti].empty()) {
      double sup = 0, l2 = 0;
      for (int g = 0; g < n_grid; ++g) {
        double d = std::fabs(tracker_w[ti][g] - reg_w[ti][g]);
        sup = std::max(sup, d);
        l2 += d * d;
      }
      row.tracker_vs_regularized_sup = sup;
      row.tracker_vs_regularized_l2 = std::sqrt(l2 * kTwoPi / double(n_grid));
    }
    if (!tracker_w_scheme[ti].empty() && !scheme_w[ti].empty()) {
      double sup = 0, l2 = 0;
      const double ds = kTwoPi / double(cfg.scheme_n);
      for (int g = 0; g < cfg.scheme_n; ++g) {
        double d = std::fabs(tracker_w_scheme[ti][g] - scheme_w[ti][g]);
        sup = std::max(sup, d);
        l2 += d * d;
      }
      row.tracker_vs_scheme_sup = sup;
      row.tracker_vs_scheme_l2 = std::sqrt(l2 * ds);
    }
    art.cross.rows.push_back(row);
  }
  if (cfg.preset == "minimal" || cfg.preset == "polygon")
    art.cross.notes.push_back("stationary shape, Lambda_t = 1");
  write_text(out_dir / "cross_validation.json", art.cross.to_json().dump(2) + "\n",
             art.written_files);
  write_text(out_dir / "run_metadata.json",
             nlohmann::json{{"config", cfg.to_json()}}.dump(2) + "\n",
             art.written_files);
  return art;
}

void emit_plot_data(const std::filesystem::path& bundle_dir,
                    const std::filesystem::path& out_file) {
  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw SolverError("cannot write " + out_file.string());
  out << "series,t,x,y,label\n";
  auto copy_csv = [&](const std::string& name, const std::string& series,
                      int tcol, int xcol, int ycol) {
    std::ifstream in(bundle_dir / name);
    if (!in) return;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::istringstream is(line);
      std::string cell;
      while (std::getline(is, cell, ',')) cells.push_back(cell);
      if (int(cells.size()) <= std::max({tcol, xcol, ycol})) continue;
      out << series << ',' << cells[tcol] << ',' << cells[xcol] << ','
          << cells[ycol] << ",\n";
    }
  };
  copy_csv("regularized_snapshots.csv", "regularized_lambda", 0, 1, 2);
  copy_csv("scheme_snapshots.csv", "scheme_lambda", 0, 1, 2);
  // Facet intervals from the tracker trajectory.
  {
    std::ifstream in(bundle_dir / "tracker_trajectory.csv");
    if (in) {
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream is(line);
        std::string cell;
        while (std::getline(is, cell, ',')) cells.push_back(cell);
        if (cells.size() < 7) continue;
        out << "facet_interval," << cells[0] << ',' << cells[2] << ',' << cells[3]
            << ",facet" << cells[1] << "\n";
      }
    }
  }
  // Milestone markers.
  {
    std::ifstream in(bundle_dir / "tracker_milestones.json");
    if (in) {
      nlohmann::json j;
      in >> j;
      for (const char* key : {"T_cx", "T_fa", "T_1"}) {
        if (j.contains(key) && j.at(key).is_number())
          out << "milestone," << format_double(j.at(key).get<double>()) << ",0,0,"
              << key << "\n";
      }
    }
  }
}

nlohmann::json run_convergence(const ScenarioConfig& cfg,
                               const std::vector<double>& h_list) {
  AnisotropyJ J = cfg.make_anisotropy();
  Profile p0 = cfg.make_profile();
  const int n = cfg.scheme_n;
  // The tracker only moves forward; rebuild when a fresh h-run rewinds time.
  auto tracker = std::make_shared<Tracker>(p0, J);
  auto reference = [&, tracker](double t) mutable {
    if (t < tracker->time()) *tracker = Tracker(p0, J);
    tracker->advance_to(t);
    std::vector<double> w(n);
    for (int g = 0; g < n; ++g) w[g] = tracker->eval_w(kTwoPi * double(g) / double(n));
    return w;
  };
  auto rows = convergence_study(J, p0, n, h_list, cfg.T, reference);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) j.push_back({{"h", r.h}, {"error", r.error}});
  return j;
}

}  // namespace facetflow
