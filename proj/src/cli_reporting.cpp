#include <endocert/arc_dynamics.hpp>
#include <endocert/cli_reporting.hpp>
#include <endocert/cone_certifier.hpp>
#include <endocert/error.hpp>
#include <endocert/homology_and_growth.hpp>
#include <endocert/map_io.hpp>
#include <endocert/orbit.hpp>
#include <endocert/perturbation_lab.hpp>
#include <endocert/splitting.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

namespace endocert {

using json = nlohmann::ordered_json;

namespace {
constexpr const char* kModule = "cli_reporting";

// Critical point p1 of the shearcycle demo map: p1 -> p2 are both critical.
const TorusPoint kShearcycleStart{0.74089565520714512853, 0.63155830914876897354};

json point(const TorusPoint& p) { return json::array({p.x(), p.y()}); }
json vec(const Vec2& v) { return json::array({v.x, v.y}); }
json mat(const Mat2& m) { return json::array({json::array({m.a11, m.a12}), json::array({m.a21, m.a22})}); }
json mat(const LinearPart& m) {
  return json::array({json::array({m.a11, m.a12}), json::array({m.a21, m.a22})});
}

json map_section(const TorusMap& f) {
  return {{"name", f.name()}, {"hash", map_hash(f)}, {"linear_part", mat(f.linear_part())}};
}

json grid_check(const GridCheck& g) {
  return {{"resolution", g.resolution}, {"raw", g.raw},         {"slack", g.slack},
          {"margin", g.margin},         {"worst", point(g.worst)}, {"passed", g.passed}};
}

CriticalSet critical_for(const TorusMap& f, const RunConfig& cfg) {
  return locate_critical_set(f, std::clamp(cfg.grid, 16, 128), 1e-12);
}

SplittingConfig splitting_for(const RunConfig& cfg, const CriticalSet* cr) {
  SplittingConfig sc;
  sc.horizon_e = cfg.horizon;
  sc.horizon_f = cfg.horizon;
  sc.critical = cr;
  return sc;
}

json critical_section(const CriticalSet& cr) {
  return {{"operation", "locate_critical_set"},
          {"parameters", {{"resolution", cr.resolution}, {"det_tolerance", cr.det_tolerance}}},
          {"samples", cr.samples.size()},
          {"empty", cr.empty()}};
}

// Unstable direction at p from the push-forward route; x-axis if that fails.
Vec2 arc_direction(const TorusMap& f, const TorusPoint& p, const SplittingConfig& sc) {
  try {
    const auto seg = full_orbit(f, p, sc.horizon_f, 0, DeterministicBranch{});
    return compute_F(f, seg, 0, sc).direction;
  } catch (const Error&) {
    return {1.0, 0.0};
  }
}

json arc_section(const TorusMap& f, const RunConfig& cfg, const SplittingConfig& sc, ColumnFile* col) {
  const TorusPoint start{0.1, 0.1};
  const Vec2 dir = arc_direction(f, start, sc);
  const auto it = iterate_arc(f, make_u_arc(start.lift(), dir, cfg.arc_length, nullptr), cfg.iterates);
  if (col) {
    col->name = "arc_growth.dat";
    col->header = "n length log_length";
    for (std::size_t n = 0; n < it.series.lengths.size(); ++n)
      col->rows.push_back({double(n), it.series.lengths[n], std::log(it.series.lengths[n])});
  }
  return {{"operation", "iterate_arc"},
          {"parameters",
           {{"start", point(start)}, {"direction", vec(dir)}, {"length", cfg.arc_length}, {"iterates", cfg.iterates}}},
          {"lengths", it.series.lengths},
          {"doubling_times", it.series.doubling_times},
          {"exponent", it.series.exponent},
          {"blowup", it.series.blowup}};
}

json homology_section(const HomologyReport& h) {
  json eig = json::array();
  for (const auto& e : h.action.eigenvalues) eig.push_back(json::array({e.real(), e.imag()}));
  return {{"operation", "homology_matrix"},
          {"parameters", {{"samples", h.action.samples}}},
          {"matrix", mat(h.action.matrix)},
          {"eigenvalues", eig},
          {"spectral_radius", h.action.spectral_radius},
          {"max_residual", h.action.max_residual},
          {"certificate_valid", h.certificate_valid},
          {"verdict", to_string(h.verdict)},
          {"notes", h.notes}};
}

json certificate_section(const ConeCertificate& c) {
  return {{"operation", "certify_partial_hyperbolicity"},
          {"parameters", {{"grid", c.grid}, {"core_grid", c.core_grid}, {"eta", c.eta}, {"cone", c.cone}}},
          {"valid", c.valid},
          {"failed_clause", c.failed_clause},
          {"invariance", {{"k", c.k}, {"check", grid_check(c.invariance)}}},
          {"transversality", {{"n_max", c.n_max}, {"check", grid_check(c.transversality)}}},
          {"expansion", {{"ell", c.ell}, {"lambda", c.expansion.margin}, {"check", grid_check(c.expansion)}}},
          {"domination_only", c.domination_only},
          {"notes", c.notes}};
}

json domination_section(const DominationCertificate& d, const AngleProfile& a) {
  return {{"operation", "check_domination"},
          {"parameters", {{"ell", d.ell}, {"alpha", d.alpha}, {"samples", d.grid}}},
          {"worst_ratio", d.worst_ratio},
          {"min_angle", d.min_angle},
          {"worst_point", point(d.worst_point)},
          {"valid", d.valid},
          {"angle_profile", {{"min", a.min}, {"mean", a.mean}, {"max", a.max}, {"degenerate", a.degenerate}}}};
}

ColumnFile angle_columns(const AngleProfile& a) {
  ColumnFile c{"angles.dat", "bin_low bin_high count", {}};
  const double w = (kPi / 2) / std::max<std::size_t>(1, a.histogram.size());
  for (std::size_t i = 0; i < a.histogram.size(); ++i) c.rows.push_back({i * w, (i + 1) * w, double(a.histogram[i])});
  return c;
}

std::vector<TorusPoint> ball_starts(const TorusPoint& c, double radius, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(0, kTwoPi), rad(0, 1);
  std::vector<TorusPoint> out;
  for (int i = 0; i < count; ++i) out.emplace_back(c.lift() + unit_at(ang(rng)) * (radius * std::sqrt(rad(rng))));
  return out;
}

json probe_section(const TransitivityProbe& p, const std::string& label) {
  return {{"operation", "transitivity_probe"},
          {"parameters", {{"map", label}, {"orbit_length", p.orbit_length}, {"grid", p.grid}}},
          {"coverage", p.coverage},
          {"start_coverage", p.start_coverage},
          {"note", p.note}};
}

ColumnFile probe_columns(const TransitivityProbe& p, const std::string& name) {
  ColumnFile c{name, "cell_index visit_count", {}};
  for (std::size_t i = 0; i < p.visits.size(); ++i) c.rows.push_back({double(i), double(p.visits[i])});
  return c;
}

json surgery_section(const PerturbedMap& g) {
  json list = json::array();
  for (const auto& s : g.surgeries())
    list.push_back({{"center", point(s.center)},
                    {"inner_radius", s.inner_radius},
                    {"outer_radius", s.outer_radius},
                    {"target", mat(s.target)},
                    {"cost", s.cost},
                    {"cutoff_derivative_bound", s.derivative_bound},
                    {"overhead", s.overhead}});
  return {{"operation", "franks_surgery"},
          {"surgeries", list},
          {"c1_distance", g.measured_c1_distance},
          {"allowance", g.allowance},
          {"overhead_note", "bump overhead factor is an implementation constant of the cubic cutoff"}};
}

std::string fmt_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

bool scalar_array(const json& j) {
  for (const auto& e : j)
    if (e.is_object() || (e.is_array() && !scalar_array(e))) return false;
  return true;
}

std::string inline_value(const json& j) {
  if (j.is_number_float()) return fmt_number(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::string s = "[";
    for (std::size_t i = 0; i < j.size(); ++i) s += (i ? ", " : "") + inline_value(j[i]);
    return s + "]";
  }
  return j.dump();
}

void render(const json& j, int indent, std::ostringstream& os) {
  const std::string pad(indent, ' ');
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    if (v.is_object()) {
      os << pad << it.key() << ":\n";
      render(v, indent + 2, os);
    } else if (v.is_array() && !scalar_array(v)) {
      os << pad << it.key() << ":\n";
      for (const auto& e : v) {
        os << pad << "  -\n";
        if (e.is_object()) render(e, indent + 4, os);
        else os << pad << "    " << inline_value(e) << "\n";
      }
    } else {
      os << pad << it.key() << ": " << inline_value(v) << "\n";
    }
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

TorusPoint read_point(const TextValue& v, const char* key) {
  if (!v.is_array() || v.array().size() != 2 || !v.array()[0].is_number() || !v.array()[1].is_number())
    throw Error(ErrorCode::kConfig, kModule, std::string(key) + " must be [x, y]");
  return {v.array()[0].number(), v.array()[1].number()};
}

Mat2 read_matrix(const TextValue& v) {
  auto row = [&](const TextValue& r) {
    if (!r.is_array() || r.array().size() != 2) throw Error(ErrorCode::kConfig, kModule, "target must be 2x2");
    return Vec2{r.array()[0].number(), r.array()[1].number()};
  };
  if (!v.is_array() || v.array().size() != 2) throw Error(ErrorCode::kConfig, kModule, "target must be 2x2");
  const Vec2 a = row(v.array()[0]), b = row(v.array()[1]);
  return {a.x, a.y, b.x, b.y};
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path, RunConfig cfg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, kModule, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const TextDocument doc = parse_text_document(ss.str());
  for (const auto& [raw, v] : doc.root) {
    std::string key = raw;
    for (auto& c : key)
      if (c == '-') c = '_';
    auto num = [&]() {
      if (!v.is_number()) throw Error(ErrorCode::kConfig, kModule, "config key " + raw + " must be a number");
      return v.number();
    };
    auto str = [&]() {
      if (!v.is_string()) throw Error(ErrorCode::kConfig, kModule, "config key " + raw + " must be a string");
      return v.string();
    };
    if (key == "map") cfg.map = str();
    else if (key == "out") cfg.out = str();
    else if (key == "grid") cfg.grid = int(num());
    else if (key == "core_grid") cfg.core_grid = int(num());
    else if (key == "horizon") cfg.horizon = int(num());
    else if (key == "eta") cfg.eta = num();
    else if (key == "ell") cfg.ell = int(num());
    else if (key == "k") cfg.k = int(num());
    else if (key == "epsilon") cfg.epsilon = num();
    else if (key == "nu") cfg.nu = num();
    else if (key == "delta") cfg.delta = num();
    else if (key == "seed") cfg.seed = std::uint64_t(num());
    else if (key == "threads") cfg.threads = int(num());
    else if (key == "iterates") cfg.iterates = int(num());
    else if (key == "arc_length") cfg.arc_length = num();
    else if (key == "start") cfg.start = read_point(v, "start");
    else if (key == "period" || key == "min_period") cfg.min_period = int(num());
    else if (key == "recipe") cfg.recipe = str();
    else if (key == "center") cfg.center = read_point(v, "center");
    else if (key == "radius") cfg.radius = num();
    else if (key == "scale") cfg.scale = num();
    else if (key == "chain") cfg.chain = int(num());
    else if (key == "probe_steps") cfg.probe_steps = long(num());
    else if (key == "probe_grid") cfg.probe_grid = int(num());
    else if (key == "probe_starts") cfg.probe_starts = int(num());
    else if (key == "inject_certificate") cfg.inject_certificate = v.is_number() ? num() != 0 : str() == "true";
    else throw Error(ErrorCode::kConfig, kModule, "unknown config key '" + raw + "'");
  }
  for (const TextTable* t : doc.blocks_named("surgery")) {
    SurgeryEntry s;
    auto get = [&](const char* k) -> const TextValue* {
      auto it = t->find(k);
      return it == t->end() ? nullptr : &it->second;
    };
    if (!get("center")) throw Error(ErrorCode::kConfig, kModule, "[[surgery]] needs a center");
    s.center = read_point(*get("center"), "center");
    if (auto* v = get("inner")) s.inner_radius = v->number();
    if (auto* v = get("outer")) s.outer_radius = v->number();
    if (auto* v = get("target")) s.target = read_matrix(*v);
    cfg.surgeries.push_back(s);
  }
  if (!cfg.surgeries.empty() && cfg.recipe == "noop") cfg.recipe = "config";
  return cfg;
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, kModule, what);
  };
  need(c.grid >= 4 && c.grid <= 4096, "grid must be in [4, 4096]");
  need(c.core_grid >= 2 && c.core_grid <= 1024, "core grid must be in [2, 1024]");
  need(c.horizon >= 1 && c.horizon <= 400, "horizon must be in [1, 400]");
  need(c.eta > 0 && c.eta < kPi / 4, "eta must be in (0, pi/4)");
  need(c.ell >= 1 && c.ell <= 64, "ell must be in [1, 64]");
  need(c.k >= 1 && c.k <= 64, "k must be in [1, 64]");
  need(c.epsilon >= 0, "epsilon must be >= 0");
  need(c.nu > 0 && c.nu < 0.5, "nu must be in (0, 1/2)");
  need(c.delta > 0 && c.delta < 0.5, "delta must be in (0, 1/2)");
  need(c.threads >= 1 && c.threads <= 256, "threads must be in [1, 256]");
  need(c.iterates >= 0 && c.iterates <= 60, "iterates must be in [0, 60]");
  need(c.arc_length > 0, "arc length must be > 0");
  need(c.min_period >= 1, "period must be >= 1");
  need(c.radius > 0 && c.radius < 0.25, "radius must be in (0, 1/4)");
  need(c.chain >= 2, "chain must be >= 2");
  need(c.probe_steps >= 0, "probe steps must be >= 0");
  need(c.probe_grid >= 1 && c.probe_grid <= 4096, "probe grid must be in [1, 4096]");
  need(c.probe_starts >= 1, "probe starts must be >= 1");
}

Report cmd_certify(const RunConfig& cfg) {
  validate(cfg);
  const auto f = resolve_map(cfg.map);
  Report r;
  r.command = "certify";
  r.data["map"] = map_section(f);
  const CriticalSet cr = critical_for(f, cfg);
  r.data["critical_set"] = critical_section(cr);

  CertifyConfig cc;
  cc.grid = cfg.grid;
  cc.core_grid = cfg.core_grid;
  cc.eta = cfg.eta;
  cc.k_max = cfg.k;
  cc.ell_max = cfg.ell;
  cc.threads = cfg.threads;
  cc.splitting = splitting_for(cfg, &cr);
  const auto cert = certify_partial_hyperbolicity(f, cc);
  r.data["splitting"] = domination_section(cert.domination, cert.angles);
  r.data["splitting"]["parameters"]["horizon_e"] = cfg.horizon;
  r.data["splitting"]["parameters"]["horizon_f"] = cfg.horizon;
  r.data["certificate"] = certificate_section(cert);
  r.columns.push_back(angle_columns(cert.angles));

  const auto hom = spectral_obstruction(homology_matrix(f, 100, cfg.seed), cert.valid);
  r.data["homology"] = homology_section(hom);

  ColumnFile arcs;
  r.data["arc_growth"] = arc_section(f, cfg, cc.splitting, &arcs);
  r.columns.push_back(arcs);

  const bool ok = cert.valid && hom.verdict == HomologyVerdict::kConsistent;
  r.data["summary"] = {{"certificate", cert.valid ? "valid" : "failed (" + cert.failed_clause + ")"},
                       {"homology", to_string(hom.verdict)}};
  r.exit_code = ok ? 0 : 1;
  return r;
}

Report cmd_arcs(const RunConfig& cfg) {
  validate(cfg);
  const auto f = resolve_map(cfg.map);
  Report r;
  r.command = "arcs";
  r.data["map"] = map_section(f);
  const CriticalSet cr = critical_for(f, cfg);
  const SplittingConfig sc = splitting_for(cfg, &cr);
  ColumnFile col;
  r.data["arc_growth"] = arc_section(f, cfg, sc, &col);
  r.columns.push_back(col);

  const TorusPoint start{0.1, 0.1};
  const Vec2 dir = arc_direction(f, start, sc);
  const auto d = detect_delta_u_arc(f, make_u_arc(start.lift(), dir, cfg.delta / 2, nullptr), cfg.delta, 30);
  r.data["delta_arc"] = {{"operation", "detect_delta_u_arc"},
                         {"parameters", {{"delta", cfg.delta}, {"length", cfg.delta / 2}, {"n_max", 30}}},
                         {"bounded", d.bounded},
                         {"escaped_at", d.escaped_at ? json(*d.escaped_at) : json(nullptr)},
                         {"lengths", d.lengths}};
  r.exit_code = 0;
  return r;
}

Report cmd_dichotomy(const RunConfig& cfg) {
  validate(cfg);
  const auto f = resolve_map(cfg.map);
  Report r;
  r.command = "dichotomy";
  r.data["map"] = map_section(f);
  const CriticalSet cr = critical_for(f, cfg);
  DichotomyConfig dc;
  dc.epsilon = cfg.epsilon;
  dc.grid = std::min(cfg.grid, 64);
  dc.ell_max = cfg.ell;
  dc.seed = cfg.seed;
  dc.threads = cfg.threads;
  dc.splitting = splitting_for(cfg, &cr);
  const auto out = dichotomy_search(f, dc);
  json d = {{"operation", "dichotomy_search"},
            {"parameters", {{"epsilon", dc.epsilon}, {"grid", dc.grid}, {"ell_max", dc.ell_max}, {"seed", dc.seed}}},
            {"arm", to_string(out.arm)},
            {"best_ratio", out.best_ratio},
            {"min_angle", out.min_angle},
            {"alpha", out.alpha},
            {"implied_bound", out.implied_bound},
            {"explanation", out.explanation}};
  if (out.certificate)
    d["certificate"] = {{"ell", out.certificate->ell},
                        {"worst_ratio", out.certificate->worst_ratio},
                        {"min_angle", out.certificate->min_angle},
                        {"samples", out.certificate->grid}};
  if (out.witness)
    d["witness"] = {{"segment", {out.witness->segment.first(), out.witness->segment.last()}},
                    {"start", out.witness->start},
                    {"start_point", point(out.witness->segment.at(out.witness->start))},
                    {"steps", out.witness->steps},
                    {"angles", out.witness->angles},
                    {"final_gap", out.witness->final_gap},
                    {"franks_cost", out.witness->franks_cost}};
  r.data["dichotomy"] = d;
  r.exit_code = out.arm == DichotomyArm::kCertificate ? 0 : out.arm == DichotomyArm::kWitness ? 1 : 2;
  return r;
}

Report cmd_homology(const RunConfig& cfg) {
  validate(cfg);
  const auto f = resolve_map(cfg.map);
  Report r;
  r.command = "homology";
  r.data["map"] = map_section(f);
  bool valid = cfg.inject_certificate;
  if (!valid) {
    const CriticalSet cr = critical_for(f, cfg);
    CertifyConfig cc;
    cc.grid = cfg.grid;
    cc.core_grid = std::min(cfg.core_grid, cfg.grid);
    cc.eta = cfg.eta;
    cc.k_max = cfg.k;
    cc.ell_max = cfg.ell;
    cc.threads = cfg.threads;
    cc.splitting = splitting_for(cfg, &cr);
    const auto cert = certify_partial_hyperbolicity(f, cc);
    valid = cert.valid;
    r.data["certificate"] = {{"operation", "certify_partial_hyperbolicity"},
                             {"parameters", {{"grid", cc.grid}, {"core_grid", cc.core_grid}}},
                             {"valid", cert.valid},
                             {"failed_clause", cert.failed_clause}};
  } else {
    r.data["certificate"] = {{"operation", "injected"}, {"valid", true}};
  }
  const auto hom = spectral_obstruction(homology_matrix(f, 100, cfg.seed), valid);
  r.data["homology"] = homology_section(hom);
  r.exit_code = hom.verdict == HomologyVerdict::kObstructed ? 1 : 0;
  return r;
}

Report cmd_periodic(const RunConfig& cfg) {
  validate(cfg);
  const auto f = resolve_map(cfg.map);
  Report r;
  r.command = "periodic";
  r.data["map"] = map_section(f);
  TorusPoint x;
  if (cfg.start) {
    x = *cfg.start;
  } else {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0, 1);
    x = TorusPoint(u(rng), u(rng));
  }
  PeriodicConfig pc;
  pc.min_period = cfg.min_period;
  pc.e_horizon = cfg.horizon;
  json box = {{"operation", "find_periodic_point"},
              {"parameters", {{"start", point(x)}, {"nu", cfg.nu}, {"min_period", pc.min_period},
                              {"e_horizon", pc.e_horizon}}}};
  int code = 0;
  try {
    const auto p = find_periodic_point(f, x, cfg.nu, pc);
    box["status"] = "found";
    box["point"] = point(p.point);
    box["period"] = p.period;
    box["residual"] = p.residual;
    box["max_shadowing"] = p.max_shadowing;
    box["contraction_rate"] = p.contraction_rate;
    ColumnFile c{"shadowing.dat", "j distance", {}};
    for (std::size_t j = 0; j < p.shadowing.size(); ++j) c.rows.push_back({double(j), p.shadowing[j]});
    r.columns.push_back(c);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kContractionStall && e.code() != ErrorCode::kNoReturnFound) throw;
    box["status"] = std::string(error_code_name(e.code()));
    box["detail"] = e.what();
    code = 2;
  }
  r.data["box_method"] = box;

  // Fixed-point census with the Lefschetz count |det(A^l - I)| next to it.
  const int lmax = std::min(cfg.ell, 3);
  json census = json::array();
  ColumnFile cc{"periodic_census.dat", "l count expected", {}};
  Mat2 al = Mat2::identity();
  for (int l = 1; l <= lmax; ++l) {
    al = f.linear_part().matrix() * al;
    const double expected = std::abs(std::round((al - Mat2::identity()).det()));
    const auto pts = periodic_points(f, l, 32 * l);
    json list = json::array();
    for (const auto& p : pts) list.push_back(point(p));
    census.push_back({{"l", l}, {"count", pts.size()}, {"expected", expected}, {"points", list}});
    cc.rows.push_back({double(l), double(pts.size()), expected});
  }
  r.data["census"] = {{"operation", "periodic_points"},
                      {"parameters", {{"l_max", lmax}, {"seed_resolution", "32 l"}}},
                      {"periods", census}};
  r.columns.push_back(cc);
  r.exit_code = code;
  return r;
}

Report cmd_perturb(const RunConfig& cfg) {
  validate(cfg);
  auto f = std::make_shared<SurfaceEndomorphism>(resolve_map(cfg.map));
  Report r;
  r.command = "perturb";
  r.data["map"] = map_section(*f);
  json exp = {{"recipe", cfg.recipe}, {"epsilon", cfg.epsilon}};
  std::shared_ptr<const PerturbedMap> g;
  TorusPoint probe_center = cfg.center.value_or(TorusPoint{0.3, 0.6});
  double probe_radius = cfg.radius / 2;

  if (cfg.recipe == "noop" || cfg.recipe == "scale") {
    const Mat2 df = f->jacobian(probe_center.lift());
    const Mat2 target = cfg.recipe == "noop" ? df : df * cfg.scale;
    g = std::make_shared<PerturbedMap>(franks_surgery(f, {{probe_center, target, cfg.radius}}, cfg.epsilon));
    if (cfg.recipe == "scale") exp["scale"] = cfg.scale;
  } else if (cfg.recipe == "config") {
    std::vector<SurgeryRequest> req;
    for (const auto& s : cfg.surgeries)
      req.push_back({s.center, s.target.value_or(f->jacobian(s.center.lift())), s.inner_radius, s.outer_radius});
    if (req.empty()) throw Error(ErrorCode::kConfig, kModule, "config recipe needs [[surgery]] blocks");
    g = std::make_shared<PerturbedMap>(franks_surgery(f, req, cfg.epsilon));
    probe_center = cfg.surgeries.front().center;
    probe_radius = cfg.surgeries.front().inner_radius / 2;
  } else if (cfg.recipe == "kernel") {
    if (!cfg.center && f->name() != "shearcycle")
      throw Error(ErrorCode::kConfig, kModule, "kernel recipe needs --center on a critical point");
    probe_center = cfg.center.value_or(kShearcycleStart);
    const auto w = build_collapse_witness(*f, probe_center, cfg.chain);
    const auto res = full_kernel_surgery(f, w, cfg.radius, cfg.epsilon);
    g = res.map;
    json chain = json::array();
    for (const auto& p : w.chain) chain.push_back(point(p));
    exp["kernel"] = {{"operation", "full_kernel_surgery"},
                     {"m", res.m},
                     {"chain", chain},
                     {"rotation_index", w.rotation_index},
                     {"rotation_angle", w.rotation_angle},
                     {"alignment_cost", w.alignment_cost},
                     {"inner_radii", res.inner_radii},
                     {"derivative_norm", res.derivative_norm},
                     {"kernel_dimension", kernel_dimension(*g, probe_center, res.m)},
                     {"collapsed_diameter", image_diameter(*g, probe_center, cfg.radius / 2, res.m)}};
  } else if (cfg.recipe == "sink") {
    probe_center = cfg.center.value_or(TorusPoint{0.0, 0.0});
    const auto s = sink_surgery(f, probe_center, cfg.min_period, cfg.epsilon, cfg.radius);
    g = s.map;
    exp["sink"] = {{"operation", "sink_surgery"},
                   {"period", cfg.min_period},
                   {"omega", s.omega},
                   {"step_scale", s.step_scale},
                   {"spectral_radius", s.spectral_radius}};
  } else {
    throw Error(ErrorCode::kConfig, kModule, "unknown recipe '" + cfg.recipe + "'");
  }
  exp["surgery"] = surgery_section(*g);
  r.data["experiment"] = exp;

  const auto starts = ball_starts(probe_center, probe_radius, cfg.probe_starts, cfg.seed);
  const auto before = transitivity_probe(*f, starts, cfg.probe_steps, cfg.probe_grid, cfg.threads);
  const auto after = transitivity_probe(*g, starts, cfg.probe_steps, cfg.probe_grid, cfg.threads);
  r.data["probe_before"] = probe_section(before, f->name());
  r.data["probe_before"]["parameters"]["starts"] = {{"center", point(probe_center)}, {"radius", probe_radius},
                                                    {"count", cfg.probe_starts}};
  r.data["probe_after"] = probe_section(after, g->name());
  r.columns.push_back(probe_columns(before, "probe_before.dat"));
  r.columns.push_back(probe_columns(after, "probe_after.dat"));
  r.exit_code = 0;
  return r;
}

std::vector<std::string> command_names() { return {"certify", "arcs", "dichotomy", "homology", "perturb", "periodic"}; }

Report run_command(const std::string& command, const RunConfig& cfg) {
  if (command == "certify") return cmd_certify(cfg);
  if (command == "arcs") return cmd_arcs(cfg);
  if (command == "dichotomy") return cmd_dichotomy(cfg);
  if (command == "homology") return cmd_homology(cfg);
  if (command == "perturb") return cmd_perturb(cfg);
  if (command == "periodic") return cmd_periodic(cfg);
  throw Error(ErrorCode::kConfig, kModule, "unknown command '" + command + "'");
}

std::string render_text(const Report& r) {
  std::ostringstream os;
  os << "endocert " << r.command << "\n";
  render(r.data, 0, os);
  os << "exit_status: " << r.exit_code << "\n";
  return os.str();
}

std::string render_columns(const ColumnFile& c) {
  std::ostringstream os;
  os << "# " << c.header << "\n";
  for (const auto& row : c.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << fmt_number(row[i]);
    os << "\n";
  }
  return os.str();
}

std::string content_hash(const json& data) {
  json copy = data;
  if (copy.contains("provenance")) {
    copy["provenance"].erase("timestamp");
    copy["provenance"].erase("content_hash");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(copy.dump())));
  return buf;
}

std::filesystem::path output_directory(const RunConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  if (const char* env = std::getenv("ENDOCERT_OUT"); env && *env) return env;
  return "endocert_out";
}

std::filesystem::path write_report(Report& r, const RunConfig& cfg, bool with_timestamp) {
  json prov = {{"tool", "endocert"},     {"version", kToolVersion}, {"command", r.command},
               {"map", cfg.map},         {"seed", cfg.seed},        {"exit_status", r.exit_code}};
  if (with_timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    prov["timestamp"] = buf;
  }
  r.data["provenance"] = prov;
  r.data["provenance"]["content_hash"] = content_hash(r.data);

  const auto dir = output_directory(cfg);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kConfig, kModule, "cannot create output directory " + dir.string());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::kConfig, kModule, "cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", r.data.dump(2) + "\n");
  write("report.txt", render_text(r));
  for (const auto& c : r.columns) write(c.name, render_columns(c));
  return dir;
}

}  // namespace endocert
