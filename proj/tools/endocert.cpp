// endocert: command-line front end. Exit status 0 certified/consistent,
// 1 negative result, 2 inconclusive, 3 configuration or runtime error.

#include <endocert/cli_reporting.hpp>
#include <endocert/error.hpp>

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <sstream>

using namespace endocert;

namespace {

std::optional<TorusPoint> parse_point(const std::string& s) {
  std::istringstream in(s);
  double x, y;
  char comma;
  if (!(in >> x >> comma >> y) || comma != ',')
    throw Error(ErrorCode::kConfig, "cli", "expected x,y but got '" + s + "'");
  return TorusPoint{x, y};
}

struct Binding {
  CLI::Option* opt;
  std::function<void(RunConfig&, const RunConfig&)> copy;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial hyperbolicity certification and surgery experiments for torus endomorphisms"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  RunConfig cli;
  std::string config_path, start, center, map_path;
  bool no_timestamp = false;
  std::vector<Binding> bindings;

  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    auto bind = [&](auto opt, auto member) {
      bindings.push_back({opt, [member](RunConfig& d, const RunConfig& s) { d.*member = s.*member; }});
    };
    sub->add_option("--config", config_path, "config file (key = value, [[surgery]] blocks)");
    bind(sub->add_option("--map", cli.map, "canonical or demo map name, or a map file"), &RunConfig::map);
    bind(sub->add_option("--out", cli.out, "output directory (default $ENDOCERT_OUT or ./endocert_out)"),
         &RunConfig::out);
    bind(sub->add_option("--grid", cli.grid, "cone-check grid resolution"), &RunConfig::grid);
    bind(sub->add_option("--core-grid", cli.core_grid, "splitting grid for the cone core"), &RunConfig::core_grid);
    bind(sub->add_option("--horizon", cli.horizon, "forward/backward horizon N = M"), &RunConfig::horizon);
    bind(sub->add_option("--eta", cli.eta, "cone half-angle upper bound"), &RunConfig::eta);
    bind(sub->add_option("--ell", cli.ell, "largest expansion/domination iterate"), &RunConfig::ell);
    bind(sub->add_option("--k", cli.k, "largest invariance iterate"), &RunConfig::k);
    bind(sub->add_option("--epsilon", cli.epsilon, "perturbation budget"), &RunConfig::epsilon);
    bind(sub->add_option("--nu", cli.nu, "box width for periodic points"), &RunConfig::nu);
    bind(sub->add_option("--delta", cli.delta, "u-arc escape length"), &RunConfig::delta);
    bind(sub->add_option("--seed", cli.seed, "random seed"), &RunConfig::seed);
    bind(sub->add_option("--threads", cli.threads, "worker threads"), &RunConfig::threads);
    bind(sub->add_option("--iterates", cli.iterates, "arc iterates"), &RunConfig::iterates);
    bind(sub->add_option("--arc-length", cli.arc_length, "initial arc length"), &RunConfig::arc_length);
    bind(sub->add_option("--period", cli.min_period, "minimal period (periodic) or orbit period (sink)"),
         &RunConfig::min_period);
    bind(sub->add_option("--recipe", cli.recipe, "perturb recipe: noop, scale, kernel, sink, config"),
         &RunConfig::recipe);
    bind(sub->add_option("--radius", cli.radius, "inner surgery radius"), &RunConfig::radius);
    bind(sub->add_option("--scale", cli.scale, "derivative factor for the scale recipe"), &RunConfig::scale);
    bind(sub->add_option("--chain", cli.chain, "chain length m for the kernel recipe"), &RunConfig::chain);
    bind(sub->add_option("--probe-steps", cli.probe_steps, "orbit length of transitivity probes"),
         &RunConfig::probe_steps);
    bind(sub->add_option("--probe-grid", cli.probe_grid, "probe grid resolution"), &RunConfig::probe_grid);
    bind(sub->add_option("--probe-starts", cli.probe_starts, "probe starting points"), &RunConfig::probe_starts);
    bind(sub->add_flag("--inject-certificate", cli.inject_certificate, "homology: treat the certificate as valid"),
         &RunConfig::inject_certificate);
    bindings.push_back({sub->add_option("--start", start, "periodic: start point x,y"),
                        [&](RunConfig& d, const RunConfig&) { d.start = parse_point(start); }});
    bindings.push_back({sub->add_option("--center", center, "perturb: surgery center x,y"),
                        [&](RunConfig& d, const RunConfig&) { d.center = parse_point(center); }});
    sub->add_flag("--no-timestamp", no_timestamp, "omit the timestamp from provenance");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& b : bindings)
      if (b.opt->count() > 0) b.copy(cfg, cli);
    const std::string command = app.get_subcommands().front()->get_name();
    Report report = run_command(command, cfg);
    const auto dir = write_report(report, cfg, !no_timestamp);
    std::cout << render_text(report);
    std::cout << "written to " << dir.string() << "\n";
    return report.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
