// binforward CLI: capacity / region / simulate / fmcheck / toy, plus replay
// of a previously written run manifest. Every command writes a manifest with
// its fully resolved settings; re-running the manifest reproduces every
// output byte for byte.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "binforward/binforward.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailedCheck = 1;
constexpr int kExitInput = 2;
constexpr int kExitBudget = 3;

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int exit_code_for(binf_status status) {
  return status == BINF_ERR_BUDGET ? kExitBudget : kExitInput;
}

[[noreturn]] void bail(binf_status status) {
  std::cerr << "error: " << binf_last_error() << "\n";
  std::exit(exit_code_for(status));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(kExitInput);
  }
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& settings,
                    const std::vector<std::string>& outputs) {
  json doc;
  doc["tool"] = "binforward";
  doc["version"] = binf_version();
  doc["command"] = command;
  doc["settings"] = settings;
  doc["outputs"] = outputs;
  write_file(out_dir / "manifest.json", doc.dump(2) + "\n");
}

struct SpecHandle {
  binf_spec* ptr = nullptr;
  ~SpecHandle() { binf_spec_free(ptr); }
};

struct SolutionHandle {
  binf_solution* ptr = nullptr;
  ~SolutionHandle() { binf_solution_free(ptr); }
};

void load_spec_or_bail(const std::string& path, SpecHandle& spec) {
  binf_status st = binf_spec_load(path.c_str(), &spec.ptr);
  if (st != BINF_OK) bail(st);
}

binf_solve_options solve_options_from(const json& s) {
  binf_solve_options opts;
  binf_solve_options_init(&opts);
  opts.grid_step = s.value("grid_step", opts.grid_step);
  opts.u_size = s.value("u_size", 0);
  opts.restarts = s.value("restarts", opts.restarts);
  opts.threads = s.value("threads", 0);
  opts.seed = s.value("seed", static_cast<std::uint64_t>(1));
  opts.enum_cap = s.value("enum_cap", opts.enum_cap);
  opts.weight_step = s.value("weight_step", opts.weight_step);
  opts.map_mode = s.value("map_mode", 0);
  opts.map_cap = s.value("map_cap", opts.map_cap);
  opts.z1_independent = s.value("z1_independent", false) ? 1 : 0;
  return opts;
}

// ---- command runners (shared by the flag path and replay) ----

int run_toy(const json& settings, const fs::path& out_dir) {
  double p = settings.at("p").get<double>();
  double bin_fwd = 0, dec_fwd = 0;
  binf_status st = binf_toy_rates(p, &bin_fwd, &dec_fwd);
  if (st != BINF_OK) bail(st);

  std::ostringstream csv;
  csv << "scheme,rate\n";
  csv << "bin_forward," << fmt6(bin_fwd) << "\n";
  csv << "decode_forward," << fmt6(dec_fwd) << "\n";
  csv << "gap," << fmt6(bin_fwd - dec_fwd) << "\n";
  write_file(out_dir / "toy.csv", csv.str());
  write_manifest(out_dir, "toy", settings, {"toy.csv"});

  std::cout << "p: " << fmt6(p) << "\n";
  std::cout << "bin_forward_rate: " << fmt6(bin_fwd) << "\n";
  std::cout << "decode_forward_rate: " << fmt6(dec_fwd) << "\n";
  std::cout << "gap: " << fmt6(bin_fwd - dec_fwd) << "\n";
  return kExitOk;
}

int run_capacity(const json& settings, const fs::path& out_dir) {
  SpecHandle spec;
  load_spec_or_bail(settings.at("spec_path").get<std::string>(), spec);
  binf_kind kind = binf_spec_kind(spec.ptr);
  if (kind != BINF_KIND_RELAY && kind != BINF_KIND_STATE_RELAY &&
      kind != BINF_KIND_STATE_RELAY_NO_DELAY) {
    std::cerr << "error: capacity expects a relay-kind spec\n";
    return kExitInput;
  }
  binf_solve_options opts = solve_options_from(settings);
  SolutionHandle sol;
  binf_status st = binf_solve(spec.ptr, &opts, &sol.ptr);
  if (st != BINF_OK) bail(st);

  write_file(out_dir / "argmax.json", binf_solution_param_json(sol.ptr));
  write_file(out_dir / "settings.json", binf_solution_settings_json(sol.ptr));
  write_manifest(out_dir, "capacity", settings, {"argmax.json", "settings.json"});

  json echo = json::parse(binf_solution_settings_json(sol.ptr));
  std::cout << "optimum_lower_bound: " << fmt6(binf_solution_value(sol.ptr)) << "\n";
  std::cout << "certified_step_small: " << fmt6(echo["cert_step_small"].get<double>()) << "\n";
  std::cout << "certified_step_big: " << fmt6(echo["cert_step_big"].get<double>()) << "\n";
  std::cout << "grid_points: " << echo["grid_points"].get<std::uint64_t>() << "\n";
  if (echo["u_cardinality_cap"].get<int>() > 0)
    std::cout << "u_size: " << echo["u_size"].get<int>() << " (cap "
              << echo["u_cardinality_cap"].get<int>() << ")\n";
  std::cout << "note: grid-certified lower bound; refining the step never lowers it\n";
  return kExitOk;
}

int run_region(const json& settings, const fs::path& out_dir) {
  SpecHandle spec;
  load_spec_or_bail(settings.at("spec_path").get<std::string>(), spec);
  binf_kind kind = binf_spec_kind(spec.ptr);
  if (kind != BINF_KIND_STATE_MAC && kind != BINF_KIND_STATE_MAC_CAUSAL) {
    std::cerr << "error: region expects a MAC-kind spec\n";
    return kExitInput;
  }
  binf_solve_options opts = solve_options_from(settings);
  SolutionHandle sol;
  binf_status st = binf_solve(spec.ptr, &opts, &sol.ptr);
  if (st != BINF_OK) bail(st);

  std::ostringstream csv;
  csv << "r1,r2,active_constraint\n";
  size_t count = binf_solution_point_count(sol.ptr);
  for (size_t i = 0; i < count; ++i) {
    double r1 = 0, r2 = 0;
    const char* active = nullptr;
    binf_solution_point(sol.ptr, i, &r1, &r2, &active);
    csv << fmt6(r1) << "," << fmt6(r2) << "," << active << "\n";
  }
  write_file(out_dir / "boundary.csv", csv.str());
  write_file(out_dir / "argmax.json", binf_solution_param_json(sol.ptr));
  write_file(out_dir / "settings.json", binf_solution_settings_json(sol.ptr));
  write_manifest(out_dir, "region", settings, {"boundary.csv", "argmax.json", "settings.json"});

  std::cout << "boundary_points: " << count << "\n";
  std::cout << "sum_rate_max: " << fmt6(binf_solution_value(sol.ptr)) << "\n";
  return kExitOk;
}

int run_simulate(const json& settings, const fs::path& out_dir) {
  SpecHandle spec;
  load_spec_or_bail(settings.at("spec_path").get<std::string>(), spec);

  binf_solve_options sopts = solve_options_from(settings.at("solver"));
  SolutionHandle sol;
  binf_status st = binf_solve(spec.ptr, &sopts, &sol.ptr);
  if (st != BINF_OK) bail(st);

  binf_sim_options opts;
  binf_sim_options_init(&opts);
  opts.n = settings.value("n", opts.n);
  opts.blocks = settings.value("blocks", opts.blocks);
  opts.trials = settings.value("trials", opts.trials);
  opts.epsilon = settings.value("epsilon", opts.epsilon);
  opts.seed = settings.value("seed", static_cast<std::uint64_t>(1));
  opts.threads = settings.value("threads", 0);
  opts.symbol_budget = settings.value("symbol_budget", opts.symbol_budget);

  if (settings.contains("rates") && !settings["rates"].is_null()) {
    const json& r = settings["rates"];
    for (int k = 0; k < 2; ++k) {
      opts.r_prime[k] = r.at("r_prime").at(k).get<double>();
      opts.r_dprime[k] = r.at("r_dprime").at(k).get<double>();
      opts.r_tilde[k] = r.at("r_tilde").at(k).get<double>();
    }
  } else {
    double scale = settings.value("scale", 0.7);
    st = binf_derive_rates(spec.ptr, sol.ptr, scale, &opts);
    if (st != BINF_OK) bail(st);
  }

  binf_sim_result* result = nullptr;
  st = binf_simulate(spec.ptr, sol.ptr, &opts, &result);
  if (st != BINF_OK) bail(st);

  std::ostringstream csv;
  csv << "trial,block,event_a,event_b,event_c,decoded_ok\n";
  size_t rows = binf_sim_row_count(result);
  for (size_t i = 0; i < rows; ++i) {
    binf_sim_row row;
    binf_sim_row_get(result, i, &row);
    csv << row.trial << "," << row.block << "," << static_cast<int>(row.event_a) << ","
        << static_cast<int>(row.event_b) << "," << static_cast<int>(row.event_c) << ","
        << static_cast<int>(row.decoded_ok) << "\n";
  }
  write_file(out_dir / "trials.csv", csv.str());
  write_file(out_dir / "summary.json", binf_sim_summary_json(result));
  write_manifest(out_dir, "simulate", settings, {"trials.csv", "summary.json"});

  std::cout << "block_error_rate: " << fmt6(binf_sim_block_error_rate(result)) << "\n";
  std::cout << "event_rates: a=" << fmt6(binf_sim_event_rate(result, 0))
            << " b=" << fmt6(binf_sim_event_rate(result, 1))
            << " c=" << fmt6(binf_sim_event_rate(result, 2)) << "\n";
  std::cout << "realized_r1: prime=" << fmt6(binf_sim_realized_rate(result, 0, 0))
            << " dprime=" << fmt6(binf_sim_realized_rate(result, 0, 1))
            << " tilde=" << fmt6(binf_sim_realized_rate(result, 0, 2)) << "\n";
  std::cout << "seconds: " << fmt6(binf_sim_seconds(result)) << "\n";
  binf_sim_result_free(result);
  return kExitOk;
}

int run_fmcheck(const json& settings, const fs::path& out_dir) {
  SpecHandle spec;
  load_spec_or_bail(settings.at("spec_path").get<std::string>(), spec);
  int samples = settings.at("samples").get<int>();
  double step = settings.at("step").get<double>();
  std::uint64_t seed = settings.value("seed", static_cast<std::uint64_t>(1));
  if (samples < 1 || !(step > 0)) {
    std::cerr << "error: fmcheck needs samples >= 1 and step > 0\n";
    return kExitInput;
  }
  binf_fm_report* report = nullptr;
  binf_status st = binf_fm_check(spec.ptr, samples, step, seed, &report);
  if (st != BINF_OK) bail(st);

  write_file(out_dir / "fmcheck.json", binf_fm_report_json(report));
  write_manifest(out_dir, "fmcheck", settings, {"fmcheck.json"});

  bool passed = binf_fm_report_passed(report) != 0;
  std::cout << "samples: " << binf_fm_report_samples(report) << "\n";
  std::cout << "failures: " << binf_fm_report_failures(report) << "\n";
  std::cout << "verdict: " << (passed ? "pass" : "FAIL") << "\n";
  if (!passed) std::cout << binf_fm_report_json(report);
  binf_fm_report_free(report);
  return passed ? kExitOk : kExitFailedCheck;
}

int run_replay(const fs::path& manifest_path, std::string out_override) {
  std::ifstream in(manifest_path);
  if (!in) {
    std::cerr << "error: cannot open manifest " << manifest_path << "\n";
    return kExitInput;
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    std::cerr << "error: bad manifest: " << e.what() << "\n";
    return kExitInput;
  }
  fs::path out_dir = out_override.empty() ? manifest_path.parent_path() : fs::path(out_override);
  fs::create_directories(out_dir);
  std::string command = doc.value("command", "");
  const json& settings = doc.at("settings");
  if (command == "toy") return run_toy(settings, out_dir);
  if (command == "capacity") return run_capacity(settings, out_dir);
  if (command == "region") return run_region(settings, out_dir);
  if (command == "simulate") return run_simulate(settings, out_dir);
  if (command == "fmcheck") return run_fmcheck(settings, out_dir);
  std::cerr << "error: unknown command in manifest: " << command << "\n";
  return kExitInput;
}

std::uint64_t resolve_budget(std::uint64_t flag_value, bool flag_given) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("BINFORWARD_BUDGET")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) return v;
    std::cerr << "error: BINFORWARD_BUDGET must be a positive integer\n";
    std::exit(kExitInput);
  }
  return 1ull << 22;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capacity solver and cooperative-binning scheme simulator"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = ".", manifest_path, replay_out;
  double grid_step = 0.05, sim_grid_step = 0.1, weight_step = 0.05, epsilon = 0.2, toy_p = 0.0,
         step = 0.1, scale = 0.7;
  std::uint64_t seed = 1, enum_cap = 40'000'000, budget = 1ull << 22;
  int threads = 0, u_size = 0, restarts = 8, n = 12, blocks = 4, trials = 200, samples = 20;
  bool z1_independent = false;
  std::vector<double> r_prime, r_dprime, r_tilde;

  auto add_common = [&](CLI::App* cmd, bool needs_spec) {
    if (needs_spec) cmd->add_option("--spec", spec_path, "channel spec document")->required();
    cmd->add_option("--out", out_dir, "output directory (default .)");
    cmd->add_option("--seed", seed, "rng seed");
    cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
  };

  int map_mode = 0, map_cap = 4096;
  CLI::App* cap = app.add_subcommand("capacity", "solve a relay-kind capacity expression");
  add_common(cap, true);
  cap->add_option("--grid-step", grid_step, "base simplex grid step");
  cap->add_option("--u-size", u_size, "auxiliary cardinality (0 = default)");
  cap->add_option("--restarts", restarts, "random-restart count");
  cap->add_option("--enum-cap", enum_cap, "exhaustive grid size ceiling");
  cap->add_option("--map-mode", map_mode, "relay maps: 0 auto, 1 exhaustive, 2 sampled");
  cap->add_option("--map-cap", map_cap, "relay-map enumeration / sample limit");

  CLI::App* reg = app.add_subcommand("region", "solve a MAC-kind rate region");
  add_common(reg, true);
  reg->add_option("--grid-step", grid_step, "base simplex grid step / r1 resolution");
  reg->add_option("--u-size", u_size, "auxiliary cardinality (0 = default)");
  reg->add_option("--restarts", restarts, "random-restart count");
  reg->add_option("--enum-cap", enum_cap, "exhaustive grid size ceiling");
  reg->add_option("--weight-step", weight_step, "boundary sweep resolution");
  reg->add_flag("--z1-independent", z1_independent,
                "restrict the causal second encoder to ignore z1");

  CLI::App* sim = app.add_subcommand("simulate", "Monte-Carlo run of the binning scheme");
  add_common(sim, true);
  sim->add_option("--n", n, "block length");
  sim->add_option("--blocks", blocks, "number of blocks");
  sim->add_option("--trials", trials, "Monte-Carlo trials");
  sim->add_option("--epsilon", epsilon, "typicality slack");
  sim->add_option("--grid-step", sim_grid_step, "solver grid step for the argmax");
  auto* budget_opt = sim->add_option("--budget", budget, "codeword-symbol cap per trial");
  sim->add_option("--scale", scale, "operating rate as a fraction of the solved optimum");
  sim->add_option("--r-prime", r_prime, "explicit R' (one or two values)")->expected(1, 2);
  sim->add_option("--r-dprime", r_dprime, "explicit R'' (one or two values)")->expected(1, 2);
  sim->add_option("--r-tilde", r_tilde, "explicit R~ (one or two values)")->expected(1, 2);

  CLI::App* fm = app.add_subcommand("fmcheck", "verify the Fourier-Motzkin elimination empirically");
  add_common(fm, true);
  fm->add_option("--samples", samples, "random parameterizations to check");
  fm->add_option("--step", step, "rate grid step");

  CLI::App* toy = app.add_subcommand("toy", "rates of the stuck-at memory example");
  toy->add_option("--p", toy_p, "stuck-at fault probability")->required();
  toy->add_option("--out", out_dir, "output directory (default .)");

  CLI::App* rep = app.add_subcommand("replay", "re-run a previously written manifest");
  rep->add_option("--manifest", manifest_path, "manifest to replay")->required();
  rep->add_option("--out", replay_out, "output directory (default: manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  fs::create_directories(out_dir);

  try {
    if (app.got_subcommand(toy)) {
      json settings{{"p", toy_p}};
      return run_toy(settings, out_dir);
    }
    if (app.got_subcommand(cap)) {
      json settings{{"spec_path", spec_path}, {"grid_step", grid_step}, {"u_size", u_size},
                    {"restarts", restarts},   {"enum_cap", enum_cap},   {"seed", seed},
                    {"threads", threads},     {"map_mode", map_mode},   {"map_cap", map_cap}};
      return run_capacity(settings, out_dir);
    }
    if (app.got_subcommand(reg)) {
      json settings{{"spec_path", spec_path}, {"grid_step", grid_step},
                    {"u_size", u_size},       {"restarts", restarts},
                    {"enum_cap", enum_cap},   {"seed", seed},
                    {"threads", threads},     {"weight_step", weight_step},
                    {"z1_independent", z1_independent}};
      return run_region(settings, out_dir);
    }
    if (app.got_subcommand(sim)) {
      json settings;
      settings["spec_path"] = spec_path;
      settings["n"] = n;
      settings["blocks"] = blocks;
      settings["trials"] = trials;
      settings["epsilon"] = epsilon;
      settings["seed"] = seed;
      settings["threads"] = threads;
      settings["symbol_budget"] = resolve_budget(budget, budget_opt->count() > 0);
      settings["solver"] = json{{"grid_step", sim_grid_step}, {"seed", seed}, {"threads", threads}};
      bool explicit_rates = !r_prime.empty() || !r_dprime.empty() || !r_tilde.empty();
      if (explicit_rates) {
        auto pad = [](std::vector<double> v) {
          v.resize(2, 0.0);
          return v;
        };
        settings["rates"] = json{{"r_prime", pad(r_prime)},
                                 {"r_dprime", pad(r_dprime)},
                                 {"r_tilde", pad(r_tilde)}};
      } else {
        settings["scale"] = scale;
      }
      return run_simulate(settings, out_dir);
    }
    if (app.got_subcommand(fm)) {
      json settings{{"spec_path", spec_path}, {"samples", samples}, {"step", step}, {"seed", seed}};
      return run_fmcheck(settings, out_dir);
    }
    if (app.got_subcommand(rep)) {
      return run_replay(manifest_path, replay_out);
    }
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
