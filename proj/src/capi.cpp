#include "binforward/binforward.h"

#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "capacity.hpp"
#include "channel.hpp"
#include "json.hpp"
#include "simulate.hpp"
#include "spec_io.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

binf_status set_error(binf_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

binf_status from_exception() {
  try {
    throw;
  } catch (const binf::Error& e) {
    switch (e.code()) {
      case binf::Error::kInvalid: return set_error(BINF_ERR_INVALID, e.what());
      case binf::Error::kKind: return set_error(BINF_ERR_KIND, e.what());
      case binf::Error::kBudget: return set_error(BINF_ERR_BUDGET, e.what());
      case binf::Error::kIo: return set_error(BINF_ERR_IO, e.what());
      case binf::Error::kParse: return set_error(BINF_ERR_PARSE, e.what());
    }
    return set_error(BINF_ERR_INTERNAL, e.what());
  } catch (const std::exception& e) {
    return set_error(BINF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(BINF_ERR_INTERNAL, "unknown failure");
  }
}

json param_to_json(const binf::ChannelSpec& spec, const binf::Parameterization& p) {
  json doc;
  doc["kind"] = binf::kind_name(spec.kind);
  doc["u_size"] = p.u_size;
  json factors;
  const bool relay = binf::is_relay_kind(spec.kind);
  factors[relay && spec.kind != binf::ChannelKind::kStateRelayNoDelay ? "p_xr" : "p_u"] = p.coop;
  auto rows_to_json = [](const std::vector<double>& flat, int row_len) {
    json rows = json::array();
    for (std::size_t off = 0; off + row_len <= flat.size(); off += static_cast<std::size_t>(row_len))
      rows.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                         flat.begin() + static_cast<std::ptrdiff_t>(off) + row_len));
    return rows;
  };
  if (relay) {
    factors[spec.kind == binf::ChannelKind::kStateRelayNoDelay ? "p_x|u,s" : "p_x|xr,s"] =
        rows_to_json(p.input1, spec.inputs[0].size);
    if (spec.kind == binf::ChannelKind::kStateRelayNoDelay) factors["xr_map(u,z)"] = p.relay_map;
  } else {
    factors["p_x1|u,s1"] = rows_to_json(p.input1, spec.inputs[0].size);
    factors[spec.kind == binf::ChannelKind::kStateMacCausal ? "p_x2|u,s2,z1" : "p_x2|u,s2"] =
        rows_to_json(p.input2, spec.inputs[1].size);
  }
  doc["factors"] = factors;
  return doc;
}

}  // namespace

struct binf_spec {
  binf::ChannelSpec spec;
};

struct binf_solution {
  binf::ChannelSpec spec;  // retained so the argmax can be re-attached
  binf::Solution sol;
  std::string param_json;
  std::string settings_json;
};

struct binf_fm_report {
  binf::FmReport report;
  std::string json_text;
};

struct binf_sim_result {
  binf::SimResult result;
  std::string summary_json;
};

extern "C" {

const char* binf_version(void) { return "0.1.0"; }

const char* binf_last_error(void) { return g_last_error.c_str(); }

const char* binf_status_name(binf_status status) {
  switch (status) {
    case BINF_OK: return "ok";
    case BINF_ERR_INVALID: return "invalid argument";
    case BINF_ERR_KIND: return "wrong channel kind";
    case BINF_ERR_BUDGET: return "budget exceeded";
    case BINF_ERR_IO: return "io failure";
    case BINF_ERR_PARSE: return "parse failure";
    case BINF_ERR_INTERNAL: return "internal failure";
  }
  return "?";
}

binf_status binf_spec_load(const char* path, binf_spec** out) {
  if (!path || !out) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    auto* handle = new binf_spec{binf::load_spec(path)};
    *out = handle;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_status binf_spec_from_json(const char* json_text, binf_spec** out) {
  if (!json_text || !out) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    *out = new binf_spec{binf::parse_spec(json_text)};
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_status binf_spec_make_toy(double stuck_prob, binf_spec** out) {
  if (!out) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    *out = new binf_spec{binf::make_toy_spec({stuck_prob})};
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_status binf_spec_to_json(const binf_spec* spec, char** out_text) {
  if (!spec || !out_text) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    std::string text = binf::serialize_spec(spec->spec);
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out_text = buf;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_status binf_spec_save(const binf_spec* spec, const char* path) {
  if (!spec || !path) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    binf::save_spec(spec->spec, path);
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_kind binf_spec_kind(const binf_spec* spec) {
  return static_cast<binf_kind>(static_cast<int>(spec->spec.kind));
}

void binf_spec_free(binf_spec* spec) { delete spec; }

void binf_string_free(char* text) { delete[] text; }

void binf_solve_options_init(binf_solve_options* options) {
  if (!options) return;
  binf::SolveOptions defaults;
  options->grid_step = defaults.grid_step;
  options->u_size = 0;
  options->restarts = defaults.restarts;
  options->threads = 0;
  options->seed = defaults.seed;
  options->enum_cap = defaults.enum_cap;
  options->weight_step = defaults.weight_step;
  options->map_mode = 0;
  options->map_cap = defaults.map_cap;
  options->z1_independent = 0;
}

binf_status binf_solve(const binf_spec* spec, const binf_solve_options* options, binf_solution** out) {
  if (!spec || !out) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    binf::SolveOptions opts;
    if (options) {
      opts.grid_step = options->grid_step;
      opts.u_size = options->u_size;
      opts.restarts = options->restarts;
      opts.threads = options->threads;
      opts.seed = options->seed;
      opts.enum_cap = options->enum_cap;
      opts.weight_step = options->weight_step;
      opts.map_mode = static_cast<binf::SolveOptions::MapMode>(options->map_mode);
      opts.map_cap = options->map_cap;
      opts.z1_independent = options->z1_independent != 0;
    }
    auto* handle = new binf_solution;
    handle->spec = spec->spec;
    handle->sol = binf::solve(spec->spec, opts);
    handle->param_json = param_to_json(handle->spec, handle->sol.argmax).dump(2) + "\n";
    json settings;
    settings["kind"] = binf::kind_name(handle->sol.kind);
    settings["base_step"] = handle->sol.base_step;
    settings["cert_step_small"] = handle->sol.cert_step_small;
    settings["cert_step_big"] = handle->sol.cert_step_big;
    settings["grid_points"] = handle->sol.grid_points;
    settings["u_size"] = handle->sol.u_size;
    settings["u_cardinality_cap"] = handle->sol.u_cap;
    settings["maps_total"] = handle->sol.maps_total;
    settings["maps_searched"] = handle->sol.maps_searched;
    settings["restarts"] = opts.restarts;
    settings["seed"] = opts.seed;
    settings["lower_bound"] = true;
    handle->settings_json = settings.dump(2) + "\n";
    *out = handle;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

int binf_solution_is_region(const binf_solution* sol) { return sol->sol.is_region ? 1 : 0; }

double binf_solution_value(const binf_solution* sol) { return sol->sol.value; }

size_t binf_solution_point_count(const binf_solution* sol) { return sol->sol.region.boundary.size(); }

binf_status binf_solution_point(const binf_solution* sol, size_t index, double* r1, double* r2,
                                const char** active_constraint) {
  if (!sol || index >= sol->sol.region.boundary.size())
    return set_error(BINF_ERR_INVALID, "boundary index out of range");
  const auto& p = sol->sol.region.boundary[index];
  if (r1) *r1 = p.r1;
  if (r2) *r2 = p.r2;
  if (active_constraint) *active_constraint = p.active.c_str();
  return BINF_OK;
}

int binf_solution_region_contains(const binf_solution* sol, double r1, double r2) {
  return sol->sol.region.contains(r1, r2) ? 1 : 0;
}

const char* binf_solution_param_json(const binf_solution* sol) { return sol->param_json.c_str(); }

const char* binf_solution_settings_json(const binf_solution* sol) { return sol->settings_json.c_str(); }

void binf_solution_free(binf_solution* sol) { delete sol; }

binf_status binf_toy_rates(double stuck_prob, double* bin_forward, double* decode_forward) {
  try {
    binf::ToyRates rates = binf::toy_rates(stuck_prob);
    if (bin_forward) *bin_forward = rates.bin_forward;
    if (decode_forward) *decode_forward = rates.decode_forward;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_status binf_fm_check(const binf_spec* spec, int samples, double rate_step, uint64_t seed,
                          binf_fm_report** out) {
  if (!spec || !out) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    auto* handle = new binf_fm_report;
    handle->report = binf::fm_check_sampled(spec->spec, samples, rate_step, seed);
    json doc;
    doc["samples"] = handle->report.samples;
    doc["failures"] = handle->report.failures;
    doc["passed"] = handle->report.passed;
    if (handle->report.counterexample) {
      const auto& ce = *handle->report.counterexample;
      doc["counterexample"] = {{"r1", ce.r1},
                               {"r2", ce.r2},
                               {"region_side", ce.region_side},
                               {"aux_side", ce.aux_side},
                               {"sample", ce.sample}};
    }
    handle->json_text = doc.dump(2) + "\n";
    *out = handle;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

int binf_fm_report_passed(const binf_fm_report* report) { return report->report.passed ? 1 : 0; }
int binf_fm_report_samples(const binf_fm_report* report) { return report->report.samples; }
int binf_fm_report_failures(const binf_fm_report* report) { return report->report.failures; }
const char* binf_fm_report_json(const binf_fm_report* report) { return report->json_text.c_str(); }
void binf_fm_report_free(binf_fm_report* report) { delete report; }

void binf_sim_options_init(binf_sim_options* options) {
  if (!options) return;
  binf::SchemeConfig defaults;
  options->n = defaults.n;
  options->blocks = defaults.blocks;
  options->trials = defaults.trials;
  options->epsilon = defaults.epsilon;
  options->seed = defaults.master_seed;
  options->threads = 0;
  options->symbol_budget = defaults.symbol_budget;
  for (int k = 0; k < 2; ++k) {
    options->r_prime[k] = 0;
    options->r_dprime[k] = 0;
    options->r_tilde[k] = 0;
  }
}

binf_status binf_derive_rates(const binf_spec* spec, const binf_solution* sol, double scale,
                              binf_sim_options* options) {
  if (!spec || !sol || !options) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    double rate1, rate2 = 0;
    if (binf::is_relay_kind(spec->spec.kind)) {
      rate1 = scale * sol->sol.value;
    } else {
      rate1 = scale * sol->sol.value / 2;
      rate2 = rate1;
    }
    binf::RateSplit enc1, enc2;
    binf::derive_rate_split(spec->spec, sol->sol.argmax, rate1, rate2, enc1, enc2);
    options->r_prime[0] = enc1.r_prime;
    options->r_dprime[0] = enc1.r_dprime;
    options->r_tilde[0] = enc1.r_tilde;
    options->r_prime[1] = enc2.r_prime;
    options->r_dprime[1] = enc2.r_dprime;
    options->r_tilde[1] = enc2.r_tilde;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

binf_status binf_simulate(const binf_spec* spec, const binf_solution* sol, const binf_sim_options* options,
                          binf_sim_result** out) {
  if (!spec || !sol || !options || !out) return set_error(BINF_ERR_INVALID, "null argument");
  try {
    binf::SchemeConfig cfg;
    cfg.n = options->n;
    cfg.blocks = options->blocks;
    cfg.trials = options->trials;
    cfg.epsilon = options->epsilon;
    cfg.master_seed = options->seed;
    cfg.threads = options->threads;
    cfg.symbol_budget = options->symbol_budget;
    cfg.enc1 = {options->r_prime[0], options->r_dprime[0], options->r_tilde[0]};
    cfg.enc2 = {options->r_prime[1], options->r_dprime[1], options->r_tilde[1]};
    auto* handle = new binf_sim_result;
    handle->result = binf::run_trials(spec->spec, sol->sol.argmax, cfg);
    const binf::SimResult& r = handle->result;
    json doc;
    doc["trials"] = r.trials;
    doc["blocks"] = r.blocks;
    doc["n"] = r.n;
    doc["epsilon"] = cfg.epsilon;
    doc["seed"] = cfg.master_seed;
    doc["block_error_rate"] = r.block_error_rate;
    doc["event_a_rate"] = r.event_a_rate;
    doc["event_b_rate"] = r.event_b_rate;
    doc["event_c_rate"] = r.event_c_rate;
    doc["true_tuple_reject_rate"] = r.true_tuple_reject_rate;
    doc["realized"] = {{"r1_prime", r.realized1.r_prime},
                       {"r1_dprime", r.realized1.r_dprime},
                       {"r1_tilde", r.realized1.r_tilde},
                       {"r2_prime", r.realized2.r_prime},
                       {"r2_dprime", r.realized2.r_dprime},
                       {"r2_tilde", r.realized2.r_tilde}};
    doc["collision"] = {{"pairs", r.collision_pairs},
                        {"hits", r.collision_hits},
                        {"expected_rate", r.collision_expected}};
    handle->summary_json = doc.dump(2) + "\n";
    *out = handle;
    return BINF_OK;
  } catch (...) {
    return from_exception();
  }
}

double binf_sim_block_error_rate(const binf_sim_result* result) { return result->result.block_error_rate; }

double binf_sim_event_rate(const binf_sim_result* result, int event) {
  switch (event) {
    case 0: return result->result.event_a_rate;
    case 1: return result->result.event_b_rate;
    case 2: return result->result.event_c_rate;
  }
  return -1;
}

double binf_sim_true_tuple_reject_rate(const binf_sim_result* result) {
  return result->result.true_tuple_reject_rate;
}

double binf_sim_realized_rate(const binf_sim_result* result, int encoder, int which) {
  const binf::RateSplit& split = encoder == 0 ? result->result.realized1 : result->result.realized2;
  switch (which) {
    case 0: return split.r_prime;
    case 1: return split.r_dprime;
    case 2: return split.r_tilde;
  }
  return -1;
}

void binf_sim_collision_stats(const binf_sim_result* result, uint64_t* pairs, uint64_t* hits,
                              double* expected) {
  if (pairs) *pairs = result->result.collision_pairs;
  if (hits) *hits = result->result.collision_hits;
  if (expected) *expected = result->result.collision_expected;
}

size_t binf_sim_row_count(const binf_sim_result* result) { return result->result.rows.size(); }

binf_status binf_sim_row_get(const binf_sim_result* result, size_t index, binf_sim_row* row) {
  if (!result || !row || index >= result->result.rows.size())
    return set_error(BINF_ERR_INVALID, "row index out of range");
  const binf::SimBlockRow& r = result->result.rows[index];
  row->trial = r.trial;
  row->block = r.block;
  row->event_a = r.event_a;
  row->event_b = r.event_b;
  row->event_c = r.event_c;
  row->decoded_ok = r.decoded_ok;
  return BINF_OK;
}

const char* binf_sim_summary_json(const binf_sim_result* result) { return result->summary_json.c_str(); }

double binf_sim_seconds(const binf_sim_result* result) { return result->result.seconds; }

void binf_sim_result_free(binf_sim_result* result) { delete result; }

}  // extern "C"
