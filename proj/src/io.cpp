#include "switchq/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace switchq {

using nlohmann::json;

namespace {

constexpr double kLoadTolerance = 1e-9;

const json& field(const json& obj, const char* name) {
  if (!obj.is_object()) throw InputError("MDP file: top level must be a JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw InputError(std::string("MDP file: missing field '") + name + "'");
  return *it;
}

int positive_int(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 1'000'000) {
    throw InputError(std::string("MDP file: '") + name + "' must be a positive integer");
  }
  return v.get<int>();
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw InputError("MDP file: " + where + " must be a number");
  return v.get<double>();
}

const json& array_of(const json& v, std::size_t size, const std::string& where) {
  if (!v.is_array() || v.size() != size) {
    throw InputError("MDP file: " + where + " must be an array of length " + std::to_string(size));
  }
  return v;
}

std::string at(const char* name, int s, int a = -1) {
  std::string out = std::string(name) + "[" + std::to_string(s) + "]";
  if (a >= 0) out += "[" + std::to_string(a) + "]";
  return out;
}

void check_sum(double sum, const std::string& what) {
  if (std::abs(sum - 1.0) > kLoadTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "MDP file: " << what << " sums to " << sum << ", not 1";
    throw InputError(os.str());
  }
}

}  // namespace

RandomInstance parse_mdp_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("MDP file: ") + e.what());
  }
  const int ns = positive_int(doc, "n_states");
  const int na = positive_int(doc, "n_actions");
  const double gamma = number(field(doc, "gamma"), "'gamma'");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("MDP file: 'gamma' must lie in [0, 1)");

  const std::size_t size = static_cast<std::size_t>(ns) * na * ns;
  std::vector<double> transition;
  std::vector<double> reward;
  transition.reserve(size);
  reward.reserve(size);
  const json& p_tensor = array_of(field(doc, "P"), ns, "'P'");
  const json& r_tensor = array_of(field(doc, "R"), ns, "'R'");
  for (int s = 0; s < ns; ++s) {
    const json& p_s = array_of(p_tensor[s], na, at("P", s));
    const json& r_s = array_of(r_tensor[s], na, at("R", s));
    for (int a = 0; a < na; ++a) {
      const std::string where = at("P", s, a);
      const json& p_row = array_of(p_s[a], ns, where);
      const json& r_row = array_of(r_s[a], ns, at("R", s, a));
      double sum = 0.0;
      for (int sn = 0; sn < ns; ++sn) {
        const double prob = number(p_row[sn], where);
        if (!(prob >= 0.0)) {
          throw InputError("MDP file: negative probability in " + where + " for (s,a)=(" +
                           std::to_string(s) + "," + std::to_string(a) + ")");
        }
        sum += prob;
        transition.push_back(prob);
        const double r = number(r_row[sn], at("R", s, a));
        if (!(std::abs(r) <= 1.0)) {
          throw InputError("MDP file: reward in " + at("R", s, a) + " exceeds 1 in magnitude");
        }
        reward.push_back(r);
      }
      check_sum(sum, where + ", the transition row of (s,a)=(" + std::to_string(s) + "," +
                         std::to_string(a) + "),");
    }
  }

  SamplingModel sampling{Vector(ns), Matrix(ns, na)};
  const json& p = array_of(field(doc, "p"), ns, "'p'");
  double p_sum = 0.0;
  for (int s = 0; s < ns; ++s) {
    sampling.state_dist(s) = number(p[s], at("p", s));
    if (!(sampling.state_dist(s) > 0.0)) throw InputError("MDP file: " + at("p", s) + " must be positive");
    p_sum += sampling.state_dist(s);
  }
  check_sum(p_sum, "'p'");
  const json& beta = array_of(field(doc, "beta"), ns, "'beta'");
  for (int s = 0; s < ns; ++s) {
    const json& row = array_of(beta[s], na, at("beta", s));
    double sum = 0.0;
    for (int a = 0; a < na; ++a) {
      sampling.behavior(s, a) = number(row[a], at("beta", s, a));
      if (!(sampling.behavior(s, a) > 0.0)) {
        throw InputError("MDP file: " + at("beta", s, a) + " must be positive");
      }
      sum += sampling.behavior(s, a);
    }
    check_sum(sum, at("beta", s));
  }
  return {Mdp(ns, na, std::move(transition), std::move(reward), gamma), std::move(sampling)};
}

RandomInstance load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_mdp_json(buf.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string mdp_to_json(const Mdp& mdp, const SamplingModel& sampling) {
  const int ns = mdp.n_states();
  const int na = mdp.n_actions();
  json p_tensor = json::array();
  json r_tensor = json::array();
  for (int s = 0; s < ns; ++s) {
    json p_s = json::array();
    json r_s = json::array();
    for (int a = 0; a < na; ++a) {
      json p_row = json::array();
      json r_row = json::array();
      for (int sn = 0; sn < ns; ++sn) {
        p_row.push_back(mdp.p(s, a, sn));
        r_row.push_back(mdp.r(s, a, sn));
      }
      p_s.push_back(std::move(p_row));
      r_s.push_back(std::move(r_row));
    }
    p_tensor.push_back(std::move(p_s));
    r_tensor.push_back(std::move(r_s));
  }
  json p = json::array();
  json beta = json::array();
  for (int s = 0; s < ns; ++s) {
    p.push_back(sampling.state_dist(s));
    json row = json::array();
    for (int a = 0; a < na; ++a) row.push_back(sampling.behavior(s, a));
    beta.push_back(std::move(row));
  }
  json doc = json::object();
  doc["n_states"] = ns;
  doc["n_actions"] = na;
  doc["gamma"] = mdp.gamma();
  doc["P"] = std::move(p_tensor);
  doc["R"] = std::move(r_tensor);
  doc["p"] = std::move(p);
  doc["beta"] = std::move(beta);
  return doc.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw InputError("write to '" + path.string() + "' failed");
}

void save_mdp(const std::filesystem::path& path, const Mdp& mdp, const SamplingModel& sampling) {
  write_text_file(path, mdp_to_json(mdp, sampling));
}

void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRow> rows) {
  os << "trial,k,err_inf,err_lower_l2,err_lower_inf,gap_upper_lower_inf,sandwich_ok\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%s\n", r.trial, r.k, r.err_inf,
                  r.err_lower_l2, r.err_lower_inf, r.gap_upper_lower_inf,
                  r.sandwich_ok ? "true" : "false");
    os << buf;
  }
}

namespace {

const char* status_name(SuiteStatus s) {
  switch (s) {
    case SuiteStatus::kPass: return "pass";
    case SuiteStatus::kFail: return "fail";
    case SuiteStatus::kSkipped: return "skipped";
  }
  return "unknown";
}

json estimate_json(const Estimate& e) {
  return {{"k", e.k}, {"mean", e.mean}, {"std_error", e.std_error}, {"n_trials", e.n_trials}};
}

}  // namespace

std::string report_to_json(const VerificationReport& report) {
  const ExperimentConfig& c = report.config;
  json config = {{"alpha", c.alpha},
                 {"horizon", c.horizon},
                 {"n_trials", c.n_trials},
                 {"checkpoints", c.resolved_checkpoints()},
                 {"base_seed", c.base_seed},
                 {"sandwich_tol", c.sandwich_tol},
                 {"identity_tol", c.identity_tol},
                 {"bound_scale", c.bound_scale}};
  const ProblemSummary& p = report.problem;
  json problem = {{"n_states", p.n_states}, {"n_actions", p.n_actions}, {"gamma", p.gamma},
                  {"d_min", p.d_min},       {"d_max", p.d_max},         {"rho", p.rho},
                  {"q_max", p.q_max},       {"r_max", p.r_max}};

  json metrics = json::array();
  for (const auto& [name, estimates] : report.metrics) {
    json values = json::array();
    for (const auto& e : estimates) values.push_back(estimate_json(e));
    metrics.push_back({{"name", name}, {"estimates", std::move(values)}});
  }

  json bounds = json::array();
  long bound_failures = 0;
  for (const auto& b : report.bounds) {
    if (b.enforced && !b.pass) ++bound_failures;
    bounds.push_back({{"curve", b.curve},
                      {"metric", b.metric},
                      {"k", b.k},
                      {"mean", b.mean},
                      {"std_error", b.std_error},
                      {"bound", b.bound},
                      {"enforced", b.enforced},
                      {"pass", b.pass}});
  }

  json suites = json::array();
  json violations = json::object();
  for (const auto& s : report.suites) {
    suites.push_back({{"name", s.name},
                      {"status", status_name(s.status)},
                      {"checks", s.checks},
                      {"violations", s.violations},
                      {"worst", s.worst},
                      {"detail", s.detail}});
    violations[s.name] = s.violations;
  }
  violations["bound_rows"] = bound_failures;

  json doc = json::object();
  doc["config"] = std::move(config);
  doc["problem"] = std::move(problem);
  doc["metrics"] = std::move(metrics);
  doc["bounds"] = std::move(bounds);
  doc["suites"] = std::move(suites);
  doc["violations"] = std::move(violations);
  doc["pass"] = report.pass();
  return doc.dump(2) + "\n";
}

}  // namespace switchq
