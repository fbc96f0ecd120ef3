#include "etac/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace etac {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Value {
  std::string raw;
  int line;

  double as_double() const {
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || *end != '\0' || !std::isfinite(v))
      throw ConfigError(line, "expected a number, got '" + raw + "'");
    return v;
  }

  long long as_int() const {
    const double v = as_double();
    const long long i = static_cast<long long>(std::llround(v));
    if (static_cast<double>(i) != v)
      throw ConfigError(line, "expected an integer, got '" + raw + "'");
    return i;
  }

  bool as_bool() const {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError(line, "expected true or false, got '" + raw + "'");
  }

  std::string as_string() const {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
      return raw.substr(1, raw.size() - 2);
    return raw;
  }
};

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file: " + path);

  RunConfig cfg;
  using Setter = std::function<void(const Value&)>;
  std::map<std::string, Setter> keys;
  auto num = [&](const char* name, double* dst) {
    keys[name] = [dst](const Value& v) { *dst = v.as_double(); };
  };
  auto integer = [&](const char* name, int* dst) {
    keys[name] = [dst](const Value& v) { *dst = static_cast<int>(v.as_int()); };
  };
  auto boolean = [&](const char* name, bool* dst) {
    keys[name] = [dst](const Value& v) { *dst = v.as_bool(); };
  };
  auto scalar_mat = [&](const char* name, Mat* dst) {
    keys[name] = [dst](const Value& v) {
      *dst = Mat::Constant(1, 1, v.as_double());
    };
  };

  keys["run.mode"] = [&cfg](const Value& v) {
    try {
      cfg.mode = mode_from_string(v.as_string());
    } catch (const std::exception& ex) {
      throw ConfigError(v.line, ex.what());
    }
  };
  keys["run.seed"] = [&cfg](const Value& v) {
    cfg.seed = static_cast<std::uint64_t>(v.as_int());
  };
  num("run.h0", &cfg.h0);
  num("run.v0", &cfg.v0);
  num("run.x_ref", &cfg.x_ref);
  num("run.max_time", &cfg.max_time);
  keys["run.model"] = [&cfg](const Value& v) { cfg.model_source = v.as_string(); };

  integer("model.degree", &cfg.degree);

  num("plant.dt", &cfg.plant.dt);
  num("plant.touchdown_height", &cfg.plant.touchdown_height);
  boolean("plant.ground_effect", &cfg.plant.ground_effect);
  num("plant.ge_rotor_radius", &cfg.plant.ge_rotor_radius);
  num("plant.ge_zeta_cap", &cfg.plant.ge_zeta_cap);
  boolean("plant.platform", &cfg.plant.platform);
  integer("plant.platform_components", &cfg.plant.platform_components);
  num("plant.platform_amplitude", &cfg.plant.platform_amplitude);
  num("plant.platform_offset", &cfg.plant.platform_offset);
  num("plant.platform_omega_min", &cfg.plant.platform_omega_min);
  num("plant.platform_omega_max", &cfg.plant.platform_omega_max);
  boolean("plant.noise", &cfg.plant.noise);
  num("plant.snr_db", &cfg.plant.snr_db);

  num("triggers.sigma", &cfg.trigger_sigma);
  num("triggers.beta", &cfg.trigger_beta);
  num("triggers.gamma", &cfg.trigger_gamma);
  num("triggers.alpha", &cfg.trigger_alpha);
  num("triggers.q_weight", &cfg.trigger_q_weight);

  integer("mpc.horizon", &cfg.mpc.horizon);
  scalar_mat("mpc.p", &cfg.mpc.P);
  scalar_mat("mpc.p_b", &cfg.mpc.P_b);
  scalar_mat("mpc.r", &cfg.mpc.R);
  num("mpc.x_min", &cfg.mpc.x_min);
  num("mpc.x_max", &cfg.mpc.x_max);
  num("mpc.u_min", &cfg.mpc.u_min);
  num("mpc.u_max", &cfg.mpc.u_max);

  integer("adaptation.window", &cfg.adaptation.window);
  num("adaptation.forgetting", &cfg.adaptation.forgetting);

  integer("train.n_traj", &cfg.train.n_traj);
  integer("train.traj_len", &cfg.train.traj_len);
  num("train.ridge", &cfg.train.ridge);
  num("train.h_min", &cfg.train.h_min);
  num("train.h_max", &cfg.train.h_max);
  num("train.v_min", &cfg.train.v_min);
  num("train.v_max", &cfg.train.v_max);

  static const char* kSections[] = {"run",      "model", "plant", "triggers",
                                    "mpc",      "adaptation", "train"};

  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(line_no, "malformed section header: " + line);
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const char* s : kSections) known = known || section == s;
      if (!known) throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(line_no, "key '" + key + "' outside any section");
    if (key.empty() || raw.empty())
      throw ConfigError(line_no, "malformed key = value line");

    const auto it = keys.find(section + "." + key);
    if (it == keys.end())
      throw ConfigError(line_no,
                        "unknown key '" + key + "' in section [" + section + "]");
    it->second(Value{raw, line_no});
  }

  try {
    cfg.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(0, std::string("invalid configuration: ") + ex.what());
  }
  return cfg;
}

}  // namespace etac
