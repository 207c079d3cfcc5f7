#ifndef LSMBD_CONFIG_HPP
#define LSMBD_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lsmbd/encoder.hpp"
#include "lsmbd/errors.hpp"
#include "lsmbd/training.hpp"

namespace lsmbd {

// Flat sectioned key=value text. '#' or ';' start a comment; keys are
// "section.key" internally. Unknown keys are hard errors: a silently ignored
// typo in a hyperparameter is the main reproducibility hazard.
struct ConfigText {
  std::map<std::string, std::string> values;

  static ConfigText parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string());
  }

  static ConfigText parse(const std::string& text, const std::string& origin = "<string>") {
    ConfigText cfg;
    std::string section;
    std::size_t lineno = 0;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (cfg.values.count(full))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
      cfg.values[full] = value;
    }
    return cfg;
  }
};

// One stage-2 training problem size; the paper-scale preset carries the
// published (CR, M_z) pairs verbatim so rounding never drifts from them.
struct CrEntry {
  double cr_pct = 0.0;
  std::size_t m_z = 0;
};

struct RunConfig {
  // dims
  std::size_t m_s = 21, m_x = 40, l = 3;
  // data
  std::uint64_t data_seed = 42;
  std::size_t n_stage1 = 100, n_train = 400, n_val = 100, n_test = 100;
  // stages
  StageConfig stage1;
  StageConfig stage2;
  // ls-mbd-l
  StageConfig lista;
  std::size_t lista_layers = 20;
  // stage-2 grid sweep (empty = off; otherwise validation loss selects)
  std::vector<double> lambda_grid;
  std::vector<double> c_grid;
  // eval
  std::vector<std::string> methods = {"ls-mbd", "gs-mbd", "g-mbd"};
  std::size_t trials = 10;
  std::size_t timing_repeats = 20;
  double alpha_safety = 0.95;
  std::string fsmbd_csv;
  // run
  std::vector<double> cr_list = {35.0};
  bool cr_paper_preset = false;
  double warm_from_cr = 0.0;  // 0 = never warm start

  std::size_t m_y() const { return m_x + m_s - 1; }

  std::vector<CrEntry> cr_entries() const;
  void validate() const;
};

inline const std::vector<CrEntry>& paper_cr_table() {
  // (CR %, M_z) pairs for M_y = 198
  static const std::vector<CrEntry> table = {
      {50.0, 99}, {40.4, 80}, {35.35, 70}, {31.31, 62},
      {25.25, 50}, {23.74, 47}, {22.72, 45}, {20.20, 40},
  };
  return table;
}

inline std::vector<CrEntry> RunConfig::cr_entries() const {
  std::vector<CrEntry> out;
  if (cr_paper_preset) {
    if (m_y() != 198)
      throw ConfigError("run.cr_preset=paper requires M_y = 198 (got " +
                        std::to_string(m_y()) + ")");
    return paper_cr_table();
  }
  for (double cr : cr_list) {
    if (!(cr > 0.0 && cr <= 100.0))
      throw ConfigError("run.cr_list: CR must lie in (0, 100], got " + std::to_string(cr));
    CrEntry e;
    e.cr_pct = cr;
    // paper pairs take precedence when they apply exactly
    bool matched = false;
    if (m_y() == 198) {
      for (const auto& p : paper_cr_table())
        if (std::abs(p.cr_pct - cr) < 1e-9) {
          e.m_z = p.m_z;
          matched = true;
          break;
        }
    }
    if (!matched)
      e.m_z = static_cast<std::size_t>(
          std::llround(cr * static_cast<double>(m_y()) / 100.0));
    if (e.m_z == 0) throw ConfigError("run.cr_list: CR yields M_z = 0");
    if (e.m_z > m_y()) e.m_z = m_y();
    out.push_back(e);
  }
  return out;
}

inline void RunConfig::validate() const {
  if (l > m_x) throw ConfigError("dims.L exceeds dims.mx");
  if (m_s == 0 || m_x == 0 || l == 0) throw ConfigError("dims must be positive");
  stage1.validate();
  stage2.validate();
  lista.validate();
  for (const auto& m : methods)
    if (m != "ls-mbd" && m != "gs-mbd" && m != "g-mbd" && m != "ls-mbd-l" && m != "fs-mbd")
      throw ConfigError("eval.methods: unknown method '" + m + "'");
  cr_entries();  // validates the CR list
}

inline RunConfig preset_desk() {
  RunConfig c;
  c.m_s = 21;
  c.m_x = 40;
  c.l = 3;
  c.data_seed = 42;
  c.n_stage1 = 100;
  c.n_train = 400;
  c.n_val = 100;
  c.n_test = 100;

  c.stage1.stage = 1;
  c.stage1.epochs = 300;
  c.stage1.batch_size = 0;  // full batch
  c.stage1.lr = 0.03;
  c.stage1.lr_decay_factor = 0.9;
  c.stage1.lr_decay_period = 100;
  c.stage1.adam_eps = 1e-2;
  c.stage1.enc = {.iters = 2000, .alpha = 0.05, .lambda = 0.1, .decay = 0.9953,
                  .nonneg = true, .backprop = 100};
  c.stage1.init_seed = 7;

  c.stage2.stage = 2;
  c.stage2.epochs = 200;
  c.stage2.batch_size = 100;
  c.stage2.lr = 1e-3;
  c.stage2.lr_decay_factor = 0.9;
  c.stage2.lr_decay_period = 100;
  c.stage2.adam_eps = 1e-8;
  c.stage2.enc = c.stage1.enc;
  c.stage2.init_seed = 8;
  c.stage2.eval_every = 10;

  c.lista = c.stage2;
  c.lista.lr = 1e-3;
  c.lista.epochs = 300;
  c.lista.init_seed = 9;
  c.lista_layers = 20;

  c.cr_list = {35.0};
  c.warm_from_cr = 0.0;
  return c;
}

inline RunConfig preset_paper() {
  RunConfig c;
  c.m_s = 99;
  c.m_x = 100;
  c.l = 6;
  c.data_seed = 42;
  c.n_stage1 = 100;
  c.n_train = 10000;
  c.n_val = 100;
  c.n_test = 100;

  c.stage1.stage = 1;
  c.stage1.epochs = 1000;
  c.stage1.batch_size = 0;
  c.stage1.lr = 0.03;
  c.stage1.lr_decay_factor = 0.9;
  c.stage1.lr_decay_period = 100;
  c.stage1.adam_eps = 1e-2;
  c.stage1.enc = {.iters = 15000, .alpha = 0.05, .lambda = 0.1, .decay = 0.99937,
                  .nonneg = true, .backprop = 100};
  c.stage1.init_seed = 7;

  c.stage2.stage = 2;
  c.stage2.epochs = 1000;
  c.stage2.batch_size = 100;
  c.stage2.lr = 1e-3;
  c.stage2.lr_decay_factor = 0.9;
  c.stage2.lr_decay_period = 100;
  c.stage2.adam_eps = 1e-8;
  c.stage2.enc = c.stage1.enc;
  c.stage2.init_seed = 8;
  c.stage2.eval_every = 1;

  c.lista = c.stage2;
  c.lista.epochs = 1000;
  c.lista.init_seed = 9;
  c.lista_layers = 20;

  c.methods = {"ls-mbd", "gs-mbd", "g-mbd", "ls-mbd-l"};
  c.cr_paper_preset = true;
  c.warm_from_cr = 23.74;
  return c;
}

namespace detail {

struct ConfigReader {
  const ConfigText& text;
  std::set<std::string> consumed;

  explicit ConfigReader(const ConfigText& t) : text(t) {}

  const std::string* raw(const std::string& key) {
    auto it = text.values.find(key);
    if (it == text.values.end()) return nullptr;
    consumed.insert(key);
    return &it->second;
  }

  template <typename T, typename Parse>
  void read(const std::string& key, T& out, Parse parse) {
    if (const std::string* v = raw(key)) {
      try {
        out = parse(*v);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("config: invalid value for '" + key + "': " + *v);
      }
    }
  }

  void size(const std::string& key, std::size_t& out) {
    read(key, out, [](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); });
  }
  void u64(const std::string& key, std::uint64_t& out) {
    read(key, out, [](const std::string& s) { return std::stoull(s); });
  }
  void real(const std::string& key, double& out) {
    read(key, out, [](const std::string& s) { return std::stod(s); });
  }
  void boolean(const std::string& key, bool& out) {
    read(key, out, [&key](const std::string& s) {
      if (s == "1" || s == "true" || s == "yes") return true;
      if (s == "0" || s == "false" || s == "no") return false;
      throw ConfigError("config: '" + key + "' expects a boolean, got " + s);
    });
  }
  void str(const std::string& key, std::string& out) {
    read(key, out, [](const std::string& s) { return s; });
  }
  void real_list(const std::string& key, std::vector<double>& out) {
    read(key, out, [](const std::string& s) {
      std::vector<double> v;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) v.push_back(std::stod(item));
      return v;
    });
  }
  void str_list(const std::string& key, std::vector<std::string>& out) {
    read(key, out, [](const std::string& s) {
      std::vector<std::string> v;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) v.push_back(item.substr(b, e - b + 1));
      }
      return v;
    });
  }

  void read_stage(const std::string& section, StageConfig& st) {
    size(section + ".epochs", st.epochs);
    size(section + ".batch", st.batch_size);
    real(section + ".lr", st.lr);
    real(section + ".lr_decay", st.lr_decay_factor);
    size(section + ".lr_period", st.lr_decay_period);
    real(section + ".eps", st.adam_eps);
    size(section + ".T", st.enc.iters);
    real(section + ".alpha", st.enc.alpha);
    real(section + ".lambda", st.enc.lambda);
    real(section + ".c", st.enc.decay);
    boolean(section + ".nonneg", st.enc.nonneg);
    size(section + ".K", st.enc.backprop);
    u64(section + ".init_seed", st.init_seed);
    size(section + ".eval_every", st.eval_every);
  }

  void finish() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : text.values)
      if (!consumed.count(k)) unknown.push_back(k);
    if (!unknown.empty()) {
      std::string msg = "config: unknown key(s):";
      for (const auto& k : unknown) msg += " '" + k + "'";
      throw ConfigError(msg);
    }
  }
};

}  // namespace detail

// Overlays a parsed config file on top of a preset. Every recognized key is
// listed here; anything else is rejected by name.
inline RunConfig apply_config(RunConfig base, const ConfigText& text) {
  detail::ConfigReader r(text);
  r.size("dims.ms", base.m_s);
  r.size("dims.mx", base.m_x);
  r.size("dims.L", base.l);
  r.u64("data.seed", base.data_seed);
  r.size("data.n_stage1", base.n_stage1);
  r.size("data.n_train", base.n_train);
  r.size("data.n_val", base.n_val);
  r.size("data.n_test", base.n_test);
  r.read_stage("stage1", base.stage1);
  r.read_stage("stage2", base.stage2);
  r.read_stage("lista", base.lista);
  r.size("lista.layers", base.lista_layers);
  r.real_list("stage2.lambda_grid", base.lambda_grid);
  r.real_list("stage2.c_grid", base.c_grid);
  r.str_list("eval.methods", base.methods);
  r.size("eval.trials", base.trials);
  r.size("eval.timing_repeats", base.timing_repeats);
  r.real("eval.alpha_safety", base.alpha_safety);
  r.str("eval.fsmbd_csv", base.fsmbd_csv);
  {
    std::string preset;
    r.str("run.cr_preset", preset);
    if (!preset.empty()) {
      if (preset == "paper")
        base.cr_paper_preset = true;
      else if (preset == "none")
        base.cr_paper_preset = false;
      else
        throw ConfigError("config: run.cr_preset must be 'paper' or 'none'");
    }
  }
  r.real_list("run.cr_list", base.cr_list);
  r.real("run.warm_from_cr", base.warm_from_cr);
  r.finish();
  base.validate();
  return base;
}

// Canonical single-string dump of a resolved configuration; manifests embed
// it so a run can be reproduced from its output directory alone.
inline std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  auto stage = [&](const char* name, const StageConfig& st) {
    os << "[" << name << "]\n";
    os << "epochs = " << st.epochs << "\n";
    os << "batch = " << st.batch_size << "\n";
    os << "lr = " << num(st.lr) << "\n";
    os << "lr_decay = " << num(st.lr_decay_factor) << "\n";
    os << "lr_period = " << st.lr_decay_period << "\n";
    os << "eps = " << num(st.adam_eps) << "\n";
    os << "T = " << st.enc.iters << "\n";
    os << "alpha = " << num(st.enc.alpha) << "\n";
    os << "lambda = " << num(st.enc.lambda) << "\n";
    os << "c = " << num(st.enc.decay) << "\n";
    os << "nonneg = " << (st.enc.nonneg ? 1 : 0) << "\n";
    os << "K = " << st.enc.backprop << "\n";
    os << "init_seed = " << st.init_seed << "\n";
    os << "eval_every = " << st.eval_every << "\n";
  };
  os << "[dims]\n";
  os << "ms = " << c.m_s << "\n";
  os << "mx = " << c.m_x << "\n";
  os << "L = " << c.l << "\n";
  os << "[data]\n";
  os << "seed = " << c.data_seed << "\n";
  os << "n_stage1 = " << c.n_stage1 << "\n";
  os << "n_train = " << c.n_train << "\n";
  os << "n_val = " << c.n_val << "\n";
  os << "n_test = " << c.n_test << "\n";
  stage("stage1", c.stage1);
  stage("stage2", c.stage2);
  if (!c.lambda_grid.empty()) {
    os << "lambda_grid =";
    for (double v : c.lambda_grid) os << " " << num(v);
    os << "\n";
  }
  if (!c.c_grid.empty()) {
    os << "c_grid =";
    for (double v : c.c_grid) os << " " << num(v);
    os << "\n";
  }
  stage("lista", c.lista);
  os << "lista_layers = " << c.lista_layers << "\n";
  os << "[eval]\n";
  os << "methods =";
  for (const auto& m : c.methods) os << " " << m;
  os << "\n";
  os << "trials = " << c.trials << "\n";
  os << "timing_repeats = " << c.timing_repeats << "\n";
  os << "alpha_safety = " << num(c.alpha_safety) << "\n";
  if (!c.fsmbd_csv.empty()) os << "fsmbd_csv = " << c.fsmbd_csv << "\n";
  os << "[run]\n";
  os << "cr_preset = " << (c.cr_paper_preset ? "paper" : "none") << "\n";
  if (!c.cr_paper_preset) {
    os << "cr_list =";
    for (double v : c.cr_list) os << " " << num(v);
    os << "\n";
  }
  os << "warm_from_cr = " << num(c.warm_from_cr) << "\n";
  return os.str();
}

}  // namespace lsmbd

#endif  // LSMBD_CONFIG_HPP
