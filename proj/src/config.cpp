#include "xlmimo/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

namespace xlmimo {

namespace {

struct Value {
  // Scalars are one-element lists; `quoted` marks string literals.
  std::vector<std::string> items;
  bool quoted = false;
  bool list = false;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(ErrorKind::Format, "config line " + std::to_string(line) + ": " + msg);
}

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

std::string parse_atom(const std::string& raw, int line, bool& quoted) {
  const std::string t = trim(raw);
  if (t.empty()) fail(line, "empty value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') fail(line, "unterminated string");
    quoted = true;
    return t.substr(1, t.size() - 2);
  }
  return t;
}

Value parse_value(const std::string& raw, int line) {
  Value v;
  v.line = line;
  const std::string t = trim(raw);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') fail(line, "unterminated list");
    v.list = true;
    const std::string body = trim(t.substr(1, t.size() - 2));
    if (body.empty()) return v;
    std::string cur;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        v.items.push_back(parse_atom(cur, line, v.quoted));
        cur.clear();
      } else {
        cur += c;
      }
    }
    v.items.push_back(parse_atom(cur, line, v.quoted));
    return v;
  }
  v.items.push_back(parse_atom(t, line, v.quoted));
  return v;
}

double to_double(const std::string& s, int line) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(line, "expected a number, got '" + s + "'");
  }
  if (used != s.size()) fail(line, "expected a number, got '" + s + "'");
  return d;
}

long long to_int(const std::string& s, int line) {
  const double d = to_double(s, line);
  const auto i = static_cast<long long>(d);
  if (static_cast<double>(i) != d) fail(line, "expected an integer, got '" + s + "'");
  return i;
}

bool to_bool(const std::string& s, int line) {
  if (s == "true") return true;
  if (s == "false") return false;
  fail(line, "expected true or false, got '" + s + "'");
}

using Setter = std::function<void(const Value&)>;

const std::string& scalar(const Value& v) {
  if (v.list || v.items.size() != 1) fail(v.line, "expected a single value");
  return v.items.front();
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

template <typename T, typename F>
std::string fmt_list(const std::vector<T>& xs, F f) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + f(xs[i]);
  return s + "]";
}

std::map<std::string, Setter> setters(ExperimentConfig& c) {
  std::map<std::string, Setter> m;
  const auto num = [](double& dst) { return [&dst](const Value& v) { dst = to_double(scalar(v), v.line); }; };
  const auto idx = [](Eigen::Index& dst) {
    return [&dst](const Value& v) { dst = static_cast<Eigen::Index>(to_int(scalar(v), v.line)); };
  };
  const auto integer = [](int& dst) {
    return [&dst](const Value& v) { dst = static_cast<int>(to_int(scalar(v), v.line)); };
  };
  const auto flag = [](bool& dst) { return [&dst](const Value& v) { dst = to_bool(scalar(v), v.line); }; };

  m["system.n_t"] = idx(c.system.n_t);
  m["system.m_sub"] = idx(c.system.m_sub);
  m["system.k_sc"] = idx(c.system.k_sc);
  m["system.f_c"] = num(c.system.f_c);
  m["system.f_s"] = num(c.system.f_s);
  m["system.n_rf"] = idx(c.system.n_rf);
  m["system.g_paths"] = idx(c.g_paths);
  m["system.r_min"] = num(c.path_law.r_min);
  m["system.r_max"] = num(c.path_law.r_max);

  m["estimators.lpu"] = [&c](const Value& v) {
    c.estimators = v.items;
    for (const auto& e : c.estimators) {
      if (e != kStdSbl && e != kSblGnn) fail(v.line, "unknown estimator '" + e + "'");
    }
  };
  m["estimators.refinement"] = [&c](const Value& v) {
    c.refinement.clear();
    for (const auto& s : v.items) c.refinement.push_back(to_bool(s, v.line));
  };
  m["estimators.centralized"] = flag(c.centralized);

  m["sbl.max_iter"] = integer(c.std_sbl.iterations);
  m["sbl.tol"] = num(c.std_sbl.tol);
  m["sbl.refresh_noise"] = flag(c.std_sbl.refresh_noise);
  m["sbl.zeta_init"] = num(c.std_sbl.zeta_init);

  m["gnn.layers"] = integer(c.gnn.layers);
  m["gnn.rounds"] = integer(c.gnn.gnn.rounds);
  m["gnn.k_edges"] = idx(c.gnn.gnn.k_edges);
  m["gnn.alpha"] = num(c.gnn.gnn.hyper.alpha);
  m["gnn.beta"] = num(c.gnn.gnn.hyper.beta);
  m["gnn.refresh_noise"] = flag(c.gnn.refresh_noise);
  m["gnn.zeta_init"] = num(c.gnn.zeta_init);
  m["gnn.n_u"] = idx(c.gnn_dims.n_u);
  m["gnn.n_h1"] = idx(c.gnn_dims.n_h1);
  m["gnn.n_h2"] = idx(c.gnn_dims.n_h2);
  m["gnn.checkpoint"] = [&c](const Value& v) { c.checkpoint = scalar(v); };

  m["refine.p01"] = num(c.markov.p01);
  m["refine.p10"] = num(c.markov.p10);
  m["refine.rho"] = [&c](const Value& v) {
    c.markov.p01 = MarkovPrior::from_sparsity(to_double(scalar(v), v.line), c.markov.p10).p01;
  };
  m["refine.a"] = num(c.markov.a);
  m["refine.b"] = num(c.markov.b);
  m["refine.a_bar"] = num(c.markov.a_bar);
  m["refine.b_bar"] = num(c.markov.b_bar);
  m["refine.max_iter"] = integer(c.refine.max_iter);
  m["refine.tol"] = num(c.refine.tol);
  m["refine.exact_pi_out"] = flag(c.refine.exact_pi_out);

  m["sweep.snr_db"] = [&c](const Value& v) {
    c.snr_db.clear();
    for (const auto& s : v.items) c.snr_db.push_back(to_double(s, v.line));
  };
  m["sweep.p_slots"] = [&c](const Value& v) {
    c.p_slots.clear();
    for (const auto& s : v.items) c.p_slots.push_back(static_cast<Eigen::Index>(to_int(s, v.line)));
  };
  m["sweep.trials"] = integer(c.trials);

  m["train.epochs"] = integer(c.train.epochs);
  m["train.batch_size"] = integer(c.train.batch_size);
  m["train.lr"] = num(c.train.lr);
  m["train.samples"] = integer(c.train_samples);
  m["train.snr_min"] = num(c.train_snr_min);
  m["train.snr_max"] = num(c.train_snr_max);

  m["run.seed"] = [&c](const Value& v) { c.seed = static_cast<std::uint64_t>(to_int(scalar(v), v.line)); };
  m["run.parallel"] = flag(c.parallel_lpus);
  return m;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  // p01 derives from rho and p10, so "rho" has to be applied after "p10" whatever the file order.
  auto table = setters(cfg);
  std::vector<std::pair<std::string, Value>> entries;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(lineno, "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      const std::string prefix = section + ".";
      const bool known = std::any_of(table.begin(), table.end(),
                                     [&](const auto& e) { return e.first.rfind(prefix, 0) == 0; });
      if (!known) fail(lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(lineno, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (section.empty()) fail(lineno, "key '" + key + "' outside of a section");
    entries.emplace_back(section + "." + key, parse_value(t.substr(eq + 1), lineno));
  }
  std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first != "refine.rho"; });
  for (const auto& [key, value] : entries) {
    const auto it = table.find(key);
    if (it == table.end()) fail(value.line, "unknown key '" + key + "'");
    it->second(value);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void ExperimentConfig::validate() const {
  system.validate();
  markov.validate();
  if (g_paths < 1) throw Error(ErrorKind::InvalidParameter, "g_paths must be >= 1");
  if (snr_db.empty() || p_slots.empty()) throw Error(ErrorKind::InvalidParameter, "sweeps must be non-empty");
  if (trials < 1) throw Error(ErrorKind::InvalidParameter, "trials must be >= 1");
  if (std_sbl.iterations < 1 || gnn.layers < 1 || gnn.gnn.rounds < 1) {
    throw Error(ErrorKind::InvalidParameter, "iteration counts must be >= 1");
  }
  if (refinement.empty() && !estimators.empty()) {
    throw Error(ErrorKind::InvalidParameter, "refinement arm list must be non-empty");
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const auto q = [](const std::string& s) { return "\"" + s + "\""; };
  o << "[system]\n"
    << "n_t = " << system.n_t << "\nm_sub = " << system.m_sub << "\nk_sc = " << system.k_sc
    << "\nf_c = " << fmt_double(system.f_c) << "\nf_s = " << fmt_double(system.f_s) << "\nn_rf = " << system.n_rf
    << "\ng_paths = " << g_paths << "\nr_min = " << fmt_double(path_law.r_min)
    << "\nr_max = " << fmt_double(path_law.r_max) << "\n\n";
  o << "[estimators]\nlpu = " << fmt_list(estimators, q) << "\nrefinement = "
    << fmt_list(refinement, [&](bool v) { return b(v); }) << "\ncentralized = " << b(centralized) << "\n\n";
  o << "[sbl]\nmax_iter = " << std_sbl.iterations << "\ntol = " << fmt_double(std_sbl.tol)
    << "\nrefresh_noise = " << b(std_sbl.refresh_noise) << "\nzeta_init = " << fmt_double(std_sbl.zeta_init)
    << "\n\n";
  o << "[gnn]\nlayers = " << gnn.layers << "\nrounds = " << gnn.gnn.rounds << "\nk_edges = " << gnn.gnn.k_edges
    << "\nalpha = " << fmt_double(gnn.gnn.hyper.alpha) << "\nbeta = " << fmt_double(gnn.gnn.hyper.beta)
    << "\nrefresh_noise = " << b(gnn.refresh_noise) << "\nzeta_init = " << fmt_double(gnn.zeta_init)
    << "\nn_u = " << gnn_dims.n_u << "\nn_h1 = " << gnn_dims.n_h1 << "\nn_h2 = " << gnn_dims.n_h2
    << "\ncheckpoint = " << q(checkpoint) << "\n\n";
  o << "[refine]\np01 = " << fmt_double(markov.p01) << "\np10 = " << fmt_double(markov.p10)
    << "\na = " << fmt_double(markov.a) << "\nb = " << fmt_double(markov.b) << "\na_bar = " << fmt_double(markov.a_bar)
    << "\nb_bar = " << fmt_double(markov.b_bar) << "\nmax_iter = " << refine.max_iter
    << "\ntol = " << fmt_double(refine.tol) << "\nexact_pi_out = " << b(refine.exact_pi_out) << "\n\n";
  o << "[sweep]\nsnr_db = " << fmt_list(snr_db, fmt_double)
    << "\np_slots = " << fmt_list(p_slots, [](Eigen::Index v) { return std::to_string(v); })
    << "\ntrials = " << trials << "\n\n";
  o << "[train]\nepochs = " << train.epochs << "\nbatch_size = " << train.batch_size
    << "\nlr = " << fmt_double(train.lr) << "\nsamples = " << train_samples
    << "\nsnr_min = " << fmt_double(train_snr_min) << "\nsnr_max = " << fmt_double(train_snr_max) << "\n\n";
  o << "[run]\nseed = " << seed << "\nparallel = " << b(parallel_lpus) << "\n";
  return o.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace xlmimo
