#include "tem/calibration_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "tem/errors.hpp"
#include "tem/format.hpp"

namespace tem {

namespace {

void put(std::ostream& out, const std::string& key, double v) { out << key << '=' << fmt_double(v) << '\n'; }

void put_log(std::ostream& out, const std::string& key, LogReal v) {
  put(out, "log_" + key, v.log());
  put(out, key, v.value());
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw ConfigError("calibration: bad number for " + key + ": " + text);
  return v;
}

class Keys {
 public:
  explicit Keys(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}
  bool has(const std::string& k) const { return kv_.count(k) > 0; }
  const std::string& str(const std::string& k) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) throw ConfigError("calibration: missing key " + k);
    return it->second;
  }
  double num(const std::string& k) const { return parse_double(k, str(k)); }
  LogReal log_num(const std::string& k) const {
    if (has("log_" + k)) return LogReal::from_log(num("log_" + k));
    return LogReal::from_value(num(k));
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace

void write_calibration(std::ostream& out, const Calibration& c) {
  out << "model=" << c.model << '\n';
  put(out, "sigma", c.sigma);
  put(out, "L", c.consts.L);
  put(out, "K", c.consts.K);
  put(out, "R", c.consts.R);
  put(out, "Lstar", c.growth.Lstar);
  put(out, "ell", c.growth.ell);
  put(out, "drift_at_origin_norm", c.drift_at_origin_norm);
  put(out, "M", c.trunc.M);
  put(out, "theta", c.trunc.theta);
  put(out, "theta_bar", c.trunc.theta_bar);
  put_log(out, "hbar", c.hbar);
  out << "coupling=" << (c.coupling ? "defined" : "undefined") << '\n';
  if (!c.coupling) return;
  const auto& k = *c.coupling;
  put(out, "H", k.H);
  put(out, "m", k.m);
  out << "m_source=" << k.m_source << '\n';
  std::string trace;
  for (double v : k.m_trace) trace += (trace.empty() ? "" : ",") + fmt_double(v);
  out << "m_trace=" << trace << '\n';
  put(out, "r1", k.r1);
  put_log(out, "c1", k.gauss.c1);
  put(out, "c2", k.gauss.c2);
  put(out, "c3", k.gauss.c3);
  put_log(out, "cstar", k.cstar);
  put_log(out, "c", k.c);
  put_log(out, "phi_r1", k.phi_r1);
  put(out, "Phi1", k.Phi1);
  put_log(out, "h1", k.h1);
  put_log(out, "h2", k.h2);
  put_log(out, "h3", k.h3);
}

std::string calibration_text(const Calibration& calib) {
  std::ostringstream s;
  write_calibration(s, calib);
  return s.str();
}

void save_calibration(const std::string& path, const Calibration& calib) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_calibration(out, calib);
}

Calibration read_calibration(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("calibration: expected key=value, got: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const Keys k(std::move(kv));
  Calibration c;
  c.model = k.str("model");
  c.sigma = k.num("sigma");
  c.consts = {k.num("L"), k.num("K"), k.num("R")};
  c.growth = {k.num("Lstar"), k.num("ell")};
  c.drift_at_origin_norm = k.num("drift_at_origin_norm");
  c.trunc = {k.num("M"), k.num("theta"), k.num("theta_bar"), c.growth};
  c.trunc.validate();
  c.hbar = k.log_num("hbar");
  if (k.str("coupling") != "defined") return c;
  CouplingConstants cc;
  cc.H = k.num("H");
  cc.m = k.num("m");
  cc.m_source = k.str("m_source");
  std::stringstream trace(k.str("m_trace"));
  for (std::string item; std::getline(trace, item, ',');) cc.m_trace.push_back(parse_double("m_trace", item));
  cc.r1 = k.num("r1");
  cc.gauss = {k.log_num("c1"), k.num("c2"), k.num("c3")};
  cc.cstar = k.log_num("cstar");
  cc.c = k.log_num("c");
  cc.phi_r1 = k.log_num("phi_r1");
  cc.Phi1 = k.num("Phi1");
  cc.h1 = k.log_num("h1");
  cc.h2 = k.log_num("h2");
  cc.h3 = k.log_num("h3");
  c.coupling = std::move(cc);
  return c;
}

Calibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return read_calibration(in);
}

}  // namespace tem
