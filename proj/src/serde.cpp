#include "drflex/serde.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace drflex {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("invalid number for " + what + ": '" + s + "'");
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::uint64_t fnv1a_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_double(std::uint64_t h, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  return fnv1a_bytes(h, &bits, sizeof bits);
}

std::string gp_digest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double mean,
                      const Eigen::Vector3d& log_len, double log_sf, double log_sn) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) h = fnv1a_double(h, x(i, j));
  for (Eigen::Index i = 0; i < y.size(); ++i) h = fnv1a_double(h, y[i]);
  h = fnv1a_double(h, mean);
  for (int i = 0; i < 3; ++i) h = fnv1a_double(h, log_len[i]);
  h = fnv1a_double(h, log_sf);
  h = fnv1a_double(h, log_sn);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON in " + what);
  return j;
}

}  // namespace

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f << content;
  if (!f) throw ParseError("write failed for " + path);
}

void write_metering_csv(const std::string& path, const MeteringHistory& hist) {
  hist.validate();
  std::ostringstream ss;
  ss << "timestamp,indoor_f,outdoor_f,ac_kw\n";
  for (std::size_t k = 0; k < hist.rows(); ++k)
    ss << fmt17(hist.time_h[k]) << ',' << fmt17(hist.indoor_f[k]) << ','
       << fmt17(hist.outdoor_f[k]) << ',' << fmt17(hist.ac_kw[k]) << '\n';
  write_text_file(path, ss.str());
}

MeteringHistory read_metering_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "timestamp,indoor_f,outdoor_f,ac_kw")
    throw ParseError(path + ": expected header timestamp,indoor_f,outdoor_f,ac_kw");
  MeteringHistory hist;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 4) throw ParseError(path + ": expected 4 fields per row");
    hist.time_h.push_back(parse_double(f[0], "timestamp"));
    hist.indoor_f.push_back(parse_double(f[1], "indoor_f"));
    hist.outdoor_f.push_back(parse_double(f[2], "outdoor_f"));
    hist.ac_kw.push_back(parse_double(f[3], "ac_kw"));
  }
  hist.validate();
  return hist;
}

void write_exogenous_csv(const std::string& path, const ExogenousSeries& exo) {
  const int T = static_cast<int>(exo.price.size());
  exo.validate(T);
  std::ostringstream ss;
  ss << "step,outdoor_f,price\n";
  for (int t = 0; t <= T; ++t) {
    ss << t << ',' << fmt17(exo.s_out[t]) << ',';
    if (t > 0) ss << fmt17(exo.price[t - 1]);
    ss << '\n';
  }
  write_text_file(path, ss.str());
}

ExogenousSeries read_exogenous_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "step,outdoor_f,price")
    throw ParseError(path + ": expected header step,outdoor_f,price");
  ExogenousSeries exo;
  int expect = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 3) throw ParseError(path + ": expected 3 fields per row");
    if (static_cast<int>(parse_double(f[0], "step")) != expect)
      throw ParseError(path + ": steps must be consecutive from 0");
    exo.s_out.push_back(parse_double(f[1], "outdoor_f"));
    if (expect == 0) {
      if (!f[2].empty())
        throw ParseError(path + ": step-0 row must have an empty price field");
    } else {
      exo.price.push_back(parse_double(f[2], "price"));
    }
    ++expect;
  }
  exo.validate(static_cast<int>(exo.price.size()));
  return exo;
}

void save_thermal_model(const std::string& path, const ThermalModel& m) {
  json j;
  if (std::holds_alternative<LinearThermal>(m)) {
    const auto& lin = std::get<LinearThermal>(m);
    j["kind"] = "linear";
    j["kappa"] = lin.kappa;
    j["eta"] = lin.eta;
  } else {
    const auto& gp = *std::get<std::shared_ptr<const GpThermal>>(m);
    j["kind"] = "gp";
    j["mean"] = gp.prior_mean();
    j["log_len"] = {gp.log_len()[0], gp.log_len()[1], gp.log_len()[2]};
    j["log_sf"] = gp.log_sf();
    j["log_sn"] = gp.log_sn();
    json xs = json::array();
    for (Eigen::Index i = 0; i < gp.x().rows(); ++i)
      xs.push_back({gp.x()(i, 0), gp.x()(i, 1), gp.x()(i, 2)});
    j["x"] = std::move(xs);
    j["y"] = std::vector<double>(gp.y().data(), gp.y().data() + gp.y().size());
    j["digest"] =
        gp_digest(gp.x(), gp.y(), gp.prior_mean(), gp.log_len(), gp.log_sf(), gp.log_sn());
  }
  write_text_file(path, j.dump(2) + "\n");
}

ThermalModel load_thermal_model(const std::string& path) {
  const json j = parse_json(read_text_file(path), path);
  if (!j.is_object() || !j.contains("kind"))
    throw ParseError(path + ": model document needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    LinearThermal lin;
    lin.kappa = j.at("kappa").get<double>();
    lin.eta = j.at("eta").get<double>();
    lin.validate();
    return lin;
  }
  if (kind != "gp") throw ParseError(path + ": unknown model kind '" + kind + "'");
  const auto& xs = j.at("x");
  const auto& ys = j.at("y");
  if (!xs.is_array() || !ys.is_array() || xs.size() != ys.size() || xs.empty())
    throw ParseError(path + ": gp training data malformed");
  Eigen::MatrixXd x(xs.size(), 3);
  Eigen::VectorXd y(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i].is_array() || xs[i].size() != 3)
      throw ParseError(path + ": gp inputs must be triples");
    for (int c = 0; c < 3; ++c) x(static_cast<Eigen::Index>(i), c) = xs[i][c].get<double>();
    y[static_cast<Eigen::Index>(i)] = ys[i].get<double>();
  }
  const double mean = j.at("mean").get<double>();
  Eigen::Vector3d log_len{j.at("log_len")[0].get<double>(),
                          j.at("log_len")[1].get<double>(),
                          j.at("log_len")[2].get<double>()};
  const double log_sf = j.at("log_sf").get<double>();
  const double log_sn = j.at("log_sn").get<double>();
  const std::string digest = j.at("digest").get<std::string>();
  if (digest != gp_digest(x, y, mean, log_len, log_sf, log_sn))
    throw ParseError(path + ": gp training-data digest mismatch");
  auto gp = std::make_shared<GpThermal>(
      GpThermal::from_params(std::move(x), std::move(y), mean, log_len, log_sf, log_sn));
  return std::shared_ptr<const GpThermal>(gp);
}

void save_population(const std::string& path, const PopulationFile& pop) {
  json j;
  j["scaling"] = {{"s_scale", pop.scaling.s_scale},       {"s_off", pop.scaling.s_off},
                  {"d_scale", pop.scaling.d_scale},       {"d_off", pop.scaling.d_off},
                  {"r_scale", pop.scaling.r_scale},       {"r_off", pop.scaling.r_off},
                  {"s_out_scale", pop.scaling.s_out_scale}, {"s_out_off", pop.scaling.s_out_off},
                  {"price_scale", pop.scaling.price_scale}, {"price_off", pop.scaling.price_off}};
  json cs = json::array();
  for (const auto& c : pop.customers) {
    json e;
    e["id"] = c.id;
    e["theta"] = std::vector<double>(c.theta_star.theta.data(), c.theta_star.theta.data() + 6);
    e["kappa"] = c.thermal.kappa;
    e["eta"] = c.thermal.eta;
    cs.push_back(std::move(e));
  }
  j["customers"] = std::move(cs);
  write_text_file(path, j.dump(2) + "\n");
}

PopulationFile load_population(const std::string& path) {
  const json j = parse_json(read_text_file(path), path);
  PopulationFile pop;
  if (j.contains("scaling")) {
    const auto& s = j.at("scaling");
    pop.scaling.s_scale = s.at("s_scale").get<double>();
    pop.scaling.s_off = s.at("s_off").get<double>();
    pop.scaling.d_scale = s.at("d_scale").get<double>();
    pop.scaling.d_off = s.at("d_off").get<double>();
    pop.scaling.r_scale = s.at("r_scale").get<double>();
    pop.scaling.r_off = s.at("r_off").get<double>();
    pop.scaling.s_out_scale = s.at("s_out_scale").get<double>();
    pop.scaling.s_out_off = s.at("s_out_off").get<double>();
    pop.scaling.price_scale = s.at("price_scale").get<double>();
    pop.scaling.price_off = s.at("price_off").get<double>();
  }
  pop.scaling.validate();
  if (!j.contains("customers") || !j.at("customers").is_array())
    throw ParseError(path + ": population document needs a 'customers' array");
  for (const auto& e : j.at("customers")) {
    CustomerSpec c;
    c.id = e.at("id").get<int>();
    const auto& th = e.at("theta");
    if (!th.is_array() || th.size() != 6)
      throw ParseError(path + ": customer theta must have 6 entries");
    for (int i = 0; i < 6; ++i) c.theta_star.theta[i] = th[i].get<double>();
    c.theta_star.validate();
    c.thermal.kappa = e.at("kappa").get<double>();
    c.thermal.eta = e.at("eta").get<double>();
    c.thermal.validate();
    pop.customers.push_back(c);
  }
  return pop;
}

void save_event_config(const std::string& path, const EventConfig& cfg) {
  cfg.validate();
  json j;
  j["T"] = cfg.T;
  j["dt"] = cfg.dt;
  j["u_max"] = cfg.u_max;
  j["du_max"] = cfg.du_max;
  j["s_set"] = cfg.s_set;
  j["rho"] = cfg.rho;
  j["r0"] = cfg.r0;
  j["r1"] = cfg.r1;
  j["r2"] = cfg.r2;
  j["mode"] = cfg.mode == Mode::soc1 ? "soc1" : "soc2";
  j["L"] = cfg.L;
  if (cfg.auto_u_init())
    j["u_init"] = nullptr;
  else
    j["u_init"] = cfg.u_init;
  j["heating"] = cfg.heating;
  write_text_file(path, j.dump(2) + "\n");
}

EventConfig event_config_from_json_text(const std::string& text) {
  const json j = parse_json(text, "event config");
  EventConfig cfg;
  if (!j.is_object()) throw ParseError("event config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    if (key == "T") cfg.T = val.get<int>();
    else if (key == "dt") cfg.dt = val.get<double>();
    else if (key == "u_max") cfg.u_max = val.get<double>();
    else if (key == "du_max") cfg.du_max = val.get<double>();
    else if (key == "s_set") cfg.s_set = val.get<double>();
    else if (key == "rho") cfg.rho = val.get<double>();
    else if (key == "r0") cfg.r0 = val.get<double>();
    else if (key == "r1") cfg.r1 = val.get<double>();
    else if (key == "r2") cfg.r2 = val.get<double>();
    else if (key == "mode") {
      const std::string m = val.get<std::string>();
      if (m == "soc1") cfg.mode = Mode::soc1;
      else if (m == "soc2") cfg.mode = Mode::soc2;
      else throw ParseError("event config: unknown mode '" + m + "'");
    } else if (key == "L") {
      cfg.L = val.get<std::vector<double>>();
    } else if (key == "u_init") {
      if (val.is_null()) cfg.u_init = std::numeric_limits<double>::quiet_NaN();
      else cfg.u_init = val.get<double>();
    } else if (key == "heating") {
      cfg.heating = val.get<bool>();
    } else {
      throw ParseError("event config: unknown key '" + key + "'");
    }
  }
  // An absent L in soc2 mode is allowed here: consumers fill the tracking
  // target themselves (per-event in the campaign, n per step in the CLI).
  if (cfg.mode == Mode::soc2 && cfg.L.empty()) {
    EventConfig probe = cfg;
    probe.L.assign(static_cast<std::size_t>(probe.T), 0.0);
    probe.validate();
  } else {
    cfg.validate();
  }
  return cfg;
}

EventConfig load_event_config(const std::string& path) {
  try {
    return event_config_from_json_text(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace drflex
