#include "gtc/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>
#include <system_error>

namespace gtc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError(ConfigError::Kind::Malformed, "bad value for '" + key + "': '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(ConfigError::Kind::Malformed, "bad boolean for '" + key + "': '" + text + "'");
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

struct Field {
  std::string name;
  std::function<void(RunParams&, const std::string&)> set;
  std::function<std::string(const RunParams&)> get;
};

template <typename T>
Field number_field(std::string name, T RunParams::*member) {
  return Field{name,
               [member, name](RunParams& p, const std::string& v) { p.*member = parse_number<T>(name, v); },
               [member](const RunParams& p) { return format_number(p.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("mpsi", &RunParams::mpsi),
      number_field("mthetamax", &RunParams::mthetamax),
      number_field("ntoroidal", &RunParams::ntoroidal),
      number_field("micell", &RunParams::micell),
      number_field("nradial_domains", &RunParams::nradial_domains),
      number_field("npartdom", &RunParams::npartdom),
      number_field("toroidal_domains", &RunParams::toroidal_domains),
      number_field("nghost", &RunParams::nghost),
      number_field("a_over_rho", &RunParams::a_over_rho),
      number_field("r_inner", &RunParams::r_inner),
      number_field("r_outer", &RunParams::r_outer),
      number_field("aspect_ratio", &RunParams::aspect_ratio),
      number_field("q0", &RunParams::q0),
      number_field("q2", &RunParams::q2),
      number_field("rln", &RunParams::rln),
      number_field("rlt", &RunParams::rlt),
      number_field("tau", &RunParams::tau),
      number_field("weight_noise", &RunParams::weight_noise),
      number_field("dt", &RunParams::dt),
      number_field("nsteps", &RunParams::nsteps),
      number_field("diag_every", &RunParams::diag_every),
      number_field("bin_every", &RunParams::bin_every),
      number_field("seed", &RunParams::seed),
      number_field("workers", &RunParams::workers),
      number_field("jacobi_omega", &RunParams::jacobi_omega),
      number_field("jacobi_tol", &RunParams::jacobi_tol),
      number_field("jacobi_max_iter", &RunParams::jacobi_max_iter),
      Field{"split_push",
            [](RunParams& p, const std::string& v) { p.split_push = parse_bool("split_push", v); },
            [](const RunParams& p) { return std::string(p.split_push ? "true" : "false"); }},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

void invariant(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(ConfigError::Kind::Invariant, message);
}

struct Assignment {
  std::string key;
  std::string value;
};

Assignment split_assignment(std::string_view raw, int line_no) {
  const auto eq = raw.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(ConfigError::Kind::Malformed,
                      "line " + std::to_string(line_no) + ": expected key=value, got '" + std::string(raw) + "'");
  }
  Assignment a{trim(raw.substr(0, eq)), trim(raw.substr(eq + 1))};
  if (a.key.empty() || a.value.empty()) {
    throw ConfigError(ConfigError::Kind::Malformed, "line " + std::to_string(line_no) + ": empty key or value");
  }
  return a;
}

void apply_assignments(RunParams& p, const std::vector<Assignment>& assignments) {
  // size= first so explicit keys override the preset
  for (const auto& a : assignments) {
    if (a.key == "size") p = preset(a.value);
  }
  for (const auto& a : assignments) {
    if (a.key == "size") continue;
    const Field* f = find_field(a.key);
    if (f == nullptr) throw ConfigError(ConfigError::Kind::UnknownKey, "unknown key '" + a.key + "'");
    f->set(p, a.value);
  }
}

}  // namespace

RunParams preset(std::string_view label) {
  RunParams p;
  if (label == "A") {
    p.mpsi = 90, p.mthetamax = 640, p.a_over_rho = 125.0;
  } else if (label == "B") {
    p.mpsi = 180, p.mthetamax = 1280, p.a_over_rho = 250.0;
  } else if (label == "C") {
    p.mpsi = 360, p.mthetamax = 2560, p.a_over_rho = 500.0;
  } else if (label == "D") {
    p.mpsi = 720, p.mthetamax = 5120, p.a_over_rho = 1000.0;
  } else {
    throw ConfigError(ConfigError::Kind::UnknownPreset, "unknown preset '" + std::string(label) + "'");
  }
  p.ntoroidal = 64;
  p.micell = 100;
  return p;
}

void validate(const RunParams& p) {
  invariant(p.mpsi >= 4, "mpsi must be >= 4");
  invariant(p.mthetamax >= 8, "mthetamax must be >= 8");
  invariant(p.mthetamax % 2 == 0, "mthetamax must be even");
  invariant(p.ntoroidal >= 1, "ntoroidal must be >= 1");
  invariant(p.micell >= 1, "micell must be >= 1");
  invariant(p.nradial_domains >= 1 && p.nradial_domains <= p.mpsi + 1, "nradial_domains must be in [1, mpsi+1]");
  invariant(p.npartdom >= 1, "npartdom must be >= 1");
  invariant(p.toroidal_domains >= 0, "toroidal_domains must be >= 0");
  invariant(p.ntoroidal % p.toroidal_ranks() == 0, "toroidal_domains must divide ntoroidal");
  invariant(p.nghost >= 3 && p.nghost <= 8, "nghost must be in [3, 8]");
  invariant(p.a_over_rho > 0.0, "a_over_rho must be positive");
  invariant(p.r_inner > 0.0 && p.r_inner < p.r_outer && p.r_outer <= 1.0, "need 0 < r_inner < r_outer <= 1");
  invariant(p.aspect_ratio > p.r_outer, "aspect_ratio must exceed r_outer");
  invariant(p.tau > 0.0, "tau must be positive");
  invariant(p.weight_noise >= 0.0, "weight_noise must be >= 0");
  invariant(p.dt > 0.0, "dt must be positive");
  invariant(p.nsteps >= 0, "nsteps must be >= 0");
  invariant(p.diag_every >= 1, "diag_every must be >= 1");
  invariant(p.bin_every >= 0, "bin_every must be >= 0");
  invariant(p.workers >= 1, "workers must be >= 1");
  invariant(p.jacobi_omega > 0.0 && p.jacobi_omega <= 1.0, "jacobi_omega must be in (0, 1]");
  invariant(p.jacobi_tol > 0.0, "jacobi_tol must be positive");
  invariant(p.jacobi_max_iter >= 1, "jacobi_max_iter must be >= 1");
}

RunParams parse_config(std::string_view text) {
  std::vector<Assignment> assignments;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    assignments.push_back(split_assignment(body, line_no));
  }
  RunParams p;
  apply_assignments(p, assignments);
  validate(p);
  return p;
}

void apply_overrides(RunParams& p, const std::vector<std::string>& raw) {
  std::vector<Assignment> assignments;
  int n = 0;
  for (const auto& r : raw) assignments.push_back(split_assignment(r, ++n));
  apply_assignments(p, assignments);
  validate(p);
}

std::string serialize_config(const RunParams& p) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.name;
    out += '=';
    out += f.get(p);
    out += '\n';
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.name);
    return k;
  }();
  return keys;
}

}  // namespace gtc
