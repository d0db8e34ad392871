#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "superlase/errors.hpp"

namespace superlase::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  const auto s = trim(text);
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw PreconditionError(what + ": '" + s + "' is not a finite number");
  return v;
}

template <class Int>
Int parse_integer(const std::string& text, const std::string& what) {
  const auto s = trim(text);
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw PreconditionError(what + ": '" + s + "' is not an integer in range");
  return v;
}

double as_double(const Json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_double(v.get<std::string>(), what);
  throw PreconditionError(what + ": expected a number");
}

template <class Int>
Int as_integer(const Json& v, const std::string& what) {
  if (v.is_number_integer()) {
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
      const auto s = v.get<std::int64_t>();
      if (s < 0) throw PreconditionError(what + ": must be non-negative");
      return static_cast<Int>(s);
    } else {
      const auto s = v.get<std::int64_t>();
      if (s < std::numeric_limits<Int>::min() || s > std::numeric_limits<Int>::max())
        throw PreconditionError(what + ": out of range");
      return static_cast<Int>(s);
    }
  }
  if (v.is_string()) return parse_integer<Int>(v.get<std::string>(), what);
  throw PreconditionError(what + ": expected an integer");
}

bool as_bool(const Json& v, const std::string& what) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    auto s = trim(v.get<std::string>());
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  }
  throw PreconditionError(what + ": expected true or false");
}

std::string as_string(const Json& v, const std::string& what) {
  if (v.is_string()) return v.get<std::string>();
  throw PreconditionError(what + ": expected a string");
}

std::vector<double> as_list(const Json& v, const std::string& what) {
  if (v.is_string()) {
    try {
      return parse_value_list(v.get<std::string>());
    } catch (const PreconditionError& e) {
      throw PreconditionError(what + ": " + e.what());
    }
  }
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_double(x, what));
    return out;
  }
  throw PreconditionError(what + ": expected a list of numbers");
}

Json list_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const Json&, const std::string&)> read;
  std::function<Json(const RunConfig&)> write;
};

template <class Get>
Field real_field(const char* key, Get get) {
  return {key, [get](RunConfig& c, const Json& v, const std::string& w) { get(c) = as_double(v, w); },
          [get](const RunConfig& c) { return Json(get(c)); }};
}

template <class Int, class Get>
Field int_field(const char* key, Get get) {
  return {key, [get](RunConfig& c, const Json& v, const std::string& w) { get(c) = as_integer<Int>(v, w); },
          [get](const RunConfig& c) { return Json(get(c)); }};
}

template <class Get>
Field bool_field(const char* key, Get get) {
  return {key, [get](RunConfig& c, const Json& v, const std::string& w) { get(c) = as_bool(v, w); },
          [get](const RunConfig& c) { return Json(get(c)); }};
}

using Schema = std::vector<std::pair<const char*, std::vector<Field>>>;

const Schema& schema() {
  static const Schema s = [] {
    Schema out;
    out.push_back({"rates",
                   {real_field("kappa", [](auto& c) -> auto& { return c.model.rates.kappa; }),
                    real_field("gamma", [](auto& c) -> auto& { return c.model.rates.gamma; }),
                    real_field("pump", [](auto& c) -> auto& { return c.model.rates.pump; }),
                    real_field("xi", [](auto& c) -> auto& { return c.model.rates.cav_dephasing; }),
                    real_field("nu", [](auto& c) -> auto& { return c.model.rates.atom_dephasing; })}});

    std::vector<Field> ens;
    ens.push_back({"mode",
                   [](RunConfig& c, const Json& v, const std::string& w) {
                     c.model.ensemble.mode = ensemble_mode_from_string(trim(as_string(v, w)));
                   },
                   [](const RunConfig& c) { return Json(to_string(c.model.ensemble.mode)); }});
    ens.push_back(int_field<int>("clusters", [](auto& c) -> auto& { return c.model.ensemble.clusters; }));
    ens.push_back(
        int_field<int>("coupling_clusters", [](auto& c) -> auto& { return c.model.ensemble.coupling_clusters; }));
    ens.push_back(
        int_field<std::int64_t>("atoms", [](auto& c) -> auto& { return c.model.ensemble.total_atoms; }));
    ens.push_back(real_field("sigma", [](auto& c) -> auto& { return c.model.ensemble.sigma; }));
    ens.push_back(real_field("span", [](auto& c) -> auto& { return c.model.ensemble.span; }));
    ens.push_back(real_field("coupling", [](auto& c) -> auto& { return c.model.ensemble.coupling; }));
    ens.push_back(real_field("g0", [](auto& c) -> auto& { return c.model.ensemble.g0; }));
    ens.push_back(real_field("imbalance_at", [](auto& c) -> auto& { return c.model.ensemble.imbalance_at; }));
    ens.push_back(
        real_field("imbalance_fraction", [](auto& c) -> auto& { return c.model.ensemble.imbalance_fraction; }));
    ens.push_back(real_field("fluctuation", [](auto& c) -> auto& { return c.model.ensemble.fluctuation; }));
    ens.push_back(int_field<std::uint64_t>("seed", [](auto& c) -> auto& { return c.model.ensemble.seed; }));
    ens.push_back({"explicit",
                   [](RunConfig& c, const Json& v, const std::string& w) {
                     auto& out = c.model.ensemble.explicit_clusters;
                     out.clear();
                     if (v.is_string()) {
                       try {
                         out = parse_cluster_list(v.get<std::string>());
                       } catch (const PreconditionError& e) {
                         throw PreconditionError(w + ": " + e.what());
                       }
                       return;
                     }
                     if (!v.is_array()) throw PreconditionError(w + ": expected a list of clusters");
                     for (const auto& x : v) {
                       if (!x.is_object() || x.size() != 3 || !x.contains("detuning") || !x.contains("coupling") ||
                           !x.contains("population"))
                         throw PreconditionError(w + ": clusters need exactly detuning, coupling and population");
                       out.push_back(Cluster{as_double(x["detuning"], w), as_double(x["coupling"], w),
                                             as_integer<std::int64_t>(x["population"], w)});
                     }
                   },
                   [](const RunConfig& c) {
                     Json a = Json::array();
                     for (const auto& cl : c.model.ensemble.explicit_clusters)
                       a.push_back(Json{{"detuning", cl.detuning}, {"coupling", cl.coupling}, {"population", cl.population}});
                     return a;
                   }});
    out.push_back({"ensemble", std::move(ens)});

    out.push_back(
        {"solver",
         {real_field("rel_tol", [](auto& c) -> auto& { return c.model.solver.rel_tol; }),
          real_field("abs_tol", [](auto& c) -> auto& { return c.model.solver.abs_tol; }),
          real_field("max_step", [](auto& c) -> auto& { return c.model.solver.max_step; }),
          real_field("max_time", [](auto& c) -> auto& { return c.model.solver.max_time; }),
          real_field("stall_window", [](auto& c) -> auto& { return c.model.solver.stall_window; }),
          real_field("stall_threshold", [](auto& c) -> auto& { return c.model.solver.stall_threshold; }),
          real_field("initial_step", [](auto& c) -> auto& { return c.model.solver.initial_step; }),
          real_field("fixed_step", [](auto& c) -> auto& { return c.model.solver.fixed_step; }),
          bool_field("newton_polish", [](auto& c) -> auto& { return c.model.solver.newton_polish; }),
          real_field("newton_trigger", [](auto& c) -> auto& { return c.model.solver.newton_trigger; }),
          real_field("newton_retry_interval",
                     [](auto& c) -> auto& { return c.model.solver.newton_retry_interval; }),
          int_field<int>("newton_max_iterations",
                         [](auto& c) -> auto& { return c.model.solver.newton_max_iterations; })}});

    out.push_back({"grid",
                   {int_field<std::size_t>("points", [](auto& c) -> auto& { return c.model.grid.points; }),
                    real_field("half_width", [](auto& c) -> auto& { return c.model.grid.half_width; }),
                    bool_field("refine", [](auto& c) -> auto& { return c.model.grid.refine; }),
                    real_field("prominence", [](auto& c) -> auto& { return c.model.grid.prominence_frac; }),
                    bool_field("auto_extend", [](auto& c) -> auto& { return c.model.grid.auto_extend; })}});

    std::vector<Field> sw;
    sw.push_back({"axes",
                  [](RunConfig& c, const Json& v, const std::string& w) {
                    auto& axes = c.sweep.axes;
                    axes.clear();
                    if (v.is_string()) {
                      try {
                        axes = parse_axes(v.get<std::string>());
                      } catch (const PreconditionError& e) {
                        throw PreconditionError(w + ": " + e.what());
                      }
                      return;
                    }
                    if (!v.is_array()) throw PreconditionError(w + ": expected a list of axes");
                    for (const auto& x : v) {
                      if (!x.is_object() || x.size() != 2 || !x.contains("axis") || !x.contains("values"))
                        throw PreconditionError(w + ": axes need exactly 'axis' and 'values'");
                      axes.push_back(AxisSpec{sweep_axis_from_string(as_string(x["axis"], w)), as_list(x["values"], w)});
                    }
                  },
                  [](const RunConfig& c) {
                    Json a = Json::array();
                    for (const auto& ax : c.sweep.axes) a.push_back(Json{{"axis", to_string(ax.axis)}, {"values", list_json(ax.values)}});
                    return a;
                  }});
    sw.push_back(int_field<std::size_t>("max_points", [](auto& c) -> auto& { return c.sweep.max_points; }));
    out.push_back({"sweep", std::move(sw)});

    out.push_back({"critical_pump",
                   {real_field("r_min", [](auto& c) -> auto& { return c.critical_pump.r_min; }),
                    real_field("r_max", [](auto& c) -> auto& { return c.critical_pump.r_max; }),
                    real_field("tolerance", [](auto& c) -> auto& { return c.critical_pump.tolerance; }),
                    int_field<int>("prescan_points", [](auto& c) -> auto& { return c.critical_pump.prescan_points; })}});

    out.push_back({"crosscorr",
                   {{"pumps",
                     [](RunConfig& c, const Json& v, const std::string& w) { c.crosscorr.pumps = as_list(v, w); },
                     [](const RunConfig& c) { return list_json(c.crosscorr.pumps); }}}});

    out.push_back({"output",
                   {{"dir", [](RunConfig& c, const Json& v, const std::string& w) { c.output.dir = as_string(v, w); },
                     [](const RunConfig& c) { return Json(c.output.dir); }},
                    bool_field("normalize", [](auto& c) -> auto& { return c.output.normalize; })}});
    return out;
  }();
  return s;
}

const std::vector<Field>* find_section(const std::string& name) {
  for (const auto& [sec, fields] : schema())
    if (name == sec) return &fields;
  return nullptr;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Json ini_to_tree(const std::string& text, const std::string& path) {
  // '#' comments are accepted alongside the native ';'.
  std::istringstream lines(text);
  std::ostringstream cleaned;
  for (std::string line; std::getline(lines, line);) {
    const auto t = trim(line);
    cleaned << (t.starts_with('#') ? std::string() : line) << '\n';
  }
  boost::property_tree::ptree pt;
  std::istringstream in(cleaned.str());
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw PreconditionError("config file '" + path + "' line " + std::to_string(e.line()) + ": " + e.message());
  }
  Json tree = Json::object();
  for (const auto& [section, body] : pt) {
    if (body.empty()) throw PreconditionError("config key '" + section + "' must sit inside a [section]");
    Json& sec = tree[section];
    sec = Json::object();
    for (const auto& [key, value] : body) sec[key] = value.get_value<std::string>();
  }
  return tree;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  for (const auto& a : sweep.axes)
    for (double v : a.values)
      if (!std::isfinite(v)) throw PreconditionError("sweep values must be finite");
  if (!(critical_pump.r_min > 0.0 && critical_pump.r_max > critical_pump.r_min))
    throw PreconditionError("critical_pump needs 0 < r_min < r_max");
  if (!(critical_pump.tolerance > 0.0)) throw PreconditionError("critical_pump.tolerance must be positive");
  if (critical_pump.prescan_points < 2) throw PreconditionError("critical_pump.prescan_points must be >= 2");
  for (std::size_t i = 1; i < crosscorr.pumps.size(); ++i)
    if (!(crosscorr.pumps[i] > crosscorr.pumps[i - 1])) throw PreconditionError("crosscorr.pumps must be increasing");
  if (output.dir.empty()) throw PreconditionError("output.dir must not be empty");
}

Json load_config_tree(const std::string& path) {
  const auto text = read_file(path);
  const auto head = trim(text.substr(0, std::min<std::size_t>(text.size(), 64)));
  if (ends_with(path, ".json") || head.starts_with('{')) {
    try {
      auto tree = Json::parse(text);
      if (!tree.is_object()) throw PreconditionError("config file '" + path + "' must hold a JSON object");
      return tree;
    } catch (const Json::parse_error& e) {
      throw PreconditionError("config file '" + path + "': " + e.what());
    }
  }
  return ini_to_tree(text, path);
}

void apply_override(Json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw PreconditionError("override '" + assignment + "' must look like section.key=value");
  const auto section = trim(assignment.substr(0, dot));
  const auto key = trim(assignment.substr(dot + 1, eq - dot - 1));
  if (section.empty() || key.empty()) throw PreconditionError("override '" + assignment + "' has an empty name");
  tree[section][key] = assignment.substr(eq + 1);
}

RunConfig from_tree(const Json& tree) {
  if (!tree.is_object()) throw PreconditionError("config must be a set of sections");
  RunConfig c;
  for (const auto& [section, body] : tree.items()) {
    const auto* fields = find_section(section);
    if (!fields) throw PreconditionError("unknown config section '" + section + "'");
    if (!body.is_object()) throw PreconditionError("config section '" + section + "' must hold key/value pairs");
    for (const auto& [key, value] : body.items()) {
      const auto it = std::find_if(fields->begin(), fields->end(), [&](const Field& f) { return key == f.key; });
      if (it == fields->end()) throw PreconditionError("unknown config key '" + section + "." + key + "'");
      it->read(c, value, section + "." + key);
    }
  }
  return c;
}

Json to_tree(const RunConfig& c) {
  Json tree = Json::object();
  for (const auto& [section, fields] : schema()) {
    Json& sec = tree[section];
    sec = Json::object();
    for (const auto& f : fields) sec[f.key] = f.write(c);
  }
  return tree;
}

std::vector<double> parse_value_list(const std::string& text) {
  const auto s = trim(text);
  if (s.empty()) return {};
  for (const char* fn : {"linspace", "logspace"}) {
    const std::string name = fn;
    if (!s.starts_with(name + "(")) continue;
    if (!s.ends_with(")")) throw PreconditionError("'" + s + "': missing ')'");
    const auto args = split(s.substr(name.size() + 1, s.size() - name.size() - 2), ',');
    if (args.size() != 3) throw PreconditionError("'" + s + "': expects (first, last, count)");
    const double a = parse_double(args[0], name);
    const double b = parse_double(args[1], name);
    const auto n = parse_integer<std::size_t>(args[2], name);
    if (n < 1) throw PreconditionError("'" + s + "': count must be >= 1");
    if (name == "logspace" && !(a > 0.0 && b > 0.0))
      throw PreconditionError("'" + s + "': logspace endpoints must be positive");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      out[i] = name == "linspace" ? a + (b - a) * f : a * std::pow(b / a, f);
    }
    out.front() = a;
    out.back() = n == 1 ? a : b;
    return out;
  }
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_double(item, "list"));
  return out;
}

std::vector<AxisSpec> parse_axes(const std::string& text) {
  std::vector<AxisSpec> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ';')) {
    if (part.empty()) continue;
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw PreconditionError("axis '" + part + "' must look like NAME: values");
    out.push_back(AxisSpec{sweep_axis_from_string(trim(part.substr(0, colon))), parse_value_list(part.substr(colon + 1))});
  }
  return out;
}

std::vector<Cluster> parse_cluster_list(const std::string& text) {
  std::vector<Cluster> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ';')) {
    if (part.empty()) continue;
    const auto f = split(part, ':');
    if (f.size() != 3) throw PreconditionError("cluster '" + part + "' must look like detuning:coupling:population");
    out.push_back(Cluster{parse_double(f[0], "detuning"), parse_double(f[1], "coupling"),
                          parse_integer<std::int64_t>(f[2], "population")});
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace superlase::cli
