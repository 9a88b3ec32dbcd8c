#include "nlmc/cli.hpp"
#include "nlmc/error.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace nlmc::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

const char* name_of(bool b) { return b ? "true" : "false"; }
const char* name_of(GeometrySource s) { return s == GeometrySource::generate ? "generate" : "file"; }
const char* name_of(PermField f) {
  return f == PermField::uniform ? "uniform" : f == PermField::lognormal ? "lognormal" : "file";
}
const char* name_of(geometry::FractureMode m) { return m == geometry::FractureMode::dfm ? "dfm" : "efm"; }
const char* name_of(upscaling::MassMode m) { return m == upscaling::MassMode::galerkin ? "galerkin" : "diagonal"; }
const char* name_of(upscaling::RhsMode m) { return m == upscaling::RhsMode::galerkin ? "galerkin" : "direct"; }
const char* name_of(fvm::Continuum c) { return c == fvm::Continuum::matrix ? "matrix" : "fracture"; }

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

/// Parses one `key = value` line within a section, reporting errors with
/// the file position.
class Reader {
 public:
  Reader(std::string source, int line) : source_(std::move(source)), line_(line) {}

  [[noreturn]] void fail(const std::string& message) const {
    throw InputError(fmt::format("{}:{}: {}", source_, line_, message));
  }

  double number(const std::string& v) const {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) fail(fmt::format("'{}' is not a number", v));
    return out;
  }

  long long integer(const std::string& v) const {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) fail(fmt::format("'{}' is not an integer", v));
    return out;
  }

  int small_int(const std::string& v) const {
    const long long x = integer(v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      fail(fmt::format("'{}' is out of range", v));
    }
    return static_cast<int>(x);
  }

  std::uint64_t seed(const std::string& v) const {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) fail(fmt::format("'{}' is not a nonnegative integer", v));
    return out;
  }

  bool boolean(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(fmt::format("'{}' is not true/false", v));
  }

  template <typename E>
  E choice(const std::string& v, std::initializer_list<std::pair<const char*, E>> options) const {
    std::string names;
    for (const auto& [name, value] : options) {
      if (v == name) return value;
      names += (names.empty() ? "" : "|") + std::string(name);
    }
    fail(fmt::format("'{}' is not one of {}", v, names));
  }

  std::vector<int> int_list(const std::string& v, const std::string& what) const {
    try {
      return parse_int_list(v, what);
    } catch (const InputError& e) {
      fail(e.what());
    }
  }

  geometry::Rect rect(const std::vector<std::string>& w, std::size_t first) const {
    return {number(w[first]), number(w[first + 1]), number(w[first + 2]), number(w[first + 3])};
  }

 private:
  std::string source_;
  int line_;
};

void assign(ExperimentConfig& c, const std::string& section, const std::string& key, const std::string& value,
            const Reader& r) {
  auto unknown = [&] { r.fail(fmt::format("unknown key '{}' in [{}]", key, section)); };
  if (section == "geometry") {
    auto& g = c.geometry;
    if (key == "source") {
      g.source = r.choice<GeometrySource>(value, {{"generate", GeometrySource::generate}, {"file", GeometrySource::file}});
    } else if (key == "mesh_file") {
      g.mesh_file = value;
    } else if (key == "domain") {
      const auto w = words(value);
      if (w.size() != 4) r.fail("domain needs 'x0 y0 x1 y1'");
      g.domain = r.rect(w, 0);
    } else if (key == "nx") {
      g.nx = r.small_int(value);
    } else if (key == "ny") {
      g.ny = r.small_int(value);
    } else if (key == "fractures") {
      g.fractures = r.small_int(value);
    } else if (key == "length_min") {
      g.length_min = r.number(value);
    } else if (key == "length_max") {
      g.length_max = r.number(value);
    } else if (key == "seed") {
      g.seed = r.seed(value);
    } else if (key == "anchors") {
      g.anchors = r.boolean(value);
    } else if (key == "perm_field") {
      g.perm_field = r.choice<PermField>(
          value, {{"uniform", PermField::uniform}, {"lognormal", PermField::lognormal}, {"file", PermField::file}});
    } else if (key == "perm_file") {
      g.perm_file = value;
    } else if (key == "perm_seed") {
      g.perm_seed = r.seed(value);
    } else if (key == "perm_log10_std") {
      g.perm_log10_std = r.number(value);
    } else if (key == "perm_correlation") {
      g.perm_correlation = r.number(value);
    } else {
      unknown();
    }
  } else if (section == "model") {
    if (key != "type") unknown();
    c.model = r.choice<geometry::FractureMode>(value,
                                               {{"dfm", geometry::FractureMode::dfm}, {"efm", geometry::FractureMode::efm}});
  } else if (section == "params") {
    auto& p = c.params;
    if (key == "k_m") {
      p.k_m = r.number(value);
    } else if (key == "k_f") {
      p.k_f = r.number(value);
    } else if (key == "k_f_overrides") {
      p.k_f_overrides.clear();
      if (value != "none") {
        for (const auto& item : split(value, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) r.fail(fmt::format("override '{}' needs 'group:k_f'", item));
          p.k_f_overrides.emplace_back(r.small_int(trim(item.substr(0, colon))), r.number(trim(item.substr(colon + 1))));
        }
      }
    } else if (key == "c_m") {
      p.c_m = r.number(value);
    } else if (key == "c_f") {
      p.c_f = r.number(value);
    } else if (key == "mu") {
      p.mu = r.number(value);
    } else if (key == "thickness") {
      p.thickness = r.number(value);
    } else if (key == "sigma") {
      p.sigma = value == "auto" ? std::nullopt : std::optional<double>(r.number(value));
    } else if (key == "sigma_multiplier") {
      p.sigma_multiplier = r.number(value);
    } else {
      unknown();
    }
  } else if (section == "coarse") {
    auto& k = c.coarse;
    if (key == "nx") {
      k.nx = r.small_int(value);
    } else if (key == "ny") {
      k.ny = r.small_int(value);
    } else if (key == "layers") {
      k.layers = r.int_list(value, "layers");
    } else if (key == "mass") {
      k.mass = r.choice<upscaling::MassMode>(
          value, {{"galerkin", upscaling::MassMode::galerkin}, {"diagonal", upscaling::MassMode::diagonal}});
    } else if (key == "rhs") {
      k.rhs = r.choice<upscaling::RhsMode>(value,
                                           {{"galerkin", upscaling::RhsMode::galerkin}, {"direct", upscaling::RhsMode::direct}});
    } else if (key == "partition_of_unity") {
      k.partition_of_unity = r.boolean(value);
    } else if (key == "threads") {
      k.threads = r.small_int(value);
    } else {
      unknown();
    }
  } else if (section == "time") {
    auto& t = c.time;
    if (key == "t_max") {
      t.t_max = r.number(value);
    } else if (key == "steps") {
      t.steps = r.small_int(value);
    } else if (key == "p0") {
      t.p0 = r.number(value);
    } else if (key == "snapshots") {
      t.snapshots = r.int_list(value, "snapshots");
    } else {
      unknown();
    }
  } else if (section == "sources") {
    if (key == "region") {
      const auto w = words(value);
      if (w.size() != 6) r.fail("region needs '<matrix|fracture> x0 y0 x1 y1 rate'");
      fvm::SourceRegion s;
      s.target = r.choice<fvm::Continuum>(w[0], {{"matrix", fvm::Continuum::matrix}, {"fracture", fvm::Continuum::fracture}});
      s.region = r.rect(w, 1);
      s.rate = r.number(w[5]);
      c.sources.regions.push_back(s);
    } else if (key == "balance") {
      c.sources.balance = r.boolean(value);
    } else {
      unknown();
    }
  } else if (section == "output") {
    auto& o = c.output;
    if (key == "dir") {
      o.dir = value;
    } else if (key == "vtk") {
      o.vtk = r.boolean(value);
    } else if (key == "csv") {
      o.csv = r.boolean(value);
    } else if (key == "debug_dumps") {
      o.debug_dumps = r.boolean(value);
    } else {
      unknown();
    }
  } else {
    r.fail(fmt::format("unknown section [{}]", section));
  }
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    int v = 0;
    const auto* end = item.data() + item.size();
    const auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (item.empty() || ec != std::errc() || ptr != end) {
      throw InputError(fmt::format("{}: '{}' is not a comma-separated integer list", what, text));
    }
    out.push_back(v);
  }
  if (out.empty()) throw InputError(fmt::format("{} list is empty", what));
  return out;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig config;
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const Reader reader(source, line_no);
    if (text.front() == '[') {
      if (text.back() != ']') reader.fail("malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      static const std::set<std::string> known{"geometry", "model", "params", "coarse", "time", "sources", "output"};
      if (!known.count(section)) reader.fail(fmt::format("unknown section [{}]", section));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) reader.fail("expected 'key = value'");
    if (section.empty()) reader.fail("key outside of any [section]");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key != "region" && !seen.emplace(section, key).second) {
      reader.fail(fmt::format("duplicate key '{}' in [{}]", key, section));
    }
    assign(config, section, key, value, reader);
  }
  return config;
}

ExperimentConfig parse_config_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_config(in, source);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open config file {}", path.string()));
  ExperimentConfig config = parse_config(in, path.string());
  config.base_dir = path.parent_path();
  config.validate();
  return config;
}

std::filesystem::path ExperimentConfig::resolve(const std::string& file) const {
  const std::filesystem::path p(file);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void ExperimentConfig::validate() const {
  const auto& g = geometry;
  if (g.source == GeometrySource::file) {
    if (g.mesh_file.empty()) throw InputError("[geometry] source = file needs mesh_file");
    if (!std::filesystem::exists(resolve(g.mesh_file))) {
      throw InputError(fmt::format("mesh file {} does not exist", resolve(g.mesh_file).string()));
    }
  } else {
    if (!(g.domain.width() > 0.0) || !(g.domain.height() > 0.0)) throw InputError("[geometry] domain is empty");
    if (g.nx < 1 || g.ny < 1) throw InputError("[geometry] nx and ny must be at least 1");
    if (g.fractures < 0) throw InputError("[geometry] fractures must be nonnegative");
    if (!(g.length_min > 0.0) || !(g.length_max >= g.length_min)) {
      throw InputError("[geometry] need 0 < length_min <= length_max");
    }
  }
  if (g.perm_field == PermField::file) {
    if (g.perm_file.empty()) throw InputError("[geometry] perm_field = file needs perm_file");
    if (!std::filesystem::exists(resolve(g.perm_file))) {
      throw InputError(fmt::format("permeability file {} does not exist", resolve(g.perm_file).string()));
    }
  }
  if (!(g.perm_log10_std >= 0.0) || !(g.perm_correlation > 0.0)) {
    throw InputError("[geometry] need perm_log10_std >= 0 and perm_correlation > 0");
  }

  const auto& p = params;
  for (double v : {p.k_m, p.k_f, p.mu, p.thickness, p.sigma_multiplier}) {
    if (!(v > 0.0)) throw InputError("[params] k_m, k_f, mu, thickness and sigma_multiplier must be positive");
  }
  for (const auto& [group, k] : p.k_f_overrides) {
    if (!(k > 0.0)) throw InputError(fmt::format("[params] override for group {} must be positive", group));
  }
  if (!(p.c_m >= 0.0) || !(p.c_f >= 0.0)) throw InputError("[params] c_m and c_f must be nonnegative");
  if (p.sigma && !(*p.sigma >= 0.0)) throw InputError("[params] sigma must be nonnegative");

  const auto& k = coarse;
  if (k.nx < 1 || k.ny < 1) throw InputError("[coarse] nx and ny must be at least 1");
  if (k.layers.empty()) throw InputError("[coarse] layers list is empty");
  for (int s : k.layers) {
    if (s < 1) throw InputError(fmt::format("[coarse] oversampling layers must be at least 1, got {}", s));
  }
  if (k.threads < 1) throw InputError("[coarse] threads must be at least 1");

  time.spec().validate();
  if (time.snapshots.empty()) throw InputError("[time] snapshots list is empty");
  for (int n : time.snapshots) {
    if (n < 0 || n > time.steps) {
      throw InputError(fmt::format("[time] snapshot {} outside 0..{}", n, time.steps));
    }
  }
  for (const auto& s : sources.regions) {
    if (!(s.region.width() >= 0.0) || !(s.region.height() >= 0.0)) throw InputError("[sources] region is inverted");
  }
  if (sources.balance && sources.regions.size() < 2) throw InputError("[sources] balance needs at least two regions");
  if (output.dir.empty()) throw InputError("[output] dir is empty");
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string s;
  auto line = [&](const std::string& key, const std::string& value) { s += fmt::format("{} = {}\n", key, value); };
  const auto& g = c.geometry;
  s += "[geometry]\n";
  line("source", name_of(g.source));
  if (!g.mesh_file.empty()) line("mesh_file", g.mesh_file);
  line("domain", fmt::format("{} {} {} {}", fmt_double(g.domain.x0), fmt_double(g.domain.y0),
                             fmt_double(g.domain.x1), fmt_double(g.domain.y1)));
  line("nx", std::to_string(g.nx));
  line("ny", std::to_string(g.ny));
  line("fractures", std::to_string(g.fractures));
  line("length_min", fmt_double(g.length_min));
  line("length_max", fmt_double(g.length_max));
  line("seed", std::to_string(g.seed));
  line("anchors", name_of(g.anchors));
  line("perm_field", name_of(g.perm_field));
  if (!g.perm_file.empty()) line("perm_file", g.perm_file);
  line("perm_seed", std::to_string(g.perm_seed));
  line("perm_log10_std", fmt_double(g.perm_log10_std));
  line("perm_correlation", fmt_double(g.perm_correlation));

  s += "\n[model]\n";
  line("type", name_of(c.model));

  const auto& p = c.params;
  s += "\n[params]\n";
  line("k_m", fmt_double(p.k_m));
  line("k_f", fmt_double(p.k_f));
  std::string overrides;
  for (const auto& [group, k] : p.k_f_overrides) {
    overrides += fmt::format("{}{}:{}", overrides.empty() ? "" : ", ", group, fmt_double(k));
  }
  line("k_f_overrides", overrides.empty() ? "none" : overrides);
  line("c_m", fmt_double(p.c_m));
  line("c_f", fmt_double(p.c_f));
  line("mu", fmt_double(p.mu));
  line("thickness", fmt_double(p.thickness));
  line("sigma", p.sigma ? fmt_double(*p.sigma) : "auto");
  line("sigma_multiplier", fmt_double(p.sigma_multiplier));

  const auto& k = c.coarse;
  s += "\n[coarse]\n";
  line("nx", std::to_string(k.nx));
  line("ny", std::to_string(k.ny));
  line("layers", join(k.layers));
  line("mass", name_of(k.mass));
  line("rhs", name_of(k.rhs));
  line("partition_of_unity", name_of(k.partition_of_unity));
  line("threads", std::to_string(k.threads));

  s += "\n[time]\n";
  line("t_max", fmt_double(c.time.t_max));
  line("steps", std::to_string(c.time.steps));
  line("p0", fmt_double(c.time.p0));
  line("snapshots", join(c.time.snapshots));

  s += "\n[sources]\n";
  for (const auto& r : c.sources.regions) {
    line("region", fmt::format("{} {} {} {} {} {}", name_of(r.target), fmt_double(r.region.x0),
                               fmt_double(r.region.y0), fmt_double(r.region.x1), fmt_double(r.region.y1),
                               fmt_double(r.rate)));
  }
  line("balance", name_of(c.sources.balance));

  const auto& o = c.output;
  s += "\n[output]\n";
  line("dir", o.dir);
  line("vtk", name_of(o.vtk));
  line("csv", name_of(o.csv));
  line("debug_dumps", name_of(o.debug_dumps));
  return s;
}

}  // namespace nlmc::cli
