#include "gencaps/harness.hpp"

#include "gencaps/dataset_io.hpp"
#include "gencaps/stats.hpp"
#include "gencaps/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace gencaps {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> items;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) items.push_back(trim(cur));
  if (!text.empty() && text.back() == sep) items.emplace_back();
  return items;
}

std::vector<std::string> split_list(const std::string& text, std::string_view what) {
  auto items = split(text, ',');
  if (items.empty()) throw std::invalid_argument("empty " + std::string(what) + " list");
  for (const auto& it : items) {
    if (it.empty()) throw std::invalid_argument("empty item in " + std::string(what) + " list");
  }
  return items;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw std::invalid_argument("not a finite number: '" + s + "'");
  }
  return v;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + items[i];
  return s;
}

json metrics_to_json(const SceneMetrics& m) {
  return json{{"vi", m.vi},
              {"ari", m.ari},
              {"sa_weight", m.sa.weight},
              {"sa_total", m.sa.total},
              {"scene_accuracy", m.scene_accuracy}};
}

SceneMetrics metrics_from_json(const json& j) {
  SceneMetrics m;
  m.vi = j.at("vi").get<double>();
  m.ari = j.at("ari").get<double>();
  m.sa.weight = j.at("sa_weight").get<double>();
  m.sa.total = j.at("sa_total").get<double>();
  m.scene_accuracy = j.at("scene_accuracy").get<int>();
  return m;
}

std::vector<double> metric_column(std::span<const SceneOutcome> outcomes, MaskConvention mask,
                                  int which) {
  std::vector<double> v;
  v.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    const auto& m = mask == MaskConvention::gt ? o.gt : o.full;
    switch (which) {
      case 0: v.push_back(m.sa.ratio()); break;
      case 1: v.push_back(m.ari); break;
      case 2: v.push_back(m.vi); break;
      default: v.push_back(m.scene_accuracy); break;
    }
  }
  return v;
}

std::string lambda_text(const std::optional<double>& lambda) {
  return lambda ? number_tag(*lambda) : std::string("-");
}

}  // namespace

void RunOptions::validate() const {
  if (methods.empty()) throw std::invalid_argument("method list is empty");
  if (sigmas.empty()) throw std::invalid_argument("sigma list is empty");
  if (masks.empty()) throw std::invalid_argument("mask list is empty");
  for (double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("sigma must be >= 0");
  }
  const bool any_vi = std::any_of(methods.begin(), methods.end(), uses_lambda);
  if (any_vi && lambdas.empty()) throw std::invalid_argument("lambda list is empty");
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) throw std::invalid_argument("lambda must be > 0");
  }
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
}

std::string number_tag(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string_view to_string(MaskConvention mask) {
  return mask == MaskConvention::gt ? "gt" : "full";
}

MaskConvention parse_mask(std::string_view name) {
  if (name == "full") return MaskConvention::full;
  if (name == "gt") return MaskConvention::gt;
  throw std::invalid_argument("unknown mask convention '" + std::string(name) + "'");
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& it : split_list(text, "number")) out.push_back(parse_double(it));
  return out;
}

std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> out;
  for (const auto& it : split_list(text, "method")) {
    const Method m = parse_method(it);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

std::vector<MaskConvention> parse_mask_list(const std::string& text) {
  std::vector<MaskConvention> out;
  for (const auto& it : split_list(text, "mask")) {
    const MaskConvention m = parse_mask(it);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (trim(text).empty()) return out;
  for (const auto& it : split_list(text, "scene")) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(it.data(), it.data() + it.size(), v);
    if (ec != std::errc() || ptr != it.data() + it.size()) {
      throw std::invalid_argument("not a scene id: '" + it + "'");
    }
    out.push_back(v);
  }
  return out;
}

fs::path dataset_path(const fs::path& out, double sigma) {
  return out / ("dataset_sigma_" + number_tag(sigma) + ".jsonl");
}

std::string cell_name(Method method, double sigma, std::optional<double> lambda) {
  std::string s = std::string(to_string(method)) + "_sigma_" + number_tag(sigma);
  if (lambda) s += "_lambda_" + number_tag(*lambda);
  return s;
}

fs::path outcomes_path(const fs::path& out, Method method, double sigma,
                       std::optional<double> lambda) {
  return out / "outcomes" / (cell_name(method, sigma, lambda) + ".jsonl");
}

std::vector<Scene> load_or_generate(const fs::path& out, double sigma, std::size_t draws,
                                    std::uint64_t seed, bool* generated) {
  const fs::path path = dataset_path(out, sigma);
  if (fs::exists(path)) {
    if (generated) *generated = false;
    return read_dataset_file(path);
  }
  GenConfig cfg;
  cfg.sigma = sigma;
  cfg.draws = draws;
  auto scenes = generate_dataset(cfg, seed);
  fs::create_directories(out);
  write_dataset_file(path, scenes);
  if (generated) *generated = true;
  return scenes;
}

std::vector<ResultRow> summarize(const Cell& cell, std::span<const MaskConvention> masks) {
  std::vector<ResultRow> rows;
  const auto degenerate = static_cast<std::size_t>(std::count_if(
      cell.outcomes.begin(), cell.outcomes.end(), [](const auto& o) { return o.degenerate; }));
  for (const auto mask : masks) {
    ResultRow r;
    r.method = cell.method;
    r.sigma = cell.sigma;
    r.lambda = cell.lambda;
    r.mask = mask;
    r.summary = dataset_summary(collect(cell.outcomes, mask), mask);
    r.degenerate = degenerate;
    rows.push_back(r);
  }
  return rows;
}

void write_results_csv(std::ostream& os, std::span<const ResultRow> rows) {
  os << "method,sigma,lambda,mask,sa,ari,vi,scene_accuracy,scenes,degenerate\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << number_tag(r.sigma) << ','
       << (r.lambda ? number_tag(*r.lambda) : std::string()) << ',' << to_string(r.mask) << ','
       << fixed(r.summary.sa, 6) << ',' << fixed(r.summary.ari, 6) << ','
       << fixed(r.summary.vi, 6) << ',' << fixed(r.summary.scene_accuracy, 6) << ','
       << r.summary.count << ',' << r.degenerate << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw std::runtime_error("malformed results row: " + line);
    ResultRow r;
    r.method = parse_method(f[0]);
    r.sigma = parse_double(f[1]);
    if (!f[2].empty()) r.lambda = parse_double(f[2]);
    r.mask = parse_mask(f[3]);
    r.summary.sa = parse_double(f[4]);
    r.summary.ari = parse_double(f[5]);
    r.summary.vi = parse_double(f[6]);
    r.summary.scene_accuracy = parse_double(f[7]);
    r.summary.count = std::stoul(f[8]);
    r.degenerate = std::stoul(f[9]);
    rows.push_back(r);
  }
  return rows;
}

void write_outcomes(const fs::path& path, std::span<const SceneOutcome> outcomes) {
  fs::create_directories(path.parent_path());
  auto os = open_out(path);
  for (const auto& o : outcomes) {
    json rec;
    for (const auto& op : o.recovered) {
      rec.push_back({{"object", op.object},
                     {"y", {op.pose.y[0], op.pose.y[1], op.pose.y[2], op.pose.y[3]}}});
    }
    json j{{"scene", o.scene_id},
           {"truth", o.truth},
           {"predicted", o.predicted},
           {"recovered", rec.is_null() ? json::array() : rec},
           {"degenerate", o.degenerate},
           {"full", metrics_to_json(o.full)},
           {"gt", metrics_to_json(o.gt)}};
    os << j.dump() << '\n';
  }
}

std::vector<SceneOutcome> read_outcomes(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<SceneOutcome> out;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      SceneOutcome o;
      o.scene_id = j.at("scene").get<std::size_t>();
      o.truth = j.at("truth").get<Labels>();
      o.predicted = j.at("predicted").get<Labels>();
      o.degenerate = j.at("degenerate").get<bool>();
      for (const auto& r : j.at("recovered")) {
        const auto y = r.at("y").get<std::vector<double>>();
        if (y.size() != kPoseDim) throw std::runtime_error("pose must have 4 entries");
        Pose p;
        for (int i = 0; i < kPoseDim; ++i) p.y[i] = y[static_cast<std::size_t>(i)];
        o.recovered.push_back({r.at("object").get<std::size_t>(), p});
      }
      o.full = metrics_from_json(j.at("full"));
      o.gt = metrics_from_json(j.at("gt"));
      out.push_back(std::move(o));
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<ResultRow> run_experiment(const RunOptions& opts, std::ostream* log) {
  opts.validate();
  fs::create_directories(opts.out / "outcomes");
  const auto lib = TemplateLibrary::constellation();

  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, double>> timings;
  for (const double sigma : opts.sigmas) {
    bool generated = false;
    const auto scenes = load_or_generate(opts.out, sigma, opts.draws, opts.seed, &generated);
    if (log) {
      *log << (generated ? "generated " : "loaded ") << scenes.size() << " scenes for sigma "
           << number_tag(sigma) << '\n';
    }
    if (scenes.empty()) {
      throw std::runtime_error("dataset for sigma " + number_tag(sigma) + " has no scenes");
    }
    for (const Method method : opts.methods) {
      std::vector<std::optional<double>> lambdas;
      if (uses_lambda(method)) {
        lambdas.assign(opts.lambdas.begin(), opts.lambdas.end());
      } else {
        lambdas.emplace_back();
      }
      for (const auto& lambda : lambdas) {
        MethodSpec spec;
        spec.method = method;
        spec.lambda_init = lambda.value_or(500.0);
        spec.restarts = opts.restarts;

        Cell cell{method, sigma, lambda, {}, 0.0};
        const auto t0 = std::chrono::steady_clock::now();
        cell.outcomes = opts.parallel ? evaluate_dataset(scenes, lib, spec, opts.seed)
                                      : evaluate_dataset_serial(scenes, lib, spec, opts.seed);
        cell.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_outcomes(outcomes_path(opts.out, method, sigma, lambda), cell.outcomes);
        timings.emplace_back(cell_name(method, sigma, lambda), cell.wall_seconds);

        for (auto& r : summarize(cell, opts.masks)) {
          if (log) {
            *log << to_string(r.method) << " sigma=" << number_tag(r.sigma)
                 << " lambda=" << lambda_text(r.lambda) << " mask=" << to_string(r.mask)
                 << " SA=" << fixed(r.summary.sa, 3) << " ARI=" << fixed(r.summary.ari, 3)
                 << " VI=" << fixed(r.summary.vi, 3)
                 << " scene_acc=" << fixed(r.summary.scene_accuracy, 3) << " ("
                 << fixed(cell.wall_seconds, 2) << " s)\n";
          }
          rows.push_back(r);
        }
      }
    }
  }

  {
    auto os = open_out(opts.out / "results.csv");
    write_results_csv(os, rows);
  }
  {
    auto os = open_out(opts.out / "timings.csv");
    os << "cell,wall_seconds\n";
    for (const auto& [name, secs] : timings) os << name << ',' << fixed(secs, 3) << '\n';
  }
  {
    auto os = open_out(opts.out / "run.cfg");
    std::vector<std::string> m, s, l, k;
    for (auto x : opts.methods) m.emplace_back(to_string(x));
    for (auto x : opts.sigmas) s.push_back(number_tag(x));
    for (auto x : opts.lambdas) l.push_back(number_tag(x));
    for (auto x : opts.masks) k.emplace_back(to_string(x));
    os << "methods=" << join(m) << "\nsigma=" << join(s) << "\nlambda=" << join(l)
       << "\nmask=" << join(k) << "\ndraws=" << opts.draws << "\nseed=" << opts.seed
       << "\nrestarts=" << opts.restarts << '\n';
  }
  write_report(opts.out, opts.reference);
  return rows;
}

void write_report(const fs::path& out, const std::optional<fs::path>& reference) {
  const auto rows = read_results_csv(out / "results.csv");
  std::ostringstream md;
  md << "# gencaps results\n\n";

  if (std::ifstream cfg(out / "run.cfg"); cfg) {
    md << "Settings:\n\n```\n" << cfg.rdbuf() << "```\n\n";
  }

  std::vector<MaskConvention> masks;
  for (const auto& r : rows) {
    if (std::find(masks.begin(), masks.end(), r.mask) == masks.end()) masks.push_back(r.mask);
  }
  for (const auto mask : masks) {
    md << "## Metrics, " << (mask == MaskConvention::gt ? "ground-truth mask" : "full universe")
       << "\n\n| method | sigma | lambda | SA | ARI | VI | scene acc. | scenes | degenerate |\n"
       << "|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      if (r.mask != mask) continue;
      md << "| " << to_string(r.method) << " | " << number_tag(r.sigma) << " | "
         << lambda_text(r.lambda) << " | " << fixed(r.summary.sa, 3) << " | "
         << fixed(r.summary.ari, 3) << " | " << fixed(r.summary.vi, 3) << " | "
         << fixed(r.summary.scene_accuracy, 3) << " | " << r.summary.count << " | "
         << r.degenerate << " |\n";
    }
    md << '\n';
  }

  // Paired t-tests on per-scene values, aligned by scene id.
  struct Key {
    Method method;
    double sigma;
    std::optional<double> lambda;
  };
  std::vector<Key> cells;
  for (const auto& r : rows) {
    const bool seen = std::any_of(cells.begin(), cells.end(), [&](const Key& k) {
      return k.method == r.method && k.sigma == r.sigma && k.lambda == r.lambda;
    });
    if (!seen) cells.push_back({r.method, r.sigma, r.lambda});
  }
  std::map<std::string, std::vector<SceneOutcome>> loaded;
  auto outcomes_of = [&](const Key& k) -> const std::vector<SceneOutcome>& {
    const auto name = cell_name(k.method, k.sigma, k.lambda);
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      it = loaded.emplace(name, read_outcomes(outcomes_path(out, k.method, k.sigma, k.lambda)))
               .first;
    }
    return it->second;
  };
  std::vector<std::pair<Key, Key>> pairs;
  for (const auto& a : cells) {
    for (const auto& b : cells) {
      if (a.sigma != b.sigma) continue;
      const bool ds_gmm = a.method == Method::gcm_ds && b.method == Method::gcm_gmm &&
                          a.lambda == b.lambda;
      const bool vs_ransac = uses_lambda(a.method) && b.method == Method::ransac;
      if (ds_gmm || vs_ransac) pairs.emplace_back(a, b);
    }
  }
  if (!pairs.empty()) {
    static constexpr std::array<const char*, 4> kNames = {"SA", "ARI", "VI", "scene acc."};
    md << "## Paired t-tests (two-sided, per-scene values)\n\n"
       << "| A | B | sigma | mask | metric | mean(A-B) | t | p |\n"
       << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& [a, b] : pairs) {
      const auto& oa = outcomes_of(a);
      const auto& ob = outcomes_of(b);
      if (oa.size() != ob.size() || oa.size() < 2) continue;
      for (const auto mask : masks) {
        for (int w = 0; w < 4; ++w) {
          const auto va = metric_column(oa, mask, w);
          const auto vb = metric_column(ob, mask, w);
          const auto t = paired_t_test(va, vb);
          char p[32];
          std::snprintf(p, sizeof p, "%.3g", t.p_value);
          md << "| " << to_string(a.method) << ' ' << lambda_text(a.lambda) << " | "
             << to_string(b.method) << ' ' << lambda_text(b.lambda) << " | "
             << number_tag(a.sigma) << " | " << to_string(mask) << " | " << kNames[w] << " | "
             << fixed(t.mean_difference, 4) << " | " << fixed(t.t, 2) << " | " << p << " |\n";
        }
      }
    }
    md << '\n';
  }

  if (reference && fs::exists(*reference)) {
    std::ifstream is(*reference);
    std::string line;
    std::getline(is, line);
    md << "## Published reference values (full universe, lambda 500)\n\n"
       << "These are values reported in the literature for the same protocol, "
          "including CCAE, which is not implemented here.\n\n"
       << "| model | sigma | SA | ARI | VI | scene acc. |\n|---|---|---|---|---|---|\n";
    while (std::getline(is, line)) {
      const auto f = split(line, ',');
      if (f.size() != 6) continue;
      md << "| " << f[0] << " | " << f[1] << " | " << f[2] << " | " << f[3] << " | " << f[4]
         << " | " << f[5] << " |\n";
    }
    md << '\n';
  }

  if (std::ifstream t(out / "timings.csv"); t) {
    std::string line;
    std::getline(t, line);
    md << "## Wall time\n\n| cell | seconds |\n|---|---|\n";
    while (std::getline(t, line)) {
      const auto f = split(line, ',');
      if (f.size() == 2) md << "| " << f[0] << " | " << f[1] << " |\n";
    }
  }

  auto os = open_out(out / "report.md");
  os << md.str();
}

std::vector<fs::path> write_plots(const PlotRequest& req) {
  if (req.scenes.empty()) return {};
  const auto lib = TemplateLibrary::constellation();
  const auto rows = read_results_csv(req.out / "results.csv");

  auto wanted = [](const auto& list, const auto& v) {
    return list.empty() || std::find(list.begin(), list.end(), v) != list.end();
  };
  std::vector<std::tuple<Method, double, std::optional<double>>> cells;
  for (const auto& r : rows) {
    if (!wanted(req.methods, r.method) || !wanted(req.sigmas, r.sigma)) continue;
    if (r.lambda && !wanted(req.lambdas, *r.lambda)) continue;
    const std::tuple<Method, double, std::optional<double>> key{r.method, r.sigma, r.lambda};
    if (std::find(cells.begin(), cells.end(), key) == cells.end()) cells.push_back(key);
  }
  for (const Method m : req.methods) {
    const bool found = std::any_of(cells.begin(), cells.end(),
                                   [&](const auto& c) { return std::get<0>(c) == m; });
    if (!found) {
      throw std::runtime_error("no results for method " + std::string(to_string(m)) + " in " +
                               req.out.string());
    }
  }
  if (cells.empty()) throw std::runtime_error("no matching results in " + req.out.string());

  std::map<double, std::vector<Scene>> datasets;
  std::vector<fs::path> written;
  fs::create_directories(req.out / "plots");
  for (const auto& [method, sigma, lambda] : cells) {
    auto it = datasets.find(sigma);
    if (it == datasets.end()) {
      it = datasets.emplace(sigma, read_dataset_file(dataset_path(req.out, sigma))).first;
    }
    const auto& scenes = it->second;
    const auto outcomes = read_outcomes(outcomes_path(req.out, method, sigma, lambda));
    for (const std::size_t id : req.scenes) {
      if (id >= scenes.size() || id >= outcomes.size()) {
        throw std::invalid_argument("unknown scene id " + std::to_string(id) + " (dataset has " +
                                    std::to_string(scenes.size()) + " scenes)");
      }
      const auto& scene = scenes[id];
      const auto& o = outcomes[id];
      PlotData d;
      d.points = scene.points;
      d.truth = scene.labels;
      d.predicted.assign(o.predicted.begin(),
                         o.predicted.begin() + static_cast<std::ptrdiff_t>(scene.size()));
      d.recovered = o.recovered;
      d.title = cell_name(method, sigma, lambda) + " scene " + std::to_string(id) +
                "  SA=" + fixed(o.full.sa.ratio(), 3) +
                (o.full.scene_accuracy ? "  exact" : "");
      const fs::path path = req.out / "plots" /
                            (cell_name(method, sigma, lambda) + "_scene_" + std::to_string(id) +
                             ".svg");
      auto os = open_out(path);
      os << render_svg(d, lib);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace gencaps
