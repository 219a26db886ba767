// gencaps: generate constellation datasets, run the inference methods,
// build the report and draw reconstructions.
//
//   gencaps generate --sigma 0,0.1,0.25 --draws 512 --seed 7 --out results
//   gencaps run --methods gcm-ds,gcm-gmm,ransac --sigma 0 --lambda 500 --out results
//   gencaps report --out results
//   gencaps plot --scenes 0,1,2 --methods ransac --out results
//
// Every flag may also come from a key=value file given with --config; flags
// on the command line win over the file.

#include "gencaps/dataset_io.hpp"
#include "gencaps/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#ifndef GENCAPS_REFERENCE_CSV
#define GENCAPS_REFERENCE_CSV ""
#endif

using namespace gencaps;

int main(int argc, char** argv) {
  CLI::App app{"Generative capsule inference on 2D point constellations"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file with default flag values");

  // List flags accept "a,b" or repeated flags; config files give "key=a,b".
  std::vector<std::string> sigma{"0"};
  std::vector<std::string> lambda{"500"};
  std::vector<std::string> methods{"gcm-ds", "gcm-gmm", "ransac"};
  std::vector<std::string> mask{"full"};
  std::vector<std::string> scenes;
  std::string out = "results";
  std::string reference = GENCAPS_REFERENCE_CSV;
  std::size_t draws = 512;
  std::uint64_t seed = 7;
  int restarts = 5;
  bool serial = false;

  app.add_option("--sigma", sigma, "Noise levels, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--lambda", lambda, "Initial precisions for the VI methods, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--methods", methods, "gcm-ds, gcm-gmm, ransac; comma separated")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--mask", mask, "Metric convention: full, gt or full,gt")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--draws", draws, "Scene draws per dataset (empty scenes are dropped)")
      ->capture_default_str();
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_option("--restarts", restarts, "VI restarts per scene")->capture_default_str();
  app.add_option("--out", out, "Output directory")->capture_default_str();
  app.add_option("--scenes", scenes, "Scene ids to plot, comma separated")->delimiter(',');
  app.add_option("--reference", reference, "CSV of published values for the report");
  app.add_flag("--serial", serial, "Use the serial scene loop");

  auto* gen = app.add_subcommand("generate", "Write dataset_sigma_<s>.jsonl for every sigma");
  auto* run = app.add_subcommand("run", "Evaluate methods and write results.csv and report.md");
  auto* rep = app.add_subcommand("report", "Rebuild report.md from a finished run");
  auto* plot = app.add_subcommand("plot", "Draw reconstructions of selected scenes as SVG");
  for (auto* sub : {gen, run, rep, plot}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  const auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  const auto joined = [](const std::vector<std::string>& items) {
    std::string s;
    for (const auto& it : items) s += (s.empty() ? "" : ",") + it;
    return s;
  };
  std::optional<fs::path> ref;
  if (!reference.empty()) ref = reference;

  try {
    if (*gen) {
      if (draws == 0) std::cerr << "warning: --draws 0 writes empty datasets\n";
      fs::create_directories(out);
      for (const double s : parse_number_list(joined(sigma))) {
        GenConfig cfg;
        cfg.sigma = s;
        cfg.draws = draws;
        const auto data = serial ? generate_dataset_serial(cfg, seed) : generate_dataset(cfg, seed);
        const auto path = dataset_path(out, s);
        write_dataset_file(path, data);
        std::cout << path.string() << ": " << data.size() << " scenes\n";
      }
    } else if (*run) {
      RunOptions opts;
      opts.methods = parse_method_list(joined(methods));
      opts.sigmas = parse_number_list(joined(sigma));
      opts.lambdas = parse_number_list(joined(lambda));
      opts.masks = parse_mask_list(joined(mask));
      opts.draws = draws;
      opts.seed = seed;
      opts.restarts = restarts;
      opts.out = out;
      opts.reference = ref;
      opts.parallel = !serial;
      run_experiment(opts, &std::cout);
      std::cout << "wrote " << (fs::path(out) / "results.csv").string() << " and "
                << (fs::path(out) / "report.md").string() << '\n';
    } else if (*rep) {
      write_report(out, ref);
      std::cout << "wrote " << (fs::path(out) / "report.md").string() << '\n';
    } else if (*plot) {
      PlotRequest req;
      req.out = out;
      req.scenes = parse_index_list(joined(scenes));
      if (given("--methods")) req.methods = parse_method_list(joined(methods));
      if (given("--sigma")) req.sigmas = parse_number_list(joined(sigma));
      if (given("--lambda")) req.lambdas = parse_number_list(joined(lambda));
      const auto written = write_plots(req);
      if (written.empty()) std::cout << "no scenes selected\n";
      for (const auto& p : written) std::cout << p.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
