#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gtc/config.hpp"
#include "gtc/diagnostics.hpp"
#include "gtc/simulation.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gyrokinetic toroidal particle-in-cell simulation on logical ranks"};

  std::string size;
  std::string config_path;
  std::optional<int> steps, ranks_t, ranks_r, npartdom, workers, bin_every, diag_every;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> sets;
  bool plots = false;
  int rungs = 3;
  bool dump_grid = false;

  app.add_option("--size", size, "Plasma-size preset A, B, C or D");
  app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--steps", steps, "Number of time steps");
  app.add_option("--dt", dt, "Time step (units of a/v_th)");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--ranks-toroidal", ranks_t, "Toroidal ranks (must divide ntoroidal; default one per plane)");
  app.add_option("--ranks-radial", ranks_r, "Radial domains");
  app.add_option("--npartdom", npartdom, "Particle replicas per spatial domain");
  app.add_option("--workers", workers, "Data-parallel workers per rank");
  app.add_option("--bin-every", bin_every, "Radial binning period in steps (0 disables)");
  app.add_option("--diag-every", diag_every, "Diagnostics period in steps");
  app.add_option("--out", out, "Output directory");
  app.add_option("--set", sets, "Extra key=value override (repeatable)");
  app.add_flag("--emit-plots-data", plots, "Run the weak-scaling ladder and write weak_scaling.csv");
  app.add_option("--weak-scaling-rungs", rungs, "Rungs in the weak-scaling ladder")->check(CLI::PositiveNumber);
  app.add_flag("--dump-grid", dump_grid, "Write a per-ring grid summary to grid.txt");

  CLI11_PARSE(app, argc, argv);

  gtc::RunParams p;
  try {
    if (!config_path.empty()) {
      // a --size preset underlies the file; a size= key in the file wins
      const std::string text = gtc::read_text(config_path);
      p = gtc::parse_config(size.empty() ? text : "size=" + size + "\n" + text);
    } else if (!size.empty()) {
      p = gtc::preset(size);
    }
    auto put = [&](const char* key, auto v) {
      if (v) sets.push_back(std::string(key) + "=" + std::to_string(*v));
    };
    put("nsteps", steps);
    put("seed", seed);
    put("toroidal_domains", ranks_t);
    put("nradial_domains", ranks_r);
    put("npartdom", npartdom);
    put("workers", workers);
    put("bin_every", bin_every);
    put("diag_every", diag_every);
    if (dt) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "dt=%.17g", *dt);
      sets.emplace_back(buf);
    }
    if (dump_grid || plots) {
      gtc::apply_overrides(p, sets);
      sets.clear();
      std::filesystem::create_directories(out);
      if (dump_grid) gtc::write_text(std::filesystem::path(out) / "grid.txt", gtc::grid_summary(gtc::build_grid(p)));
      if (plots) {
        const auto reports = gtc::weak_scaling(p, rungs);
        for (const auto& r : reports) {
          if (!r.ok) std::cerr << "gtcp: rung " << r.rung << " failed: " << r.error << '\n';
        }
        gtc::write_text(std::filesystem::path(out) / "weak_scaling.csv", gtc::weak_scaling_csv(reports));
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "gtcp: " << e.what() << '\n';
    return 1;
  }
  return gtc::run_main(p, sets, out, std::cerr);
}
