#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "twrn/harness.hpp"
#include "twrn/kernels.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kSelftest = 3 };

twrn::ExperimentSpec load_or_exit(const std::string& path) {
  try {
    return twrn::load_config(path);
  } catch (const twrn::IoError& e) {
    throw twrn::ConfigError(0, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel estimation experiments for two-way relay networks with timing offsets"};
  app.require_subcommand(1);

  std::string cfg, out, out_dir, fig;
  std::uint64_t seed = 0;
  int threads = 1;

  auto* run = app.add_subcommand("run", "run one experiment and write its CSV");
  run->add_option("config", cfg, "key=value experiment file")->required();
  run->add_option("--out", out, "output CSV path (default: derived name in the working directory)");
  auto* seed_opt = run->add_option("--seed", seed, "override the configured seed");
  run->add_option("--threads", threads, "worker threads (TWRN_THREADS overrides)")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled in");
  validate->add_option("config", cfg, "key=value experiment file")->required();

  auto* figures = app.add_subcommand("figures", "run a bundled figure preset");
  figures->add_option("name", fig, "fig2 .. fig8")->required()->check(
      CLI::IsMember({"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"}));
  figures->add_option("--out-dir", out_dir, "directory for CSVs and the plot script")->required();
  figures->add_option("--threads", threads, "worker threads (TWRN_THREADS overrides)")->check(CLI::PositiveNumber);

  auto* self = app.add_subcommand("selftest", "compare Monte Carlo results with closed forms");
  self->add_option("--threads", threads, "worker threads (TWRN_THREADS overrides)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  const twrn::RunOptions opt{twrn::resolve_threads(threads)};
  try {
    if (*run) {
      auto spec = load_or_exit(cfg);
      if (*seed_opt) spec.seed = seed;
      const std::string path = out.empty() ? twrn::output_name(spec) : out;
      const auto rows = twrn::run_experiment(spec, opt);
      twrn::emit_csv(rows, path);
      long degenerate = 0, fallbacks = 0;
      for (const auto& r : rows) {
        degenerate += r.degenerate;
        fallbacks += r.fallbacks;
      }
      std::cerr << "wrote " << path << " (" << rows.size() << " points, " << degenerate << " degenerate trials, "
                << fallbacks << " fallbacks)\n";
    } else if (*validate) {
      std::cout << twrn::to_text(load_or_exit(cfg));
    } else if (*figures) {
      for (const auto& p : twrn::write_figure(twrn::figure_preset(fig), out_dir, opt)) std::cout << p << "\n";
    } else if (*self) {
      std::cout << "kernels: " << twrn::kernels::active().name << "\n";
      bool all = true;
      for (const auto& c : twrn::selftest(opt)) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        all = all && c.pass;
      }
      return all ? kOk : kSelftest;
    }
  } catch (const twrn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
