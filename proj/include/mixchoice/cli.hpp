#pragma once

// Command-line driver: generate, evaluate and fds subcommands.
// Exit status: 0 success, 2 input error, 3 numerical failure.

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixchoice/design_model.hpp"
#include "mixchoice/errors.hpp"
#include "mixchoice/evaluation.hpp"
#include "mixchoice/io.hpp"
#include "mixchoice/optimality.hpp"
#include "mixchoice/optimizer.hpp"
#include "mixchoice/prior.hpp"

namespace mixchoice::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct GenerateOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> starts;
  std::optional<std::string> criterion;
  std::optional<std::string> design_csv;
  std::optional<std::string> report_json;
  bool quiet = false;
};

struct EvaluateOptions {
  std::string config;
  std::string design;
  std::optional<std::string> json_out;
};

struct FdsOptions {
  std::string config;
  std::vector<std::string> designs;
  std::vector<std::string> names;
  std::string out_dir = ".";
  std::optional<std::string> svg;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << text;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::overflow_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

/// Design as it will read back from its CSV (12 significant digits).
inline Design round_trip(const ModelSpec& spec, const Design& design) {
  std::istringstream in(design_csv_string(spec, design));
  return read_design_csv(in, spec);
}

}  // namespace detail

inline int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    RunConfig cfg = load_run_config(opt.config);
    if (opt.seed) cfg.optimizer.seed = *opt.seed;
    if (opt.starts) cfg.optimizer.n_starts = *opt.starts;
    if (opt.criterion) cfg.criterion = parse_criterion(*opt.criterion);
    if (opt.design_csv) cfg.outputs.design_csv = *opt.design_csv;
    if (opt.report_json) cfg.outputs.report_json = *opt.report_json;
    cfg.optimizer.validate();

    const ModelSpec spec = cfg.model();
    const auto draws = cfg.draws();
    const MomentsMatrix W(spec);
    const auto t0 = std::chrono::steady_clock::now();
    const OptimizationReport report = coordinate_exchange(
        spec, cfg.problem.S, cfg.problem.J, draws, cfg.criterion, cfg.optimizer, &W, [&](const StartResult& r) {
          if (!opt.quiet)
            err << "start " << r.start + 1 << '/' << cfg.optimizer.n_starts << ": " << format_number(r.initial_value)
                << " -> " << format_number(r.final_value) << " in " << r.passes << " passes\n";
        });
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // the reported value is that of the design exactly as written to disk
    const Design written = detail::round_trip(spec, report.best_design);
    const CriterionValue value = bayesian_criterion(spec, written, draws, cfg.criterion, &W);
    const std::string csv = design_csv_string(spec, written);
    const json rep = report_json(cfg, report, value.value, wall);

    if (!cfg.outputs.design_csv.empty())
      detail::write_text_file(expand_output_path(cfg.outputs.design_csv, cfg.criterion), csv);
    if (!cfg.outputs.report_json.empty())
      detail::write_text_file(expand_output_path(cfg.outputs.report_json, cfg.criterion), rep.dump(2) + "\n");
    if (cfg.outputs.design_csv.empty()) out << csv;

    if (!cfg.outputs.fds_csv.empty() || !cfg.outputs.fds_svg.empty()) {
      const FdsCurve curve = fds_curve(spec, written, draws, cfg.fds.M, cfg.fds.seed);
      if (!cfg.outputs.fds_csv.empty()) {
        std::ostringstream os;
        write_fds_csv(os, curve);
        detail::write_text_file(expand_output_path(cfg.outputs.fds_csv, cfg.criterion), os.str());
      }
      if (!cfg.outputs.fds_svg.empty()) {
        std::ostringstream os;
        write_fds_svg(os, {{std::string(to_string(cfg.criterion)) + "-optimal", curve}});
        detail::write_text_file(expand_output_path(cfg.outputs.fds_svg, cfg.criterion), os.str());
      }
    }
    if (!opt.quiet) err << "best " << to_string(cfg.criterion) << "-value " << format_number(value.value) << '\n';
    return value.singular() ? kExitNumerical : kExitOk;
  });
}

inline int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const RunConfig cfg = load_run_config(opt.config);
    const ModelSpec spec = cfg.model();
    const Design design = read_design_csv_file(opt.design, spec);
    const auto draws = cfg.draws();
    const MomentsMatrix W(spec);
    const CriterionValue d = bayesian_criterion(spec, design, draws, CriterionKind::D);
    const CriterionValue i = bayesian_criterion(spec, design, draws, CriterionKind::I, &W);
    const json result{{"design", opt.design},
                      {"S", design.S()},
                      {"J", design.J()},
                      {"bayesian", d.bayesian},
                      {"draws", d.draws_used},
                      {"d_value", number_or_null(d.value)},
                      {"i_value", number_or_null(i.value)},
                      {"singular", d.singular() || i.singular()}};
    const std::string text = result.dump(2) + "\n";
    if (opt.json_out) detail::write_text_file(*opt.json_out, text);
    out << text;
    if (d.singular() || i.singular()) {
      err << "error: design has a singular information matrix\n";
      return kExitNumerical;
    }
    return kExitOk;
  });
}

inline int cmd_fds(const FdsOptions& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const RunConfig cfg = load_run_config(opt.config);
    if (opt.designs.empty()) throw std::invalid_argument("fds needs at least one --design");
    if (!opt.names.empty() && opt.names.size() != opt.designs.size())
      throw std::invalid_argument("--name must be given once per --design");
    const ModelSpec spec = cfg.model();
    const int M = opt.samples.value_or(cfg.fds.M);
    const std::uint64_t seed = opt.seed.value_or(cfg.fds.seed);
    const auto draws = cfg.draws();

    std::vector<NamedDesign> designs;
    for (std::size_t k = 0; k < opt.designs.size(); ++k) {
      const std::string name = opt.names.empty() ? fs::path(opt.designs[k]).stem().string() : opt.names[k];
      designs.push_back({name, read_design_csv_file(opt.designs[k], spec)});
    }
    const MomentsMatrix W(spec);
    const auto rows = compare_designs(spec, designs, draws, M, seed, &W);

    std::vector<std::pair<std::string, FdsCurve>> curves;
    const fs::path dir = opt.out_dir;
    for (const auto& d : designs) {
      FdsCurve curve = fds_curve(spec, d.design, draws, M, seed);
      std::ostringstream os;
      write_fds_csv(os, curve);
      detail::write_text_file(dir / (d.name + "_fds.csv"), os.str());
      curves.emplace_back(d.name, std::move(curve));
    }
    std::ostringstream svg;
    write_fds_svg(svg, curves);
    detail::write_text_file(opt.svg ? fs::path(*opt.svg) : dir / "fds.svg", svg.str());

    std::ostringstream table;
    write_comparison_csv(table, rows);
    detail::write_text_file(dir / "comparison.csv", table.str());
    out << table.str();
    return kExitOk;
  });
}

/// Parses argv and dispatches to a subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Optimal designs for choice experiments with mixtures and process variables"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Search for a D- or I-optimal design");
  g->add_option("--config", gen.config, "Run configuration (JSON)")->required();
  g->add_option("--seed", gen.seed, "Override optimizer.seed");
  g->add_option("--starts", gen.starts, "Override optimizer.n_starts");
  g->add_option("--criterion", gen.criterion, "Override criterion (d or i)");
  g->add_option("--design-csv", gen.design_csv, "Override outputs.design_csv");
  g->add_option("--report-json", gen.report_json, "Override outputs.report_json");
  g->add_flag("--quiet", gen.quiet, "Suppress progress output");

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Bayesian D- and I-values of a design");
  e->add_option("--config", ev.config, "Run configuration (JSON)")->required();
  e->add_option("--design", ev.design, "Design CSV")->required();
  e->add_option("--json-out", ev.json_out, "Also write the result JSON here");

  FdsOptions fo;
  auto* f = app.add_subcommand("fds", "Fraction-of-design-space curves and comparison table");
  f->add_option("--config", fo.config, "Run configuration (JSON)")->required();
  f->add_option("--design", fo.designs, "Design CSV (repeatable)")->required();
  f->add_option("--name", fo.names, "Display name per design (repeatable)");
  f->add_option("--out-dir", fo.out_dir, "Directory for FDS CSVs, comparison.csv and fds.svg");
  f->add_option("--svg", fo.svg, "SVG output path");
  f->add_option("--samples", fo.samples, "Override fds.M");
  f->add_option("--seed", fo.seed, "Override fds.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitInput;
  }
  if (g->parsed()) return cmd_generate(gen, out, err);
  if (e->parsed()) return cmd_evaluate(ev, out, err);
  return cmd_fds(fo, out, err);
}

}  // namespace mixchoice::cli
