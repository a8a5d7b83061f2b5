#pragma once

// File formats: design CSV, prior and run-config JSON, FDS/comparison CSV,
// report JSON and the SVG FDS plot.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixchoice/design_model.hpp"
#include "mixchoice/evaluation.hpp"
#include "mixchoice/optimality.hpp"
#include "mixchoice/optimizer.hpp"
#include "mixchoice/prior.hpp"

namespace mixchoice {

namespace fs = std::filesystem;
using nlohmann::json;

/// 12 significant digits, shortest %g form.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string design_csv_header(const ModelSpec& spec) {
  std::string h = "choice_set,alternative";
  for (int k = 1; k <= spec.q(); ++k) h += ",x" + std::to_string(k);
  for (int l = 1; l <= spec.r(); ++l) h += ",z" + std::to_string(l);
  return h;
}

inline void write_design_csv(std::ostream& os, const ModelSpec& spec, const Design& design) {
  os << design_csv_header(spec) << '\n';
  for (int s = 0; s < design.S(); ++s)
    for (int j = 0; j < design.J(); ++j) {
      const auto& p = design.at(s, j);
      os << s + 1 << ',' << j + 1;
      for (int k = 0; k < spec.q(); ++k) os << ',' << format_number(p.x[k]);
      for (int l = 0; l < spec.r(); ++l) os << ',' << format_number(p.z[l]);
      os << '\n';
    }
}

inline std::string design_csv_string(const ModelSpec& spec, const Design& design) {
  std::ostringstream os;
  write_design_csv(os, spec, design);
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": '" + t + "' is not a number");
  }
  if (used != t.size() || !std::isfinite(v)) throw std::invalid_argument(where + ": '" + t + "' is not a finite number");
  return v;
}

inline int parse_index(const std::string& cell, const std::string& where) {
  const double v = parse_double(cell, where);
  if (v < 1.0 || v != std::floor(v) || v > 1e9) throw std::invalid_argument(where + ": index must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses a design CSV for spec. Rows may come in any order but every
/// (choice_set, alternative) pair in 1..S x 1..J must appear exactly once.
inline Design read_design_csv(std::istream& is, const ModelSpec& spec, const std::string& source = "design") {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument(source + ": empty design file");
  if (detail::trim(line) != design_csv_header(spec))
    throw std::invalid_argument(source + ": line 1: header must be '" + design_csv_header(spec) + "'");
  std::map<std::pair<int, int>, DesignPoint> rows;
  int S = 0;
  int J = 0;
  const std::size_t width = 2 + static_cast<std::size_t>(spec.q() + spec.r());
  for (int lineno = 2; std::getline(is, line); ++lineno) {
    if (detail::trim(line).empty()) continue;
    const std::string where = source + ": line " + std::to_string(lineno);
    const auto cells = detail::split_csv_line(detail::trim(line));
    if (cells.size() != width)
      throw std::invalid_argument(where + ": expected " + std::to_string(width) + " fields, found " +
                                  std::to_string(cells.size()));
    const int s = detail::parse_index(cells[0], where);
    const int j = detail::parse_index(cells[1], where);
    DesignPoint p{Eigen::VectorXd(spec.q()), Eigen::VectorXd(spec.r())};
    for (int k = 0; k < spec.q(); ++k) p.x[k] = detail::parse_double(cells[2 + static_cast<std::size_t>(k)], where);
    for (int l = 0; l < spec.r(); ++l)
      p.z[l] = detail::parse_double(cells[2 + static_cast<std::size_t>(spec.q() + l)], where);
    try {
      if ((p.x.array() < 0.0).any()) throw RegionViolation("negative ingredient proportion");
      normalize_mixture(p.x);
      validate_point(spec, p);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
    if (!rows.emplace(std::make_pair(s, j), std::move(p)).second)
      throw std::invalid_argument(where + ": duplicate choice_set/alternative pair");
    S = std::max(S, s);
    J = std::max(J, j);
  }
  if (rows.empty()) throw std::invalid_argument(source + ": no design rows");
  if (J < 2) throw std::invalid_argument(source + ": choice sets need at least two alternatives");
  if (rows.size() != static_cast<std::size_t>(S) * static_cast<std::size_t>(J))
    throw std::invalid_argument(source + ": rows do not cover every choice set and alternative (" +
                                std::to_string(rows.size()) + " rows for " + std::to_string(S) + " sets x " +
                                std::to_string(J) + " alternatives)");
  std::vector<DesignPoint> points;
  points.reserve(rows.size());
  for (auto& [key, p] : rows) points.push_back(std::move(p));
  return Design(S, J, std::move(points));
}

inline Design read_design_csv_file(const fs::path& path, const ModelSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open design file " + path.string());
  return read_design_csv(in, spec, path.string());
}

namespace detail {

inline Eigen::VectorXd json_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument(what + " must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd json_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument(what + " must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = json_vector(j[static_cast<std::size_t>(i)], what + " row");
    if (row.size() != n) throw std::invalid_argument(what + " must be square");
    out.row(i) = row.transpose();
  }
  return out;
}

inline Eigen::MatrixXd covariance_from_json(const json& doc) {
  if (doc.contains("diag")) return json_vector(doc.at("diag"), "diag").asDiagonal();
  if (!doc.contains("covariance")) throw std::invalid_argument("normal prior needs 'covariance' or 'diag'");
  const json& c = doc.at("covariance");
  if (c.is_array()) return json_matrix(c, "covariance");
  if (c.is_object()) {
    if (c.contains("diag")) return json_vector(c.at("diag"), "covariance.diag").asDiagonal();
    const double kappa = c.at("kappa").get<double>();
    const int n = c.at("identity_dim").get<int>();
    if (n < 1) throw std::invalid_argument("covariance.identity_dim must be >= 1");
    return kappa * Eigen::MatrixXd::Identity(n, n);
  }
  throw std::invalid_argument("covariance must be a matrix or an object");
}

}  // namespace detail

/// Prior document: {q, r, kind, mean, covariance | diag, draws, skip, space}.
inline PriorSpec parse_prior(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("prior must be a JSON object");
  const int q = doc.at("q").get<int>();
  const int r = doc.at("r").get<int>();
  const int m = param_count(q, r);
  const std::string kind = doc.value("kind", std::string("normal"));
  const std::string space = doc.value("space", std::string("identified"));
  if (space != "identified" && space != "unidentified")
    throw std::invalid_argument("prior space must be 'identified' or 'unidentified'");
  const Eigen::VectorXd mean = detail::json_vector(doc.at("mean"), "mean");
  const int expected = space == "identified" ? m : m + 1;
  if (mean.size() != expected)
    throw std::invalid_argument("prior mean has " + std::to_string(mean.size()) + " entries; " + space +
                                " space for q=" + std::to_string(q) + ", r=" + std::to_string(r) + " needs " +
                                std::to_string(expected));
  PriorSpec prior;
  if (kind == "point") {
    if (space == "unidentified") {
      const Eigen::MatrixXd T = identification_map(q, m);
      prior = PriorSpec::point(T * mean);
    } else {
      prior = PriorSpec::point(mean);
    }
    if (doc.contains("draws") && doc.at("draws").get<int>() != 1)
      throw std::invalid_argument("point prior must use exactly one draw");
  } else if (kind == "normal") {
    const Eigen::MatrixXd cov = detail::covariance_from_json(doc);
    if (space == "unidentified") {
      prior = identify_prior(UnidentifiedPrior{mean, cov}, q);
    } else {
      prior = PriorSpec::normal(mean, cov, 1);
    }
    prior.draws = doc.value("draws", 128);
    prior.skip = doc.value("skip", std::uint64_t{0});
  } else {
    throw std::invalid_argument("prior kind must be 'point' or 'normal'");
  }
  prior.validate();
  return prior;
}

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

struct ProblemSpec {
  int q = 3;
  int r = 0;
  int S = 1;
  int J = 2;
};

struct OutputPaths {
  std::string design_csv;
  std::string report_json;
  std::string fds_csv;
  std::string fds_svg;
};

struct FdsSettings {
  int M = kDefaultFdsSamples;
  std::uint64_t seed = 1;
};

struct RunConfig {
  ProblemSpec problem;
  PriorSpec prior;
  CriterionKind criterion = CriterionKind::I;
  bool bayesian = true;
  OptimizerConfig optimizer;
  OutputPaths outputs;
  FdsSettings fds;
  std::vector<double> lower_bounds;  // informational; designs are in pseudocomponents

  ModelSpec model() const { return ModelSpec(problem.q, problem.r); }

  /// Draws the criteria average over. A normal prior with bayesian = false
  /// collapses to its mean (a locally optimal design).
  std::vector<ParameterVector> draws() const {
    if (prior.kind == PriorKind::Normal && !bayesian) return {prior.mean};
    return prior_draws(prior);
  }
};

inline CriterionKind parse_criterion(const std::string& s) {
  if (s == "d" || s == "D") return CriterionKind::D;
  if (s == "i" || s == "I") return CriterionKind::I;
  throw std::invalid_argument("criterion must be 'd' or 'i', got '" + s + "'");
}

/// Expands "{criterion}" to "d" or "i".
inline std::string expand_output_path(std::string path, CriterionKind kind) {
  const std::string key = "{criterion}";
  for (auto pos = path.find(key); pos != std::string::npos; pos = path.find(key))
    path.replace(pos, key.size(), kind == CriterionKind::D ? "d" : "i");
  return path;
}

/// Relative prior-file paths resolve against the config file's directory.
inline RunConfig parse_run_config(const json& doc, const fs::path& base_dir = {}) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig cfg;
  try {
    const json& p = doc.at("problem");
    cfg.problem = ProblemSpec{p.at("q").get<int>(), p.value("r", 0), p.at("S").get<int>(), p.value("J", 2)};
    if (cfg.problem.q < 2 || cfg.problem.r < 0 || cfg.problem.S < 1 || cfg.problem.J < 2)
      throw std::invalid_argument("problem needs q >= 2, r >= 0, S >= 1, J >= 2");

    const json& pr = doc.at("prior");
    json prior_doc = pr;
    if (pr.is_string()) {
      fs::path path = pr.get<std::string>();
      if (path.is_relative()) path = base_dir / path;
      if (!fs::exists(path)) throw std::invalid_argument("prior file " + path.string() + " does not exist");
      prior_doc = read_json_file(path);
    }
    cfg.prior = parse_prior(prior_doc);
    if (prior_doc.at("q").get<int>() != cfg.problem.q || prior_doc.at("r").get<int>() != cfg.problem.r)
      throw std::invalid_argument("prior (q, r) does not match the problem");
    if (cfg.prior.dim() != param_count(cfg.problem.q, cfg.problem.r))
      throw std::invalid_argument("prior dimension does not equal the model parameter count");

    cfg.criterion = parse_criterion(doc.value("criterion", std::string("i")));
    cfg.bayesian = doc.value("bayesian", true);

    if (doc.contains("optimizer")) {
      const json& o = doc.at("optimizer");
      cfg.optimizer.n_starts = o.value("n_starts", cfg.optimizer.n_starts);
      cfg.optimizer.max_passes = o.value("max_passes", cfg.optimizer.max_passes);
      cfg.optimizer.rel_tol = o.value("rel_tol", cfg.optimizer.rel_tol);
      cfg.optimizer.brent_tol = o.value("brent_tol", cfg.optimizer.brent_tol);
      cfg.optimizer.brent_max_iter = o.value("brent_max_iter", cfg.optimizer.brent_max_iter);
      cfg.optimizer.seed = o.value("seed", cfg.optimizer.seed);
    }
    cfg.optimizer.validate();

    if (doc.contains("outputs")) {
      const json& o = doc.at("outputs");
      cfg.outputs.design_csv = o.value("design_csv", std::string());
      cfg.outputs.report_json = o.value("report_json", std::string());
      cfg.outputs.fds_csv = o.value("fds_csv", std::string());
      cfg.outputs.fds_svg = o.value("fds_svg", std::string());
    }
    if (doc.contains("fds")) {
      const json& f = doc.at("fds");
      cfg.fds.M = f.value("M", cfg.fds.M);
      cfg.fds.seed = f.value("seed", cfg.fds.seed);
      if (cfg.fds.M < 100) throw std::invalid_argument("fds.M must be >= 100");
    }
    if (doc.contains("lower_bounds")) {
      cfg.lower_bounds = doc.at("lower_bounds").get<std::vector<double>>();
      if (static_cast<int>(cfg.lower_bounds.size()) != cfg.problem.q)
        throw std::invalid_argument("lower_bounds needs one entry per ingredient");
      IngredientBounds b{Eigen::Map<const Eigen::VectorXd>(cfg.lower_bounds.data(), cfg.problem.q)};
      b.validate();
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw std::invalid_argument("config file " + path.string() + " does not exist");
  return parse_run_config(read_json_file(path), path.parent_path());
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json report_json(const RunConfig& cfg, const OptimizationReport& report, double value, double wall_seconds) {
  json per_start = json::array();
  for (const auto& s : report.per_start)
    per_start.push_back({{"start", s.start},
                         {"seed", s.seed},
                         {"initial", number_or_null(s.initial_value)},
                         {"final", number_or_null(s.final_value)},
                         {"passes", s.passes},
                         {"accepted_moves", s.accepted_moves}});
  json trace = json::array();
  for (double v : report.trace) trace.push_back(number_or_null(v));
  const auto& best = report.per_start.at(static_cast<std::size_t>(report.best_start));
  return json{{"criterion", cfg.criterion == CriterionKind::D ? "d" : "i"},
              {"kind", to_string(cfg.criterion)},
              {"bayesian", report.best_value.bayesian},
              {"value", number_or_null(value)},
              {"draws", report.best_value.draws_used},
              {"seed", cfg.optimizer.seed},
              {"starts", cfg.optimizer.n_starts},
              {"passes", best.passes},
              {"wall_seconds", wall_seconds},
              {"q", cfg.problem.q},
              {"r", cfg.problem.r},
              {"S", cfg.problem.S},
              {"J", cfg.problem.J},
              {"best_start", report.best_start},
              {"per_start", per_start},
              {"trace", trace}};
}

inline void write_fds_csv(std::ostream& os, const FdsCurve& curve) {
  os << "fraction,avg_pred_var\n";
  for (std::size_t i = 0; i < curve.variances.size(); ++i)
    os << format_number(curve.fractions[i]) << ',' << format_number(curve.variances[i]) << '\n';
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "design,d_value,i_value,fds_min,fds_median,fds_max\n";
  for (const auto& r : rows)
    os << r.design << ',' << format_number(r.d_value) << ',' << format_number(r.i_value) << ','
       << format_number(r.fds_min) << ',' << format_number(r.fds_median) << ',' << format_number(r.fds_max) << '\n';
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Static SVG 1.1 plot, one polyline per curve plus a legend.
inline void write_fds_svg(std::ostream& os, const std::vector<std::pair<std::string, FdsCurve>>& curves) {
  constexpr double kWidth = 720, kHeight = 480, kLeft = 80, kRight = 170, kTop = 30, kBottom = 60;
  constexpr int kMaxVertices = 1000;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  double lo = kInfinity;
  double hi = -kInfinity;
  for (const auto& [name, c] : curves) {
    lo = std::min(lo, c.min());
    hi = std::max(hi, c.max());
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double f) { return kLeft + f * pw; };
  auto py = [&](double v) { return kTop + (1.0 - (v - lo) / (hi - lo)) * ph; };
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
  };

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
     << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double f = t / 4.0;
    os << "<text x=\"" << fmt(px(f)) << "\" y=\"" << fmt(kTop + ph + 18) << "\" text-anchor=\"middle\">"
       << format_number(f) << "</text>\n";
    const double v = lo + f * (hi - lo);
    os << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\">"
       << format_number(std::round(v * 1000.0) / 1000.0) << "</text>\n";
  }
  os << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 15)
     << "\" text-anchor=\"middle\">Fraction of design space</text>\n"
     << "<text x=\"20\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << fmt(kTop + ph / 2) << ")\">Averaged prediction variance</text>\n";
  std::size_t idx = 0;
  for (const auto& [name, c] : curves) {
    const char* color = kColors[idx % (sizeof kColors / sizeof *kColors)];
    const std::size_t n = c.variances.size();
    const std::size_t stride = std::max<std::size_t>(1, n / kMaxVertices);
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; i += stride) os << fmt(px(c.fractions[i])) << ',' << fmt(py(c.variances[i])) << ' ';
    os << fmt(px(c.fractions[n - 1])) << ',' << fmt(py(c.variances[n - 1])) << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(idx);
    os << "<line x1=\"" << fmt(kLeft + pw + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(kLeft + pw + 40)
       << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << fmt(kLeft + pw + 46) << "\" y=\"" << fmt(ly + 4) << "\">" << detail::xml_escape(name)
       << "</text>\n";
    ++idx;
  }
  os << "</g>\n</svg>\n";
}

}  // namespace mixchoice
