// grdtool: command-line front end for the rate-distortion surface toolkit.
//
// Subcommands: synth, train, sample-order, reconstruct, eval, compare.
// Errors leave a machine-readable JSON object on stderr and a nonzero exit
// code (1 usage, 2 I/O, 3 parse, 4 domain, 5 solver).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grd/basis.hpp"
#include "grd/codec_compare.hpp"
#include "grd/errors.hpp"
#include "grd/grid.hpp"
#include "grd/io.hpp"
#include "grd/qp.hpp"
#include "grd/reconstruct.hpp"
#include "grd/sampling.hpp"
#include "grd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_of(grd::ErrorKind kind) {
  switch (kind) {
    case grd::ErrorKind::io: return 2;
    case grd::ErrorKind::parse: return 3;
    case grd::ErrorKind::solver: return 5;
    default: return 4;
  }
}

const char* kind_name(grd::ErrorKind kind) {
  switch (kind) {
    case grd::ErrorKind::invalid_argument: return "invalid_argument";
    case grd::ErrorKind::structural: return "structural";
    case grd::ErrorKind::axis_mismatch: return "axis_mismatch";
    case grd::ErrorKind::domain: return "domain";
    case grd::ErrorKind::solver: return "solver";
    case grd::ErrorKind::io: return "io";
    case grd::ErrorKind::parse: return "parse";
  }
  return "error";
}

[[noreturn]] void emit_error_and_exit(grd::ErrorKind kind,
                                      const std::string& message) {
  json j;
  j["error"] = {{"kind", kind_name(kind)},
                {"code", exit_code_of(kind)},
                {"message", message}};
  std::cerr << j.dump() << std::endl;
  std::exit(exit_code_of(kind));
}

double sig6(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  std::ostringstream tmp;
  tmp.precision(6);
  tmp << v;
  return std::stod(tmp.str());
}

std::string format6(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

// Deterministic, platform-independent shuffling for split assignment.
struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t bounded(std::uint64_t n) { return next() % n; }
};

void shuffle_indices(std::vector<std::size_t>& indices, std::uint64_t seed) {
  SplitMix64 rng{seed};
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::swap(indices[i - 1], indices[rng.bounded(i)]);
  }
}

grd::AxisSpec axes_by_name(const std::string& name) {
  if (name == "default") return grd::full_scale_axes();
  if (name == "desk") return grd::desk_axes();
  grd::fail(grd::ErrorKind::invalid_argument,
            "unknown axes preset '" + name + "' (default|desk)");
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    try {
      out.push_back(std::stoi(token));
    } catch (const std::exception&) {
      grd::fail(grd::ErrorKind::invalid_argument,
                "cannot parse integer list entry '" + token + "'");
    }
  }
  if (out.empty()) {
    grd::fail(grd::ErrorKind::invalid_argument, "empty integer list");
  }
  return out;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::uint64_t seed = 42;
  int count = 0;
  std::string axes = "default";
  std::string output;
  double train_frac = 0.8;
};

int run_synth(const SynthArgs& args) {
  grd::synth::SynthParams params;
  params.seed = args.seed;
  params.axes = axes_by_name(args.axes);
  params.count = args.count;
  const auto corpus = grd::synth::generate(params);

  if (args.train_frac < 0.0 || args.train_frac > 1.0) {
    grd::fail(grd::ErrorKind::invalid_argument,
              "train fraction must lie in [0, 1]");
  }
  const auto train_count = static_cast<std::size_t>(
      std::llround(args.train_frac * static_cast<double>(corpus.size())));

  grd::io::Dataset dataset;
  dataset.directory = args.output;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::ostringstream name;
    name << "grid_" << std::setw(4) << std::setfill('0') << i << ".json";
    grd::io::save_grid(corpus[i], dataset.directory / name.str());
    dataset.entries.push_back(
        {name.str(), i < train_count ? "train" : "test"});
  }
  grd::io::save_manifest(dataset, dataset.directory / "manifest.json");
  std::cout << "wrote " << corpus.size() << " surfaces ("
            << train_count << " train, " << corpus.size() - train_count
            << " test) to " << args.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string manifest;
  std::string family = "eigen";
  int n = 8;
  std::string output;
  std::string split = "train";
  bool rd1d = false;
};

int run_train(const TrainArgs& args) {
  const auto dataset = grd::io::load_manifest(args.manifest);
  const auto grids = grd::io::load_split(dataset, args.split);
  if (grids.size() < 2) {
    grd::fail(grd::ErrorKind::invalid_argument,
              "split '" + args.split + "' holds fewer than 2 grids");
  }

  if (args.rd1d) {
    const auto rd = grd::codec::train_rd_basis(grids, args.n);
    grd::io::save_rd_basis(rd, args.output);
    std::cout << "trained 1-D rate-quality basis on "
              << rd.training_count << " curves, " << rd.max_components()
              << " components" << (rd.truncated ? " (rank-truncated)" : "")
              << "\n";
    return 0;
  }

  grd::basis::EigenBasis basis;
  const auto kind = grd::basis::basis_kind_from_string(args.family);
  if (kind == grd::basis::BasisKind::eigen) {
    basis = grd::basis::pca_train(grids, args.n);
  } else {
    // Fixed families take the dataset mean so the N = 0 model matches the
    // eigen baseline.
    Eigen::VectorXd mean =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(
            grids.front().axes.cell_count()));
    for (const auto& g : grids) mean += grd::flatten(g);
    mean /= static_cast<double>(grids.size());
    basis = kind == grd::basis::BasisKind::polynomial
                ? grd::basis::polynomial_basis(grids.front().axes, args.n,
                                               mean)
                : grd::basis::trigonometric_basis(grids.front().axes, args.n,
                                                  mean);
    basis.training_count = static_cast<int>(grids.size());
  }
  grd::io::save_basis(basis, args.output);

  std::cout << "trained " << args.family << " basis on " << grids.size()
            << " grids, " << basis.max_components() << " components"
            << (basis.truncated ? " (rank-truncated)" : "") << "\n";
  if (kind == grd::basis::BasisKind::eigen) {
    std::cout << "  N  cumulative energy\n";
    for (int n = 1; n <= basis.max_components(); ++n) {
      std::cout << "  " << n << "  "
                << format6(100.0 * grd::basis::explained_energy(basis, n))
                << "%\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sample-order

struct OrderArgs {
  std::string basis_path;
  std::string manifest;
  int count = 50;
  std::string criterion = "trace";
  bool uniform = false;
  int resolution_index = -1;
  std::string output;
  std::string scores_output;
};

int run_sample_order(const OrderArgs& args) {
  grd::sampling::SamplingOrder order;
  if (args.uniform) {
    grd::AxisSpec axes;
    if (!args.basis_path.empty()) {
      axes = grd::io::load_basis(args.basis_path).axes;
    } else if (!args.manifest.empty()) {
      const auto dataset = grd::io::load_manifest(args.manifest);
      if (dataset.entries.empty()) {
        grd::fail(grd::ErrorKind::invalid_argument, "manifest is empty");
      }
      axes = grd::io::load_grid(dataset.directory / dataset.entries[0].file)
                 .axes;
    } else {
      grd::fail(grd::ErrorKind::invalid_argument,
                "pass --basis or --manifest");
    }
    const int r = args.resolution_index < 0
                      ? static_cast<int>(axes.resolution_count()) - 1
                      : args.resolution_index;
    order = grd::sampling::uniform_log_bitrate_order(axes, r, args.count);
  } else {
    const auto criterion =
        args.criterion == "logdet"
            ? grd::sampling::UncertaintyCriterion::logdet
            : grd::sampling::UncertaintyCriterion::trace;
    if (args.criterion != "trace" && args.criterion != "logdet") {
      grd::fail(grd::ErrorKind::invalid_argument,
                "criterion must be trace or logdet");
    }
    if (!args.basis_path.empty()) {
      const auto basis = grd::io::load_basis(args.basis_path);
      // Low-rank covariance implied by the trained model.
      const Eigen::MatrixXd sigma = basis.components *
                                    basis.eigenvalues.asDiagonal() *
                                    basis.components.transpose();
      order = grd::sampling::uncertainty_order(sigma, basis.axes, args.count,
                                               criterion);
    } else if (!args.manifest.empty()) {
      const auto dataset = grd::io::load_manifest(args.manifest);
      const auto grids = grd::io::load_split(dataset, "train");
      if (grids.size() < 2) {
        grd::fail(grd::ErrorKind::invalid_argument,
                  "train split holds fewer than 2 grids");
      }
      order = grd::sampling::uncertainty_order(
          grd::sampling::empirical_covariance(grids), grids.front().axes,
          args.count, criterion);
    } else {
      grd::fail(grd::ErrorKind::invalid_argument,
                "pass --basis or --manifest");
    }
  }

  grd::io::write_text_atomic(args.output, grd::io::order_to_json(order));
  if (!args.scores_output.empty()) {
    json j = json::array();
    for (double s : order.scores) j.push_back(s);
    grd::io::write_text_atomic(args.scores_output, j.dump(2) + "\n");
  }
  std::cout << "wrote " << order.indices.size() << " query cells to "
            << args.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructArgs {
  std::string basis_path;
  std::string samples;
  std::string n = "8";
  bool no_constraints = false;
  std::string output;
  std::string diagnostics;
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  int max_iter = 400000;
};

int run_reconstruct(const ReconstructArgs& args) {
  const auto basis = grd::io::load_basis(args.basis_path);
  const auto samples = grd::io::load_samples_csv(args.samples, basis.axes);

  grd::recon::ReconstructionConfig config;
  config.basis_kind = basis.kind;
  if (args.n == "match") {
    config.n_components = {};
  } else {
    try {
      config.n_components = std::stoi(args.n);
    } catch (const std::exception&) {
      grd::fail(grd::ErrorKind::invalid_argument,
                "--n expects an integer or 'match'");
    }
  }
  config.constrained = !args.no_constraints;
  config.solver.abs_tol = args.abs_tol;
  config.solver.rel_tol = args.rel_tol;
  config.solver.max_iter = args.max_iter;

  const auto result = grd::recon::estimate(basis, samples, config);
  grd::io::save_grid(result.grid, args.output);

  json diag;
  diag["n_used"] = result.n_used;
  diag["sample_rmse"] = sig6(result.sample_rmse);
  diag["constrained"] = config.constrained;
  const auto membership = grd::validate_membership(result.grid, 1e-6);
  diag["membership_pass"] = membership.passed;
  diag["membership_violations"] = membership.violations.size();
  if (result.qp_diagnostics) {
    diag["solver"] = {
        {"status", grd::qp::to_string(result.qp_diagnostics->status)},
        {"iterations", result.qp_diagnostics->iterations},
        {"objective", sig6(result.qp_diagnostics->objective)},
        {"primal_residual", result.qp_diagnostics->primal_residual},
        {"dual_residual", result.qp_diagnostics->dual_residual}};
  }
  json coeffs = json::array();
  for (Eigen::Index i = 0; i < result.coefficients.size(); ++i) {
    coeffs.push_back(result.coefficients(i));
  }
  diag["coefficients"] = std::move(coeffs);

  const std::string diag_path =
      args.diagnostics.empty() ? args.output + ".diag.json"
                               : args.diagnostics;
  grd::io::write_text_atomic(diag_path, diag.dump(2) + "\n");
  std::cout << "reconstructed " << basis.axes.cell_count() << " cells from "
            << samples.entries.size() << " samples (n = " << result.n_used
            << ", sample rmse " << format6(result.sample_rmse) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string manifest;
  std::string family = "eigen";
  std::string mode = "s-sweep";
  std::string s_values = "1,3,5,8,30,50";
  std::string n_values = "0,1,2,3,4,5,6,7,8,9,10";
  std::string n = "match";
  int splits = 0;
  double train_frac = 0.8;
  std::uint64_t seed = 1;
  std::string order = "uncertainty";
  int resolution_index = -1;
  std::string format = "json";
  std::string output;
};

struct SplitData {
  std::vector<grd::GrdGrid> train;
  std::vector<grd::GrdGrid> test;
};

SplitData resolve_split(const std::vector<grd::GrdGrid>& all,
                        const std::vector<std::string>& tags,
                        int split_index, const EvalArgs& args) {
  SplitData out;
  if (args.splits == 0) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      (tags[i] == "train" ? out.train : out.test).push_back(all[i]);
    }
    return out;
  }
  std::vector<std::size_t> indices(all.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  shuffle_indices(indices,
                  args.seed + 0x51ED2701ULL * static_cast<std::uint64_t>(
                                                  split_index + 1));
  const auto train_count = static_cast<std::size_t>(
      std::llround(args.train_frac * static_cast<double>(all.size())));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    (i < train_count ? out.train : out.test).push_back(all[indices[i]]);
  }
  return out;
}

grd::basis::EigenBasis train_family(const std::string& family,
                                    const std::vector<grd::GrdGrid>& train,
                                    int n) {
  const auto kind = grd::basis::basis_kind_from_string(family);
  if (kind == grd::basis::BasisKind::eigen) {
    return grd::basis::pca_train(train, n);
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(train.front().axes.cell_count()));
  for (const auto& g : train) mean += grd::flatten(g);
  mean /= static_cast<double>(train.size());
  return kind == grd::basis::BasisKind::polynomial
             ? grd::basis::polynomial_basis(train.front().axes, n, mean)
             : grd::basis::trigonometric_basis(train.front().axes, n, mean);
}

int run_eval(const EvalArgs& args) {
  const auto dataset = grd::io::load_manifest(args.manifest);
  const auto all = grd::io::load_all(dataset);
  std::vector<std::string> tags;
  for (const auto& e : dataset.entries) tags.push_back(e.split);
  if (all.size() < 3) {
    grd::fail(grd::ErrorKind::invalid_argument,
              "evaluation needs at least 3 grids");
  }
  const int rounds = std::max(args.splits, 1);

  // sweep key -> per-split values of each statistic
  struct Accumulator {
    std::vector<double> mean_rmse, worst_rmse, mean_linf, worst_linf;
  };
  std::vector<int> sweep = args.mode == "n-sweep"
                               ? parse_int_list(args.n_values)
                               : parse_int_list(args.s_values);
  std::vector<Accumulator> acc(sweep.size());

  for (int split_index = 0; split_index < rounds; ++split_index) {
    const SplitData data = resolve_split(all, tags, split_index, args);
    if (data.train.size() < 2 || data.test.empty()) {
      grd::fail(grd::ErrorKind::invalid_argument,
                "split leaves too few grids (train " +
                    std::to_string(data.train.size()) + ", test " +
                    std::to_string(data.test.size()) + ")");
    }

    if (args.mode == "n-sweep") {
      const int n_max =
          *std::max_element(sweep.begin(), sweep.end());
      const auto basis =
          train_family(args.family, data.train,
                       std::max(n_max, 1));
      for (std::size_t row = 0; row < sweep.size(); ++row) {
        const int n = std::min(sweep[row], basis.max_components());
        double sum_rmse = 0.0, sum_linf = 0.0;
        double worst_rmse = 0.0, worst_linf = 0.0;
        for (const auto& g : data.test) {
          const auto approx = grd::basis::synthesize(
              basis, grd::basis::project(basis, g, n));
          const double e1 = grd::rmse(approx, g);
          const double e2 = grd::linf_error(approx, g);
          sum_rmse += e1;
          sum_linf += e2;
          worst_rmse = std::max(worst_rmse, e1);
          worst_linf = std::max(worst_linf, e2);
        }
        acc[row].mean_rmse.push_back(sum_rmse /
                                     static_cast<double>(data.test.size()));
        acc[row].mean_linf.push_back(sum_linf /
                                     static_cast<double>(data.test.size()));
        acc[row].worst_rmse.push_back(worst_rmse);
        acc[row].worst_linf.push_back(worst_linf);
      }
      continue;
    }

    // s-sweep: sparse reconstruction against a sampling order.
    const int s_max = *std::max_element(sweep.begin(), sweep.end());
    const int n_request =
        args.n == "match" ? std::min<int>(s_max, static_cast<int>(
                                                     all.front()
                                                         .axes.cell_count()))
                          : std::stoi(args.n);
    const auto basis = train_family(args.family, data.train, n_request);

    grd::sampling::SamplingOrder order;
    if (args.order == "uniform") {
      const int r = args.resolution_index < 0
                        ? static_cast<int>(
                              basis.axes.resolution_count()) -
                              1
                        : args.resolution_index;
      order = grd::sampling::uniform_log_bitrate_order(basis.axes, r, s_max);
    } else {
      order = grd::sampling::uncertainty_order(
          grd::sampling::empirical_covariance(data.train), basis.axes,
          s_max);
    }

    grd::recon::ReconstructionConfig config;
    config.basis_kind = basis.kind;
    if (args.n == "match") {
      config.n_components = {};
    } else {
      config.n_components = std::stoi(args.n);
    }
    const auto table =
        grd::recon::evaluate_method(basis, data.test, order, sweep, config);
    for (std::size_t row = 0; row < table.size(); ++row) {
      acc[row].mean_rmse.push_back(table[row].mean_rmse);
      acc[row].worst_rmse.push_back(table[row].worst_rmse);
      acc[row].mean_linf.push_back(table[row].mean_linf);
      acc[row].worst_linf.push_back(table[row].worst_linf);
    }
  }

  const std::string key = args.mode == "n-sweep" ? "n" : "s";
  json rows = json::array();
  std::ostringstream csv;
  csv << key
      << ",mean_rmse,worst_rmse,mean_linf,worst_linf"
         ",median_mean_rmse,median_worst_rmse,median_mean_linf,"
         "median_worst_linf\n";
  for (std::size_t row = 0; row < sweep.size(); ++row) {
    auto mean_of = [](const std::vector<double>& v) {
      double sum = 0.0;
      for (double x : v) sum += x;
      return sum / static_cast<double>(v.size());
    };
    json entry;
    entry[key] = sweep[row];
    entry["mean_rmse"] = sig6(mean_of(acc[row].mean_rmse));
    entry["worst_rmse"] = sig6(mean_of(acc[row].worst_rmse));
    entry["mean_linf"] = sig6(mean_of(acc[row].mean_linf));
    entry["worst_linf"] = sig6(mean_of(acc[row].worst_linf));
    entry["median_mean_rmse"] = sig6(median_of(acc[row].mean_rmse));
    entry["median_worst_rmse"] = sig6(median_of(acc[row].worst_rmse));
    entry["median_mean_linf"] = sig6(median_of(acc[row].mean_linf));
    entry["median_worst_linf"] = sig6(median_of(acc[row].worst_linf));
    rows.push_back(entry);
    csv << sweep[row] << ',' << format6(mean_of(acc[row].mean_rmse)) << ','
        << format6(mean_of(acc[row].worst_rmse)) << ','
        << format6(mean_of(acc[row].mean_linf)) << ','
        << format6(mean_of(acc[row].worst_linf)) << ','
        << format6(median_of(acc[row].mean_rmse)) << ','
        << format6(median_of(acc[row].worst_rmse)) << ','
        << format6(median_of(acc[row].mean_linf)) << ','
        << format6(median_of(acc[row].worst_linf)) << '\n';
  }

  if (args.format == "csv") {
    grd::io::write_text_atomic(args.output, csv.str());
  } else if (args.format == "json") {
    json j;
    j["mode"] = args.mode;
    j["family"] = args.family;
    j["splits"] = rounds;
    j["rows"] = std::move(rows);
    grd::io::write_text_atomic(args.output, j.dump(2) + "\n");
  } else {
    grd::fail(grd::ErrorKind::invalid_argument,
              "format must be json or csv");
  }
  std::cout << csv.str();
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  std::string samples;
  std::string fitter = "bd";
  std::string dr_mode = "log";
  std::string global_range;
  std::string rd_basis;
  std::string codec_a;
  std::string codec_b;
  std::string output;
  std::string curves_dir;
};

int run_compare(const CompareArgs& args) {
  const auto contents =
      grd::io::load_pairs_csv(args.samples, args.codec_a, args.codec_b);

  grd::codec::CompareOptions options;
  options.fitter = grd::codec::fitter_from_string(args.fitter);
  options.dr_mode = grd::codec::dr_mode_from_string(args.dr_mode);
  grd::codec::RdBasis1D rd_basis_storage;
  if (!args.rd_basis.empty()) {
    rd_basis_storage = grd::io::load_rd_basis(args.rd_basis);
    options.fit.rd_basis = &rd_basis_storage;
  } else if (options.fitter == grd::codec::Fitter::egrd) {
    grd::fail(grd::ErrorKind::invalid_argument,
              "the egrd fitter needs --rd-basis");
  }
  if (!args.global_range.empty()) {
    const auto comma = args.global_range.find(',');
    if (comma == std::string::npos) {
      grd::fail(grd::ErrorKind::invalid_argument,
                "--global-range expects 'lo,hi' in kbps");
    }
    try {
      options.global_range = {{std::stod(args.global_range.substr(0, comma)),
                               std::stod(args.global_range.substr(comma + 1))}};
    } catch (const std::exception&) {
      grd::fail(grd::ErrorKind::invalid_argument,
                "--global-range expects 'lo,hi' in kbps");
    }
  }

  const auto report = grd::codec::compare(contents, options);
  grd::io::write_text_atomic(args.output, grd::io::report_to_json(report));

  // Plot-ready per-content curves.
  const fs::path curves_dir =
      args.curves_dir.empty()
          ? fs::path(args.output).replace_extension("") += "_curves"
          : fs::path(args.curves_dir);
  for (std::size_t i = 0; i < contents.size(); ++i) {
    const auto& result = report.contents[i];
    if (result.no_overlap) continue;
    const auto rd_a =
        grd::codec::fit_rd(options.fitter, contents[i].codec_a, options.fit);
    const auto rd_b =
        grd::codec::fit_rd(options.fitter, contents[i].codec_b, options.fit);
    std::ostringstream csv;
    csv << "x,rd_a,rd_b\n";
    csv.precision(10);
    const int steps = 200;
    for (int k = 0; k <= steps; ++k) {
      const double x =
          result.x_lo + (result.x_hi - result.x_lo) * k / steps;
      csv << x << ',' << rd_a.eval(x, true) << ',' << rd_b.eval(x, true)
          << '\n';
    }
    grd::io::write_text_atomic(
        curves_dir / (contents[i].content_id + ".csv"), csv.str());
  }

  std::cout << "fitter " << args.fitter << ", mode " << args.dr_mode
            << ": mean quality gain " << format6(report.mean_delta_q)
            << ", mean bitrate change " << format6(report.mean_delta_r)
            << " over " << report.aggregated_count << " contents\n";
  for (const auto& c : report.contents) {
    if (c.no_overlap) {
      std::cout << "  " << c.content_id << ": NO_OVERLAP\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-distortion surface toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic surface corpus");
  synth_cmd->add_option("--seed", synth_args.seed, "RNG seed");
  synth_cmd->add_option("--count", synth_args.count, "number of surfaces")
      ->required();
  synth_cmd->add_option("--axes", synth_args.axes,
                        "lattice preset: default|desk");
  synth_cmd->add_option("--output", synth_args.output, "output directory")
      ->required();
  synth_cmd->add_option("--train-frac", synth_args.train_frac,
                        "fraction tagged train in the manifest");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Fit a surface basis");
  train_cmd->add_option("--manifest", train_args.manifest, "dataset manifest")
      ->required();
  train_cmd->add_option("--family", train_args.family,
                        "eigen|polynomial|trigonometric");
  train_cmd->add_option("--n", train_args.n, "component count");
  train_cmd->add_option("--output", train_args.output, "basis file")
      ->required();
  train_cmd->add_option("--split", train_args.split, "manifest split to use");
  train_cmd->add_flag("--rd1d", train_args.rd1d,
                      "train the 1-D rate-quality basis instead");

  OrderArgs order_args;
  auto* order_cmd =
      app.add_subcommand("sample-order", "Produce a fixed query order");
  order_cmd->add_option("--basis", order_args.basis_path, "basis file");
  order_cmd->add_option("--manifest", order_args.manifest,
                        "dataset manifest");
  order_cmd->add_option("--count", order_args.count, "cells to query");
  order_cmd->add_option("--criterion", order_args.criterion,
                        "trace|logdet");
  order_cmd->add_flag("--uniform", order_args.uniform,
                      "log-bitrate baseline instead of uncertainty");
  order_cmd->add_option("--resolution-index", order_args.resolution_index,
                        "resolution for the uniform baseline");
  order_cmd->add_option("--output", order_args.output, "order JSON")
      ->required();
  order_cmd->add_option("--scores", order_args.scores_output,
                        "optional per-step score JSON");

  ReconstructArgs recon_args;
  auto* recon_cmd = app.add_subcommand(
      "reconstruct", "Estimate a full surface from sparse samples");
  recon_cmd->add_option("--basis", recon_args.basis_path, "basis file")
      ->required();
  recon_cmd->add_option("--samples", recon_args.samples, "sample CSV")
      ->required();
  recon_cmd->add_option("--n", recon_args.n,
                        "component count or 'match'");
  recon_cmd->add_flag("--no-constraints", recon_args.no_constraints,
                      "plain least squares (reported unclipped)");
  recon_cmd->add_option("--output", recon_args.output, "grid JSON")
      ->required();
  recon_cmd->add_option("--diagnostics", recon_args.diagnostics,
                        "diagnostics JSON (default <output>.diag.json)");
  recon_cmd->add_option("--abs-tol", recon_args.abs_tol, "solver abs tol");
  recon_cmd->add_option("--rel-tol", recon_args.rel_tol, "solver rel tol");
  recon_cmd->add_option("--max-iter", recon_args.max_iter,
                        "solver iteration cap");

  EvalArgs eval_args;
  auto* eval_cmd =
      app.add_subcommand("eval", "Reconstruction error tables");
  eval_cmd->add_option("--manifest", eval_args.manifest, "dataset manifest")
      ->required();
  eval_cmd->add_option("--family", eval_args.family,
                       "eigen|polynomial|trigonometric");
  eval_cmd->add_option("--mode", eval_args.mode, "s-sweep|n-sweep");
  eval_cmd->add_option("--s-values", eval_args.s_values,
                       "comma-separated sample budgets");
  eval_cmd->add_option("--n-values", eval_args.n_values,
                       "comma-separated component counts (n-sweep)");
  eval_cmd->add_option("--n", eval_args.n,
                       "component count or 'match' (s-sweep)");
  eval_cmd->add_option("--splits", eval_args.splits,
                       "random re-splits; 0 honours the manifest tags");
  eval_cmd->add_option("--train-frac", eval_args.train_frac,
                       "train fraction for random re-splits");
  eval_cmd->add_option("--seed", eval_args.seed, "split RNG seed");
  eval_cmd->add_option("--order", eval_args.order, "uncertainty|uniform");
  eval_cmd->add_option("--resolution-index", eval_args.resolution_index,
                       "resolution for the uniform order");
  eval_cmd->add_option("--format", eval_args.format, "json|csv");
  eval_cmd->add_option("--output", eval_args.output, "report file")
      ->required();

  CompareArgs compare_args;
  auto* compare_cmd =
      app.add_subcommand("compare", "Codec comparison from paired samples");
  compare_cmd->add_option("--samples", compare_args.samples, "pairs CSV")
      ->required();
  compare_cmd->add_option("--fitter", compare_args.fitter,
                          "bd|pchip|logistic|egrd");
  compare_cmd->add_option("--dr-mode", compare_args.dr_mode, "log|exact");
  compare_cmd->add_option("--global-range", compare_args.global_range,
                          "evaluate over 'lo,hi' kbps instead of the overlap");
  compare_cmd->add_option("--rd-basis", compare_args.rd_basis,
                          "1-D rate-quality basis (egrd fitter)");
  compare_cmd->add_option("--codec-a", compare_args.codec_a,
                          "label of the reference codec");
  compare_cmd->add_option("--codec-b", compare_args.codec_b,
                          "label of the challenger codec");
  compare_cmd->add_option("--output", compare_args.output, "report JSON")
      ->required();
  compare_cmd->add_option("--curves-dir", compare_args.curves_dir,
                          "directory for plot-ready curve CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << e.what() << "\n\n" << app.help() << std::endl;
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (order_cmd->parsed()) return run_sample_order(order_args);
    if (recon_cmd->parsed()) return run_reconstruct(recon_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (compare_cmd->parsed()) return run_compare(compare_args);
  } catch (const grd::Error& e) {
    emit_error_and_exit(e.kind(), e.what());
  } catch (const std::exception& e) {
    emit_error_and_exit(grd::ErrorKind::structural, e.what());
  }
  return 0;
}
