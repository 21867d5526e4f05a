#include "grd/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "grd/errors.hpp"

namespace grd::io {

using nlohmann::json;

namespace {

json parse(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    fail(ErrorKind::parse, "malformed JSON in " + what);
  }
  return j;
}

std::vector<double> doubles_of(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_array()) {
    fail(ErrorKind::parse, "missing or non-array field '" + key + "'");
  }
  std::vector<double> out;
  out.reserve(j[key].size());
  for (const auto& v : j[key]) {
    if (!v.is_number()) {
      fail(ErrorKind::parse, "non-numeric entry in '" + key + "'");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

json axes_to_json(const AxisSpec& axes) {
  json j;
  j["bitrates_kbps"] = axes.bitrates_kbps;
  j["resolutions_diag"] = axes.resolutions_diag;
  if (!axes.resolution_sizes.empty()) {
    json sizes = json::array();
    for (const auto& wh : axes.resolution_sizes) {
      sizes.push_back({wh[0], wh[1]});
    }
    j["resolutions_wh"] = sizes;
  }
  return j;
}

AxisSpec axes_from_json(const json& j) {
  AxisSpec axes;
  axes.bitrates_kbps = doubles_of(j, "bitrates_kbps");
  axes.resolutions_diag = doubles_of(j, "resolutions_diag");
  if (j.contains("resolutions_wh")) {
    for (const auto& wh : j["resolutions_wh"]) {
      if (!wh.is_array() || wh.size() != 2) {
        fail(ErrorKind::parse, "resolutions_wh entries must be [w, h] pairs");
      }
      axes.resolution_sizes.push_back({wh[0].get<int>(), wh[1].get<int>()});
    }
  }
  validate_axes(axes);
  return axes;
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path dir = path.has_parent_path() ? path.parent_path()
                                              : fs::path(".");
  fs::create_directories(dir, ec);
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      fail(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    }
    out << content;
    out.flush();
    if (!out) {
      fail(ErrorKind::io, "write to " + tmp.string() + " failed");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorKind::io,
         "atomic rename to " + path.string() + " failed: " + ec.message());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::io, "cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string grid_to_json(const GrdGrid& grid) {
  json j = axes_to_json(grid.axes);
  json rows = json::array();
  for (Eigen::Index b = 0; b < grid.values.rows(); ++b) {
    json row = json::array();
    for (Eigen::Index r = 0; r < grid.values.cols(); ++r) {
      row.push_back(grid.values(b, r));
    }
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  j["metadata"] = grid.metadata;
  return j.dump(2) + "\n";
}

GrdGrid grid_from_json(const std::string& text) {
  const json j = parse(text, "grid file");
  AxisSpec axes = axes_from_json(j);
  if (!j.contains("values") || !j["values"].is_array()) {
    fail(ErrorKind::parse, "grid file lacks a 'values' array");
  }
  const auto nb = static_cast<Eigen::Index>(axes.bitrate_count());
  const auto nr = static_cast<Eigen::Index>(axes.resolution_count());
  if (static_cast<Eigen::Index>(j["values"].size()) != nb) {
    fail(ErrorKind::parse, "grid row count does not match the bitrate axis");
  }
  Eigen::MatrixXd values(nb, nr);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto& row = j["values"][static_cast<std::size_t>(b)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != nr) {
      fail(ErrorKind::parse,
           "grid column count does not match the resolution axis");
    }
    for (Eigen::Index r = 0; r < nr; ++r) {
      const auto& v = row[static_cast<std::size_t>(r)];
      if (!v.is_number()) {
        fail(ErrorKind::parse, "non-numeric grid value");
      }
      values(b, r) = v.get<double>();
    }
  }
  std::map<std::string, std::string> metadata;
  if (j.contains("metadata")) {
    for (const auto& [key, value] : j["metadata"].items()) {
      metadata[key] = value.is_string() ? value.get<std::string>()
                                        : value.dump();
    }
  }
  return make_grid(std::move(axes), std::move(values), std::move(metadata));
}

void save_grid(const GrdGrid& grid, const std::filesystem::path& path) {
  write_text_atomic(path, grid_to_json(grid));
}

GrdGrid load_grid(const std::filesystem::path& path) {
  return grid_from_json(read_text(path));
}

namespace {

json matrix_rows(const Eigen::MatrixXd& m, bool by_column) {
  // by_column: one JSON row per matrix column (components are stored
  // column-wise in memory but written one component per row).
  json rows = json::array();
  const Eigen::Index outer = by_column ? m.cols() : m.rows();
  const Eigen::Index inner = by_column ? m.rows() : m.cols();
  for (Eigen::Index i = 0; i < outer; ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < inner; ++k) {
      row.push_back(by_column ? m(k, i) : m(i, k));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string basis_to_json(const basis::EigenBasis& b) {
  json j;
  j["axes"] = axes_to_json(b.axes);
  j["mean"] = std::vector<double>(b.mean.data(), b.mean.data() + b.mean.size());
  j["components"] = matrix_rows(b.components, true);
  j["eigenvalues"] = std::vector<double>(
      b.eigenvalues.data(), b.eigenvalues.data() + b.eigenvalues.size());
  j["total_variance"] = b.total_variance;
  j["training_count"] = b.training_count;
  j["kind"] = basis::to_string(b.kind);
  j["truncated"] = b.truncated;
  return j.dump(2) + "\n";
}

basis::EigenBasis basis_from_json(const std::string& text) {
  const json j = parse(text, "basis file");
  if (!j.contains("axes")) {
    fail(ErrorKind::parse, "basis file lacks 'axes'");
  }
  basis::EigenBasis b;
  b.axes = axes_from_json(j["axes"]);
  const auto k = static_cast<Eigen::Index>(b.axes.cell_count());

  const std::vector<double> mean = doubles_of(j, "mean");
  if (static_cast<Eigen::Index>(mean.size()) != k) {
    fail(ErrorKind::parse, "basis mean length does not match the axes");
  }
  b.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), k);

  if (!j.contains("components") || !j["components"].is_array()) {
    fail(ErrorKind::parse, "basis file lacks 'components'");
  }
  const auto n = static_cast<Eigen::Index>(j["components"].size());
  b.components.resize(k, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& row = j["components"][static_cast<std::size_t>(c)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k) {
      fail(ErrorKind::parse, "component " + std::to_string(c) +
                                 " length does not match the axes");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      b.components(i, c) = row[static_cast<std::size_t>(i)].get<double>();
    }
  }

  const std::vector<double> evals = doubles_of(j, "eigenvalues");
  if (static_cast<Eigen::Index>(evals.size()) != n) {
    fail(ErrorKind::parse, "eigenvalue count does not match the components");
  }
  b.eigenvalues = Eigen::Map<const Eigen::VectorXd>(
      evals.data(), static_cast<Eigen::Index>(evals.size()));

  b.total_variance = j.value("total_variance", 0.0);
  b.training_count = j.value("training_count", 0);
  b.kind = basis::basis_kind_from_string(j.value("kind", "eigen"));
  b.truncated = j.value("truncated", false);
  return b;
}

void save_basis(const basis::EigenBasis& basis,
                const std::filesystem::path& path) {
  write_text_atomic(path, basis_to_json(basis));
}

basis::EigenBasis load_basis(const std::filesystem::path& path) {
  return basis_from_json(read_text(path));
}

std::string rd_basis_to_json(const codec::RdBasis1D& b) {
  json j;
  j["bitrates_kbps"] = b.bitrates_kbps;
  j["mean"] = std::vector<double>(b.mean.data(), b.mean.data() + b.mean.size());
  j["components"] = matrix_rows(b.components, true);
  j["eigenvalues"] = std::vector<double>(
      b.eigenvalues.data(), b.eigenvalues.data() + b.eigenvalues.size());
  j["total_variance"] = b.total_variance;
  j["training_count"] = b.training_count;
  j["truncated"] = b.truncated;
  j["kind"] = "eigen-rd1d";
  return j.dump(2) + "\n";
}

codec::RdBasis1D rd_basis_from_json(const std::string& text) {
  const json j = parse(text, "rate-quality basis file");
  codec::RdBasis1D b;
  b.bitrates_kbps = doubles_of(j, "bitrates_kbps");
  if (b.bitrates_kbps.size() < 2) {
    fail(ErrorKind::parse, "rate-quality basis needs at least 2 bitrates");
  }
  const auto k = static_cast<Eigen::Index>(b.bitrates_kbps.size());
  const std::vector<double> mean = doubles_of(j, "mean");
  if (static_cast<Eigen::Index>(mean.size()) != k) {
    fail(ErrorKind::parse, "mean length does not match the bitrate grid");
  }
  b.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), k);
  const auto n = static_cast<Eigen::Index>(j["components"].size());
  b.components.resize(k, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& row = j["components"][static_cast<std::size_t>(c)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k) {
      fail(ErrorKind::parse, "component length does not match the grid");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      b.components(i, c) = row[static_cast<std::size_t>(i)].get<double>();
    }
  }
  const std::vector<double> evals = doubles_of(j, "eigenvalues");
  b.eigenvalues = Eigen::Map<const Eigen::VectorXd>(
      evals.data(), static_cast<Eigen::Index>(evals.size()));
  b.total_variance = j.value("total_variance", 0.0);
  b.training_count = j.value("training_count", 0);
  b.truncated = j.value("truncated", false);
  return b;
}

void save_rd_basis(const codec::RdBasis1D& basis,
                   const std::filesystem::path& path) {
  write_text_atomic(path, rd_basis_to_json(basis));
}

codec::RdBasis1D load_rd_basis(const std::filesystem::path& path) {
  return rd_basis_from_json(read_text(path));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    // Trim surrounding whitespace.
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos
                         ? ""
                         : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(text, &consumed);
    if (consumed != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    fail(ErrorKind::parse, "cannot parse " + what + " from '" + text + "'");
  }
}

int exact_label_index(const std::vector<double>& labels, double value,
                      const std::string& what) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == value) return static_cast<int>(i);
  }
  fail(ErrorKind::parse,
       what + " " + std::to_string(value) + " does not match any axis label");
}

}  // namespace

SampleSet load_samples_csv(const std::filesystem::path& path,
                           const AxisSpec& axes) {
  const std::string text = read_text(path);
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line)) {
    fail(ErrorKind::parse, "sample file is empty");
  }
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"bitrate_kbps", "resolution_diag",
                                         "quality"}) {
    fail(ErrorKind::parse,
         "sample file header must be bitrate_kbps,resolution_diag,quality");
  }
  std::vector<SampleEntry> entries;
  while (std::getline(stream, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      fail(ErrorKind::parse, "sample row needs 3 fields: " + line);
    }
    SampleEntry e;
    e.bitrate_index = exact_label_index(
        axes.bitrates_kbps, parse_double(fields[0], "bitrate"), "bitrate");
    e.resolution_index =
        exact_label_index(axes.resolutions_diag,
                          parse_double(fields[1], "resolution"), "resolution");
    e.quality = parse_double(fields[2], "quality");
    entries.push_back(e);
  }
  return make_sample_set(axes, std::move(entries));
}

void save_samples_csv(const SampleSet& samples,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "bitrate_kbps,resolution_diag,quality\n";
  out.precision(17);
  for (const auto& e : samples.entries) {
    out << samples.axes.bitrates_kbps[static_cast<std::size_t>(
               e.bitrate_index)]
        << ','
        << samples.axes.resolutions_diag[static_cast<std::size_t>(
               e.resolution_index)]
        << ',' << e.quality << '\n';
  }
  write_text_atomic(path, out.str());
}

std::vector<codec::RdSamplePair> load_pairs_csv(
    const std::filesystem::path& path, const std::string& codec_a,
    const std::string& codec_b) {
  const std::string text = read_text(path);
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line)) {
    fail(ErrorKind::parse, "pairs file is empty");
  }
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"content_id", "codec",
                                         "bitrate_kbps", "quality"}) {
    fail(ErrorKind::parse,
         "pairs file header must be content_id,codec,bitrate_kbps,quality");
  }

  std::string label_a = codec_a, label_b = codec_b;
  std::vector<std::string> content_order;
  std::map<std::string, codec::RdSamplePair> by_content;

  while (std::getline(stream, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      fail(ErrorKind::parse, "pairs row needs 4 fields: " + line);
    }
    const std::string& content = fields[0];
    const std::string& codec = fields[1];
    if (label_a.empty()) {
      label_a = codec;
    } else if (label_b.empty() && codec != label_a) {
      label_b = codec;
    }
    if (codec != label_a && codec != label_b) {
      fail(ErrorKind::parse, "unexpected codec label '" + codec +
                                 "' (comparing '" + label_a + "' vs '" +
                                 label_b + "')");
    }
    auto [it, inserted] = by_content.try_emplace(content);
    if (inserted) {
      it->second.content_id = content;
      content_order.push_back(content);
    }
    RatePoint point{parse_double(fields[2], "bitrate"),
                    parse_double(fields[3], "quality")};
    (codec == label_a ? it->second.codec_a : it->second.codec_b)
        .push_back(point);
  }
  if (label_b.empty()) {
    fail(ErrorKind::parse, "pairs file holds fewer than two codec labels");
  }

  std::vector<codec::RdSamplePair> out;
  out.reserve(content_order.size());
  for (const auto& content : content_order) {
    out.push_back(std::move(by_content[content]));
  }
  return out;
}

Dataset load_manifest(const std::filesystem::path& manifest_path) {
  const json j = parse(read_text(manifest_path), "manifest");
  if (!j.contains("grids") || !j["grids"].is_array()) {
    fail(ErrorKind::parse, "manifest lacks a 'grids' array");
  }
  Dataset dataset;
  dataset.directory = manifest_path.has_parent_path()
                          ? manifest_path.parent_path()
                          : std::filesystem::path(".");
  for (const auto& entry : j["grids"]) {
    if (!entry.contains("file")) {
      fail(ErrorKind::parse, "manifest entry lacks 'file'");
    }
    ManifestEntry e;
    e.file = entry["file"].get<std::string>();
    e.split = entry.value("split", "train");
    if (e.split != "train" && e.split != "test") {
      fail(ErrorKind::parse,
           "manifest split tag must be train or test, got '" + e.split + "'");
    }
    dataset.entries.push_back(std::move(e));
  }
  return dataset;
}

void save_manifest(const Dataset& dataset,
                   const std::filesystem::path& manifest_path) {
  json grids = json::array();
  for (const auto& e : dataset.entries) {
    grids.push_back({{"file", e.file}, {"split", e.split}});
  }
  json j;
  j["grids"] = std::move(grids);
  write_text_atomic(manifest_path, j.dump(2) + "\n");
}

std::vector<GrdGrid> load_split(const Dataset& dataset,
                                const std::string& split) {
  std::vector<GrdGrid> grids;
  for (const auto& e : dataset.entries) {
    if (e.split == split) {
      grids.push_back(load_grid(dataset.directory / e.file));
    }
  }
  return grids;
}

std::vector<GrdGrid> load_all(const Dataset& dataset) {
  std::vector<GrdGrid> grids;
  for (const auto& e : dataset.entries) {
    grids.push_back(load_grid(dataset.directory / e.file));
  }
  return grids;
}

std::string order_to_json(const sampling::SamplingOrder& order) {
  json pairs = json::array();
  const auto nr = order.axes.resolution_count();
  for (int idx : order.indices) {
    const auto b = static_cast<std::size_t>(idx) / nr;
    const auto r = static_cast<std::size_t>(idx) % nr;
    pairs.push_back(
        {order.axes.bitrates_kbps[b], order.axes.resolutions_diag[r]});
  }
  return pairs.dump(2) + "\n";
}

namespace {

double sig6(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  std::ostringstream tmp;
  tmp.precision(6);
  tmp << v;
  return std::stod(tmp.str());
}

}  // namespace

std::string report_to_json(const codec::CodecComparisonReport& report) {
  json contents = json::array();
  for (const auto& c : report.contents) {
    json entry;
    entry["content_id"] = c.content_id;
    entry["no_overlap"] = c.no_overlap;
    if (!c.no_overlap) {
      entry["delta_q"] = sig6(c.delta_q);
      entry["delta_r"] = sig6(c.delta_r);
      entry["extrapolated"] = c.extrapolated;
    }
    entry["bitrate_window"] = {sig6(c.x_lo), sig6(c.x_hi)};
    entry["quality_window"] = {sig6(c.z_lo), sig6(c.z_hi)};
    entry["rd_monotone"] = {{"a", c.rd_a.monotone}, {"b", c.rd_b.monotone}};
    entry["dr_monotone"] = {{"a", c.dr_a.monotone}, {"b", c.dr_b.monotone}};
    entry["fit_converged"] = {{"a", c.rd_a.converged},
                              {"b", c.rd_b.converged}};
    entry["max_fit_residual"] = {{"a", sig6(c.rd_a.max_abs_residual)},
                                 {"b", sig6(c.rd_b.max_abs_residual)}};
    contents.push_back(std::move(entry));
  }
  json j;
  j["fitter"] = codec::to_string(report.fitter);
  j["dr_mode"] = codec::to_string(report.dr_mode);
  j["bitrate_space"] =
      report.fitter == codec::Fitter::egrd ? "linear_kbps" : "log10_kbps";
  j["contents"] = std::move(contents);
  j["mean_delta_q"] = sig6(report.mean_delta_q);
  j["mean_delta_r"] = sig6(report.mean_delta_r);
  j["aggregated_count"] = report.aggregated_count;
  return j.dump(2) + "\n";
}

}  // namespace grd::io
