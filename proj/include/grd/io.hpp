#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "grd/basis.hpp"
#include "grd/codec_compare.hpp"
#include "grd/grid.hpp"
#include "grd/sampling.hpp"

namespace grd::io {

/// Writes via a temporary file in the same directory plus an atomic rename,
/// so readers never observe a half-written artifact.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

std::string read_text(const std::filesystem::path& path);

// Grid files: {"bitrates_kbps": [...], "resolutions_diag": [...],
//              "values": [[row per bitrate]], "metadata": {...}}.
std::string grid_to_json(const GrdGrid& grid);
GrdGrid grid_from_json(const std::string& text);
void save_grid(const GrdGrid& grid, const std::filesystem::path& path);
GrdGrid load_grid(const std::filesystem::path& path);

// Basis files carry the axes, mean, per-component rows, eigenvalues and
// training bookkeeping.
std::string basis_to_json(const basis::EigenBasis& basis);
basis::EigenBasis basis_from_json(const std::string& text);
void save_basis(const basis::EigenBasis& basis,
                const std::filesystem::path& path);
basis::EigenBasis load_basis(const std::filesystem::path& path);

// 1-D rate-quality basis for the codec comparison egrd fitter.
std::string rd_basis_to_json(const codec::RdBasis1D& basis);
codec::RdBasis1D rd_basis_from_json(const std::string& text);
void save_rd_basis(const codec::RdBasis1D& basis,
                   const std::filesystem::path& path);
codec::RdBasis1D load_rd_basis(const std::filesystem::path& path);

/// Sample CSV: header `bitrate_kbps,resolution_diag,quality`; the labels
/// must match the axes exactly (no nearest-neighbour snapping).
SampleSet load_samples_csv(const std::filesystem::path& path,
                           const AxisSpec& axes);
void save_samples_csv(const SampleSet& samples,
                      const std::filesystem::path& path);

/// Codec comparison pairs CSV: header
/// `content_id,codec,bitrate_kbps,quality` with exactly two codec labels.
/// Codec A is the label of the first row (or `codec_a` when given).
std::vector<codec::RdSamplePair> load_pairs_csv(
    const std::filesystem::path& path, const std::string& codec_a = "",
    const std::string& codec_b = "");

/// Dataset manifest: {"grids": [{"file": name, "split": "train"|"test"}]}.
struct ManifestEntry {
  std::string file;
  std::string split;  // "train" or "test"
};

struct Dataset {
  std::filesystem::path directory;
  std::vector<ManifestEntry> entries;
};

Dataset load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const Dataset& dataset,
                   const std::filesystem::path& manifest_path);

std::vector<GrdGrid> load_split(const Dataset& dataset,
                                const std::string& split);
std::vector<GrdGrid> load_all(const Dataset& dataset);

/// Sampling order file: a JSON list of [bitrate_kbps, resolution_diag]
/// pairs in query order.
std::string order_to_json(const sampling::SamplingOrder& order);

std::string report_to_json(const codec::CodecComparisonReport& report);

}  // namespace grd::io
