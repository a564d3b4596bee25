#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brownent/langevin.hpp"
#include "brownent/phase_space.hpp"

namespace brownent {

/// `traj,t,x1,...,xN`, one row per (trajectory, recorded time).
void write_trajectories_csv(const std::filesystem::path& path, const EnsembleStore& store);

/// `traj,t,x,p` for an underdamped ensemble.
void write_phase_csv(const std::filesystem::path& path, const PhaseEnsemble& ensemble);

/// `traj,xj_minus,x1,...,xN,xj_plus`.
void write_slices_csv(const std::filesystem::path& path, const EnsembleSlices& slices);

/// Metadata needed to interpret a slice CSV. `j` is one-based in the JSON
/// form and zero-based here.
struct SliceSchema {
  std::size_t dim = 2;
  std::size_t j = 0;
  double eps = 0.0;
  double t = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::optional<OverdampedModel> model;
};

SliceSchema schema_of(const EnsembleSlices& slices);
std::string slice_sidecar_json(const SliceSchema& schema);
SliceSchema parse_slice_sidecar(std::string_view json_text);

void write_slice_sidecar(const std::filesystem::path& path, const SliceSchema& schema);
SliceSchema read_slice_sidecar(const std::filesystem::path& path);

/// Expected header for a slice CSV with `dim` coordinates.
std::vector<std::string> slice_header(std::size_t dim);

struct IngestResult {
  EnsembleSlices slices;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;       // malformed or non-finite
  std::vector<std::size_t> dropped_lines;  // 1-based line numbers
};

/// Reads a slice CSV against `schema`. Throws SchemaMismatch when the header
/// does not match, Io when the file is missing or empty, and
/// InsufficientSamples when no row survives validation.
IngestResult ingest_slices_csv(const std::filesystem::path& path, const SliceSchema& schema);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace brownent
