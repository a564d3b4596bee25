#include "brownent/ensemble_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "brownent/csv.hpp"
#include "json.hpp"

namespace brownent {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

namespace {

void flush_to(const std::filesystem::path& path, const std::ostringstream& buf) {
  write_text_file(path, buf.str());
}

}  // namespace

void write_trajectories_csv(const std::filesystem::path& path, const EnsembleStore& store) {
  std::ostringstream os;
  std::vector<std::string> header{"traj", "t"};
  for (std::size_t i = 0; i < store.dim(); ++i) header.push_back("x" + std::to_string(i + 1));
  csv::write_header(os, header);
  std::vector<double> row(store.dim() + 2);
  for (std::size_t k = 0; k < store.n_traj(); ++k) {
    for (std::size_t s = 0; s < store.times().size(); ++s) {
      row[0] = static_cast<double>(k);
      row[1] = store.times()[s];
      const auto p = store.point(s, k);
      std::copy(p.begin(), p.end(), row.begin() + 2);
      csv::write_row(os, row);
    }
  }
  flush_to(path, os);
}

void write_phase_csv(const std::filesystem::path& path, const PhaseEnsemble& ensemble) {
  std::ostringstream os;
  const std::vector<std::string> header{"traj", "t", "x", "p"};
  csv::write_header(os, header);
  const std::size_t n = ensemble.n_traj;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t s = 0; s < ensemble.times.size(); ++s) {
      const double row[4] = {static_cast<double>(k), ensemble.times[s], ensemble.x[s * n + k],
                             ensemble.p[s * n + k]};
      csv::write_row(os, row);
    }
  }
  flush_to(path, os);
}

std::vector<std::string> slice_header(std::size_t dim) {
  std::vector<std::string> h{"traj", "xj_minus"};
  for (std::size_t i = 0; i < dim; ++i) h.push_back("x" + std::to_string(i + 1));
  h.push_back("xj_plus");
  return h;
}

void write_slices_csv(const std::filesystem::path& path, const EnsembleSlices& slices) {
  std::ostringstream os;
  csv::write_header(os, slice_header(slices.dim));
  std::vector<double> row(slices.dim + 3);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    row[0] = static_cast<double>(slices.traj[i]);
    row[1] = slices.xj_minus[i];
    const auto p = slices.point(i);
    std::copy(p.begin(), p.end(), row.begin() + 2);
    row[slices.dim + 2] = slices.xj_plus[i];
    csv::write_row(os, row);
  }
  flush_to(path, os);
}

SliceSchema schema_of(const EnsembleSlices& slices) {
  SliceSchema s;
  s.dim = slices.dim;
  s.j = slices.j;
  s.eps = slices.eps;
  s.t = slices.t;
  s.dt = slices.dt;
  s.seed = slices.seed;
  s.model = slices.model;
  return s;
}

std::string slice_sidecar_json(const SliceSchema& schema) {
  json doc;
  doc["dim"] = schema.dim;
  doc["j"] = schema.j + 1;
  doc["eps"] = schema.eps;
  doc["t"] = schema.t;
  doc["dt"] = schema.dt;
  doc["seed"] = schema.seed;
  if (schema.model) {
    const auto& m = *schema.model;
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.stiffness.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.stiffness.cols(); ++c) row.push_back(m.stiffness(r, c));
      rows.push_back(row);
    }
    doc["model"] = {{"stiffness", rows}, {"temps", m.temps}};
    if (!m.quartic.empty()) doc["model"]["quartic"] = m.quartic;
  } else {
    doc["model"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

SliceSchema parse_slice_sidecar(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("sidecar is not valid JSON: ") + e.what());
  }
  SliceSchema s;
  try {
    s.dim = doc.at("dim").get<std::size_t>();
    const auto j1 = doc.at("j").get<std::size_t>();
    if (j1 < 1 || j1 > s.dim) throw Error(ErrorCode::SchemaMismatch, "sidecar j out of range");
    s.j = j1 - 1;
    s.eps = doc.at("eps").get<double>();
    s.t = doc.at("t").get<double>();
    s.dt = doc.value("dt", 0.0);
    s.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("model") && !doc["model"].is_null()) {
      const auto& jm = doc["model"];
      OverdampedModel m;
      const auto rows = jm.at("stiffness");
      const auto n = static_cast<Eigen::Index>(rows.size());
      m.stiffness.resize(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(n)) {
          throw Error(ErrorCode::SchemaMismatch, "sidecar stiffness must be square");
        }
        for (Eigen::Index c = 0; c < n; ++c) {
          m.stiffness(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
      }
      m.temps = jm.at("temps").get<std::vector<double>>();
      if (jm.contains("quartic")) m.quartic = jm["quartic"].get<std::vector<double>>();
      try {
        m.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::SchemaMismatch, std::string("sidecar model: ") + e.what());
      }
      if (m.size() != s.dim) throw Error(ErrorCode::SchemaMismatch, "sidecar model size differs from dim");
      s.model = std::move(m);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("sidecar field error: ") + e.what());
  }
  if (!(s.eps > 0.0)) throw Error(ErrorCode::SchemaMismatch, "sidecar eps must be positive");
  return s;
}

void write_slice_sidecar(const std::filesystem::path& path, const SliceSchema& schema) {
  write_text_file(path, slice_sidecar_json(schema));
}

SliceSchema read_slice_sidecar(const std::filesystem::path& path) {
  return parse_slice_sidecar(read_text_file(path));
}

IngestResult ingest_slices_csv(const std::filesystem::path& path, const SliceSchema& schema) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  // Skip leading blank lines to find the header.
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw Error(ErrorCode::Io, "file is empty: " + path.string());

  const auto expected = slice_header(schema.dim);
  const auto fields = csv::split(line);
  bool match = fields.size() == expected.size();
  for (std::size_t i = 0; match && i < fields.size(); ++i) match = fields[i] == expected[i];
  if (!match) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::SchemaMismatch,
                "header '" + line + "' does not match expected '" + want + "'");
  }

  IngestResult result;
  auto& s = result.slices;
  s.dim = schema.dim;
  s.j = schema.j;
  s.eps = schema.eps;
  s.t = schema.t;
  s.dt = schema.dt;
  s.seed = schema.seed;
  s.model = schema.model;

  std::vector<double> vals(expected.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.rows_read;
    const auto cols = csv::split(line);
    bool ok = cols.size() == expected.size();
    for (std::size_t i = 0; ok && i < cols.size(); ++i) {
      const auto v = csv::parse(cols[i]);
      ok = v && std::isfinite(*v);
      if (ok) vals[i] = *v;
    }
    if (ok && (vals[0] < 0.0 || vals[0] != std::floor(vals[0]))) ok = false;
    if (!ok) {
      ++result.rows_dropped;
      result.dropped_lines.push_back(line_no);
      continue;
    }
    s.traj.push_back(static_cast<std::uint64_t>(vals[0]));
    s.xj_minus.push_back(vals[1]);
    s.x.insert(s.x.end(), vals.begin() + 2, vals.begin() + 2 + static_cast<std::ptrdiff_t>(schema.dim));
    s.xj_plus.push_back(vals[schema.dim + 2]);
  }
  if (s.size() == 0) {
    throw Error(ErrorCode::InsufficientSamples, "no valid rows in " + path.string());
  }
  return result;
}

}  // namespace brownent
