#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinscale/model.hpp"

namespace spinscale {

inline constexpr const char* kToolVersion = "spinscale 0.1.0";
inline constexpr int kModelVersion = 1;

// ---------------------------------------------------------------------------
// Model serialization.  Structural checks happen here; physical admissibility
// (dominance, bounds) stays with validate_model so inadmissible files can
// still be loaded and reported on.

inline PotentialKind potential_kind_from_string(const std::string& s) {
  if (s == "zero") return PotentialKind::zero;
  if (s == "cosine") return PotentialKind::cosine;
  if (s == "gaussian_bump") return PotentialKind::gaussian_bump;
  throw std::invalid_argument("unknown potential kind: " + s);
}

inline Model model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("model must be an object");
  if (!j.contains("model_version") || !j["model_version"].is_number_integer() ||
      j["model_version"].get<int>() != kModelVersion)
    throw std::invalid_argument("unsupported or missing model_version");
  if (!j.contains("N") || !j["N"].is_number_integer())
    throw std::invalid_argument("model needs an integer N");

  Model m;
  m.n_sites = j["N"].get<int>();
  if (m.n_sites < 1) throw std::invalid_argument("N must be >= 1");

  if (j.contains("potential")) {
    const auto& p = j["potential"];
    m.potential.kind =
        potential_kind_from_string(p.value("kind", std::string("zero")));
    if (p.contains("params")) {
      const auto params = p["params"].get<std::vector<double>>();
      if (params.size() > 2)
        throw std::invalid_argument("potential takes at most two parameters");
      if (!params.empty()) m.potential.p1 = params[0];
      if (params.size() > 1) m.potential.p2 = params[1];
    }
  }

  if (j.contains("kernel")) {
    const auto& k = j["kernel"];
    m.kernel.range = k.value("R", 0);
    if (k.contains("h")) m.kernel.h = k["h"].get<std::vector<double>>();
    m.kernel.margin = k.value("delta", m.kernel.range == 0 ? 1.0 : 0.0);
    if (int(m.kernel.h.size()) != m.kernel.range)
      throw std::invalid_argument("kernel needs exactly R coefficients");
  }

  if (j.contains("s")) {
    m.field = j["s"].get<std::vector<double>>();
    if (!m.field.empty() && int(m.field.size()) != m.n_sites)
      throw std::invalid_argument("field must have one entry per site");
  }
  m.tilt = j.value("sigma", 0.0);

  for (double v : m.kernel.h)
    if (!std::isfinite(v)) throw std::invalid_argument("couplings must be finite");
  for (double v : m.field)
    if (!std::isfinite(v)) throw std::invalid_argument("field must be finite");
  if (!std::isfinite(m.tilt) || !std::isfinite(m.potential.p1) ||
      !std::isfinite(m.potential.p2) || !std::isfinite(m.kernel.margin))
    throw std::invalid_argument("model parameters must be finite");
  return m;
}

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json j;
  j["model_version"] = kModelVersion;
  j["N"] = m.n_sites;
  j["potential"] = {{"kind", to_string(m.potential.kind)},
                    {"params", {m.potential.p1, m.potential.p2}}};
  j["kernel"] = {{"R", m.kernel.range}, {"h", m.kernel.h},
                 {"delta", m.kernel.margin}};
  if (!m.field.empty()) j["s"] = m.field;
  if (m.tilt != 0.0) j["sigma"] = m.tilt;
  return j;
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed JSON in " + path.string() + ": " +
                                e.what());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Atomic file output: write a sibling temp file, then rename over the target
// so readers never observe a torn file.

inline void atomic_write_text(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  const fs::path tmp =
      path.string() + ".tmp" + std::to_string(std::uint32_t(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot create " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot replace " + path.string() + ": " +
                             ec.message());
  }
}

inline void save_json(const std::filesystem::path& path,
                      const nlohmann::json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV helpers.  Twelve significant digits: readable files, far beyond any
// plotting tolerance.

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_row(const std::vector<double>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += csv_number(cells[i]);
  }
  return line;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::string& header,
                      const std::vector<std::string>& lines) {
  std::string body = header + "\n";
  for (const auto& l : lines) body += l + "\n";
  atomic_write_text(path, body);
}

// ---------------------------------------------------------------------------
// Config hashing: FNV-1a over the canonical (sorted-key) JSON dump, so every
// numeric knob in the config participates and key order cannot matter.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string config_hash(const nlohmann::json& j) {
  const std::uint64_t h = fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spinscale
