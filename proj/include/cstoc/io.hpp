#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cstoc/solvers.hpp"

/// File artifacts: content hashing, atomic writes, the per-run manifest, and
/// CSV / binary serialization of solved fields.

namespace cstoc {

/// Hex-encoded SHA-256 of a byte buffer.
std::string sha256_hex(std::string_view bytes);

/// Writes the bytes to a temporary file in the target's directory and
/// renames it over the final name, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// A run's output listing: `# key=value` lines recording the effective
/// configuration (insertion order), then one `name<TAB>sha256<TAB>bytes`
/// line per artifact. Identical inputs produce identical manifest bytes.
class Manifest {
 public:
  void set_config(std::string key, std::string value);

  /// Writes the bytes to dir/name atomically and records the artifact line.
  void add_artifact(const std::filesystem::path& dir, const std::string& name,
                    std::string_view bytes);

  std::string to_text() const;

  /// Writes the manifest itself as dir/manifest.tsv (atomically).
  void write(const std::filesystem::path& dir) const;

 private:
  struct Artifact {
    std::string name;
    std::string hash;
    std::uint64_t bytes = 0;
  };
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<Artifact> artifacts_;
};

/// One row per lattice node in (t, x, m) order with columns
///   t,x1[,m],value,masked[,u1..,a1..]
/// where the control columns appear when a policy is supplied. Numbers are
/// printed with enough digits to round-trip doubles.
std::string field_to_csv(const ValueField& field, const PolicyField* policy = nullptr);

/// Compact binary image of a field (grid, metadata, payload arrays) for
/// lossless storage; little-endian host layout.
std::string field_to_binary(const ValueField& field);

/// Inverse of field_to_binary. Throws SpecError on a foreign or truncated
/// buffer.
ValueField field_from_binary(std::string_view bytes);

}  // namespace cstoc
