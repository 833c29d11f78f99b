#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "depthprune/boundary_set.hpp"
#include "depthprune/scoring.hpp"
#include "depthprune/tensor.hpp"
#include "depthprune/toy_model.hpp"

namespace depthprune {

// .sdt tensor container, all integers little-endian:
//   bytes 0..7   magic "SDTENSR1"
//   u32          rank
//   rank x u64   dims
//   float32[]    product(dims) values, row-major
inline constexpr std::string_view kSdtMagic = "SDTENSR1";

/// Narrows to float32 (round to nearest even). Throws ValueError when a
/// value overflows float32.
std::vector<std::byte> encode_sdt(const TensorF& tensor);
/// `name` is used in error messages. Throws FormatError on bad magic,
/// truncation, trailing bytes or non-finite payload.
TensorF decode_sdt(std::span<const std::byte> bytes, const std::string& name);

void write_sdt(const std::filesystem::path& path, const TensorF& tensor);
TensorF read_sdt(const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

inline constexpr int kDumpVersion = 1;
inline constexpr int kPlanVersion = 1;
inline constexpr int kCheckpointVersion = 1;

struct DumpFileEntry {
  std::string name;
  std::string hash;
};

/// manifest.json of a hidden-state dump.
struct DumpManifest {
  std::size_t layers = 0;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::size_t hidden = 0;
  std::string source;
  std::string hash_algorithm = "sha256";
  std::vector<DumpFileEntry> files;
};

/// boundary_0000.sdt style name for boundary i.
std::string boundary_file_name(std::size_t index);

/// Writes boundary_0000.sdt .. boundary_{L}.sdt and manifest.json into `dir`
/// (created if missing).
void write_dump(const BoundarySet& boundaries, const std::filesystem::path& dir,
                const std::string& source = "depthprune-toy");

DumpManifest read_dump_manifest(const std::filesystem::path& dir);

/// Verifies format, content hashes and shapes, then widens to 64-bit.
BoundarySet read_dump(const std::filesystem::path& dir);

/// Canonical JSON: fixed key order, shortest round-trip doubles, two-space
/// indent, trailing newline.
std::string serialize_plan(const PruningPlan& plan);
/// Throws VersionError on an unknown version, FormatError on malformed JSON
/// or types, PlanError when the plan's invariants do not hold.
PruningPlan parse_plan(std::string_view text);

void write_plan(const PruningPlan& plan, const std::filesystem::path& path);
PruningPlan read_plan(const std::filesystem::path& path);

/// model.json plus one .sdt per parameter tensor. Parameters are stored as
/// float32, so a model whose weights are float32-representable round-trips
/// exactly.
void write_checkpoint(const ToyModel& model, const std::filesystem::path& dir);
ToyModel read_checkpoint(const std::filesystem::path& dir);

}  // namespace depthprune
