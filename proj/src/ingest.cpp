#include "depthprune/ingest.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "depthprune/error.hpp"
#include "depthprune/hash.hpp"

namespace depthprune {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::span<const std::byte> bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<unsigned>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

std::string text_of(const std::vector<std::byte>& bytes) {
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::span<const std::byte> bytes_of(std::string_view text) {
  return {reinterpret_cast<const std::byte*>(text.data()), text.size()};
}

void require_hash_algorithm(const std::string& algo, const fs::path& where) {
  if (algo != kHashAlgorithm) {
    throw FormatError(where.string() + ": unsupported hash algorithm '" + algo + "'");
  }
}

ojson parse_json_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return ojson::parse(text_of(bytes));
  } catch (const ojson::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
}

/// Reads, decodes and hash-checks one .sdt file.
TensorF load_verified(const fs::path& path, const std::string& expected_hash) {
  const auto bytes = read_file_bytes(path);
  TensorF t = decode_sdt(bytes, path.string());
  const std::string actual = sha256_hex(bytes);
  if (actual != expected_hash) {
    throw IntegrityError(path.string() + ": content hash " + actual + " does not match manifest " +
                         expected_hash);
  }
  return t;
}

}  // namespace

std::vector<std::byte> encode_sdt(const TensorF& tensor) {
  std::vector<std::byte> out;
  out.reserve(kSdtMagic.size() + 4 + 8 * tensor.rank() + 4 * tensor.size());
  for (char c : kSdtMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto d : tensor.dims()) put_u64(out, d);
  for (double v : tensor.data()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw ValueError("value " + std::to_string(v) + " overflows float32");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

TensorF decode_sdt(std::span<const std::byte> bytes, const std::string& name) {
  const std::size_t header = kSdtMagic.size() + 4;
  if (bytes.size() < header ||
      std::memcmp(bytes.data(), kSdtMagic.data(), kSdtMagic.size()) != 0) {
    throw FormatError(name + ": bad magic (expected \"SDTENSR1\")");
  }
  const auto rank = static_cast<std::size_t>(get_le(bytes, kSdtMagic.size(), 4));
  if (rank > 16) throw FormatError(name + ": implausible rank " + std::to_string(rank));
  if (bytes.size() < header + 8 * rank) {
    throw FormatError(name + ": truncated header, expected " + std::to_string(header + 8 * rank) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<std::size_t> dims(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t d = get_le(bytes, header + 8 * i, 8);
    if (d != 0 && count > std::numeric_limits<std::size_t>::max() / 4 / d) {
      throw FormatError(name + ": dims overflow");
    }
    dims[i] = static_cast<std::size_t>(d);
    count *= dims[i];
  }
  const std::size_t payload_at = header + 8 * rank;
  const std::size_t expected = payload_at + 4 * count;
  if (bytes.size() != expected) {
    throw FormatError(name + ": expected " + std::to_string(expected) + " bytes (" +
                      std::to_string(count) + " float32 values), found " +
                      std::to_string(bytes.size()));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, payload_at + 4 * i, 4)));
    if (!std::isfinite(f)) {
      throw FormatError(name + ": non-finite value at element " + std::to_string(i));
    }
    data[i] = static_cast<double>(f);
  }
  return TensorF(std::move(dims), std::move(data));
}

std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("failed reading " + path.string());
  }
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_sdt(const fs::path& path, const TensorF& tensor) {
  write_file_bytes(path, encode_sdt(tensor));
}

TensorF read_sdt(const fs::path& path) { return decode_sdt(read_file_bytes(path), path.string()); }

std::string boundary_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "boundary_%04zu.sdt", index);
  return buf;
}

void write_dump(const BoundarySet& boundaries, const fs::path& dir, const std::string& source) {
  if (boundaries.boundaries().size() < 2) {
    throw FormatError("a dump needs at least 2 boundaries (L >= 1)");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  ojson files = ojson::array();
  for (std::size_t i = 0; i < boundaries.boundaries().size(); ++i) {
    const auto bytes = encode_sdt(boundaries.boundary(i));
    const std::string name = boundary_file_name(i);
    write_file_bytes(dir / name, bytes);
    files.push_back(ojson{{"name", name}, {"hash", sha256_hex(bytes)}});
  }
  ojson manifest;
  manifest["format"] = "sdt-dump";
  manifest["version"] = kDumpVersion;
  manifest["layers"] = boundaries.layer_count();
  manifest["batch"] = boundaries.batch();
  manifest["seq_len"] = boundaries.seq_len();
  manifest["hidden"] = boundaries.hidden();
  manifest["source"] = source;
  manifest["model_fingerprint"] = boundaries.model_fingerprint();
  manifest["calib_fingerprint"] = boundaries.calib_fingerprint();
  manifest["hash_algorithm"] = kHashAlgorithm;
  manifest["files"] = std::move(files);
  const std::string text = manifest.dump(2) + "\n";
  write_file_bytes(dir / "manifest.json", bytes_of(text));
}

DumpManifest read_dump_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  const ojson j = parse_json_file(path);
  DumpManifest m;
  try {
    const int version = j.at("version").get<int>();
    if (version != kDumpVersion) {
      throw VersionError(path.string() + ": unsupported dump version " + std::to_string(version));
    }
    m.layers = j.at("layers").get<std::size_t>();
    m.batch = j.at("batch").get<std::size_t>();
    m.seq_len = j.at("seq_len").get<std::size_t>();
    m.hidden = j.at("hidden").get<std::size_t>();
    m.source = j.value("source", std::string{});
    m.hash_algorithm = j.at("hash_algorithm").get<std::string>();
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("name").get<std::string>(), f.at("hash").get<std::string>()});
    }
  } catch (const ojson::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  require_hash_algorithm(m.hash_algorithm, path);
  if (m.layers < 1) throw FormatError(path.string() + ": a dump needs L >= 1");
  if (m.files.size() != m.layers + 1) {
    throw FormatError(path.string() + ": lists " + std::to_string(m.files.size()) +
                      " files for " + std::to_string(m.layers) + " layers");
  }
  return m;
}

BoundarySet read_dump(const fs::path& dir) {
  const DumpManifest m = read_dump_manifest(dir);
  const ojson j = parse_json_file(dir / "manifest.json");
  std::vector<TensorF> tensors;
  tensors.reserve(m.files.size());
  const std::vector<std::size_t> expected{m.batch, m.seq_len, m.hidden};
  for (std::size_t i = 0; i < m.files.size(); ++i) {
    const fs::path path = dir / m.files[i].name;
    TensorF t = load_verified(path, m.files[i].hash);
    if (t.dims() != expected) {
      throw ShapeError(path.string() + ": shape does not match manifest [B,S,D] = [" +
                       std::to_string(m.batch) + "," + std::to_string(m.seq_len) + "," +
                       std::to_string(m.hidden) + "]");
    }
    tensors.push_back(std::move(t));
  }
  return BoundarySet(std::move(tensors), j.value("model_fingerprint", m.source),
                     j.value("calib_fingerprint", std::string{}));
}

std::string serialize_plan(const PruningPlan& plan) {
  ojson scores = ojson::array();
  for (const auto& s : plan.per_layer_scores) {
    scores.push_back(ojson{{"layer", s.layer_index},
                           {"l_sim", s.l_sim},
                           {"l_diff", s.l_diff},
                           {"i_sim", s.i_sim},
                           {"i_diff", s.i_diff},
                           {"importance", s.importance}});
  }
  ojson j;
  j["version"] = kPlanVersion;
  j["total_layers"] = plan.total_layers;
  j["k"] = plan.pruned_indices.size();
  j["alpha"] = plan.alpha;
  j["metric"] = std::string(metric_name(plan.metric_kind));
  j["pruned_indices"] = plan.pruned_indices;
  j["ranking"] = plan.ranking;
  j["scores"] = std::move(scores);
  j["calibration_fingerprint"] = plan.calibration_fingerprint;
  j["tie_break_events"] = plan.tie_break_events;
  j["saturation_count"] = plan.saturation_count;
  j["excluded"] = plan.excluded;
  return j.dump(2) + "\n";
}

PruningPlan parse_plan(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw FormatError(std::string("plan is not valid JSON: ") + e.what());
  }
  PruningPlan plan;
  try {
    if (!j.contains("version")) throw FormatError("plan has no version");
    const int version = j.at("version").get<int>();
    if (version != kPlanVersion) {
      throw VersionError("unsupported plan version " + std::to_string(version));
    }
    plan.total_layers = j.at("total_layers").get<std::size_t>();
    const auto k = j.at("k").get<std::size_t>();
    plan.alpha = j.at("alpha").get<double>();
    const auto metric = j.at("metric").get<std::string>();
    if (metric != "mssd" && metric != "masd") {
      throw FormatError("plan names unknown metric '" + metric + "'");
    }
    plan.metric_kind = parse_metric(metric);
    plan.pruned_indices = j.at("pruned_indices").get<std::vector<std::size_t>>();
    plan.ranking = j.at("ranking").get<std::vector<std::size_t>>();
    plan.calibration_fingerprint = j.at("calibration_fingerprint").get<std::string>();
    plan.tie_break_events = j.at("tie_break_events").get<std::size_t>();
    plan.saturation_count = j.at("saturation_count").get<std::size_t>();
    if (j.contains("excluded")) plan.excluded = j.at("excluded").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("scores")) {
      LayerScore ls;
      ls.layer_index = s.at("layer").get<std::size_t>();
      ls.l_sim = s.at("l_sim").get<double>();
      ls.l_diff = s.at("l_diff").get<double>();
      ls.i_sim = s.at("i_sim").get<double>();
      ls.i_diff = s.at("i_diff").get<double>();
      ls.importance = s.at("importance").get<double>();
      ls.alpha = plan.alpha;
      ls.metric_kind = plan.metric_kind;
      plan.per_layer_scores.push_back(ls);
    }
    if (k != plan.pruned_indices.size()) {
      throw PlanError("k = " + std::to_string(k) + " but pruned_indices has " +
                      std::to_string(plan.pruned_indices.size()) + " entries");
    }
  } catch (const ojson::exception& e) {
    throw FormatError(std::string("malformed plan: ") + e.what());
  }
  if (!(plan.alpha >= 0.0 && plan.alpha <= 1.0)) throw PlanError("alpha outside [0, 1]");
  if (plan.pruned_indices.size() > plan.total_layers) throw PlanError("k exceeds total_layers");
  plan.keep_count = plan.total_layers - plan.pruned_indices.size();
  validate_plan(plan);
  return plan;
}

void write_plan(const PruningPlan& plan, const fs::path& path) {
  validate_plan(plan);
  write_file_bytes(path, bytes_of(serialize_plan(plan)));
}

PruningPlan read_plan(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_plan(text_of(bytes));
  } catch (const Error& e) {
    // Re-raise with the file name, keeping the error class.
    if (e.kind() == "VersionError") throw VersionError(path.string() + ": " + e.what());
    if (e.kind() == "PlanError") throw PlanError(path.string() + ": " + e.what());
    if (e.kind() == "FormatError") throw FormatError(path.string() + ": " + e.what());
    throw;
  }
}

namespace {

TensorF tensor_of(const Matrix& m) {
  return TensorF({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                 std::vector<double>(m.data(), m.data() + m.size()));
}

TensorF tensor_of(const RowVector& v) {
  return TensorF({static_cast<std::size_t>(v.size())},
                 std::vector<double>(v.data(), v.data() + v.size()));
}

void assign(Matrix& m, const TensorF& t, std::size_t rows, std::size_t cols, const std::string& n) {
  if (t.dims() != std::vector<std::size_t>{rows, cols}) {
    throw ShapeError(n + ": expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(t.data().begin(), t.data().end(), m.data());
}

void assign(RowVector& v, const TensorF& t, std::size_t size, const std::string& n) {
  if (t.dims() != std::vector<std::size_t>{size}) {
    throw ShapeError(n + ": expected a vector of " + std::to_string(size));
  }
  v.resize(static_cast<Eigen::Index>(size));
  std::copy(t.data().begin(), t.data().end(), v.data());
}

}  // namespace

void write_checkpoint(const ToyModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  ojson files = ojson::array();
  auto save = [&](const std::string& name, const TensorF& t) {
    const auto bytes = encode_sdt(t);
    write_file_bytes(dir / (name + ".sdt"), bytes);
    files.push_back(ojson{{"name", name + ".sdt"}, {"hash", sha256_hex(bytes)}});
  };
  save("embedding", tensor_of(model.embedding));
  save("positions", tensor_of(model.positions));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    save(p + "attn_norm", tensor_of(l.attn_norm));
    save(p + "wq", tensor_of(l.wq));
    save(p + "wk", tensor_of(l.wk));
    save(p + "wv", tensor_of(l.wv));
    save(p + "wo", tensor_of(l.wo));
    save(p + "mlp_norm", tensor_of(l.mlp_norm));
    save(p + "w1", tensor_of(l.w1));
    save(p + "w2", tensor_of(l.w2));
  }
  save("final_norm", tensor_of(model.final_norm));
  save("lm_head", tensor_of(model.lm_head));

  const auto& c = model.config;
  ojson j;
  j["format"] = "depthprune-model";
  j["version"] = kCheckpointVersion;
  j["vocab_size"] = c.vocab_size;
  j["hidden_dim"] = c.hidden_dim;
  j["layer_count"] = model.layers.size();
  j["head_count"] = c.head_count;
  j["mlp_dim"] = c.ffn_dim();
  j["max_positions"] = c.max_positions;
  j["norm_eps"] = c.norm_eps;
  j["seed"] = model.seed;
  j["source_layers"] = model.source_layers;
  j["hash_algorithm"] = kHashAlgorithm;
  j["files"] = std::move(files);
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(dir / "model.json", bytes_of(text));
}

ToyModel read_checkpoint(const fs::path& dir) {
  const fs::path mpath = dir / "model.json";
  const ojson j = parse_json_file(mpath);
  ToyModel model;
  std::map<std::string, std::string> hashes;
  try {
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw VersionError(mpath.string() + ": unsupported checkpoint version " +
                         std::to_string(version));
    }
    auto& c = model.config;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.layer_count = j.at("layer_count").get<std::size_t>();
    c.head_count = j.at("head_count").get<std::size_t>();
    c.mlp_dim = j.at("mlp_dim").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
    c.norm_eps = j.at("norm_eps").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.source_layers = j.at("source_layers").get<std::vector<std::size_t>>();
    require_hash_algorithm(j.at("hash_algorithm").get<std::string>(), mpath);
    for (const auto& f : j.at("files")) {
      hashes[f.at("name").get<std::string>()] = f.at("hash").get<std::string>();
    }
  } catch (const ojson::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  const auto& c = model.config;
  c.validate();
  if (model.source_layers.size() != c.layer_count) {
    throw FormatError(mpath.string() + ": source_layers length != layer_count");
  }

  auto load = [&](const std::string& name) {
    auto it = hashes.find(name + ".sdt");
    if (it == hashes.end()) throw FormatError(mpath.string() + ": no entry for " + name);
    return load_verified(dir / it->first, it->second);
  };
  const std::size_t d = c.hidden_dim;
  const std::size_t f = c.ffn_dim();
  assign(model.embedding, load("embedding"), c.vocab_size, d, "embedding");
  assign(model.positions, load("positions"), c.max_positions, d, "positions");
  model.layers.resize(c.layer_count);
  for (std::size_t i = 0; i < c.layer_count; ++i) {
    auto& l = model.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    assign(l.attn_norm, load(p + "attn_norm"), d, p + "attn_norm");
    assign(l.wq, load(p + "wq"), d, d, p + "wq");
    assign(l.wk, load(p + "wk"), d, d, p + "wk");
    assign(l.wv, load(p + "wv"), d, d, p + "wv");
    assign(l.wo, load(p + "wo"), d, d, p + "wo");
    assign(l.mlp_norm, load(p + "mlp_norm"), d, p + "mlp_norm");
    assign(l.w1, load(p + "w1"), d, f, p + "w1");
    assign(l.w2, load(p + "w2"), f, d, p + "w2");
  }
  assign(model.final_norm, load("final_norm"), d, "final_norm");
  assign(model.lm_head, load("lm_head"), d, c.vocab_size, "lm_head");
  return model;
}

}  // namespace depthprune
