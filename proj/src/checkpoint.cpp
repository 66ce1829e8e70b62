#include "gmenet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

#include <json.hpp>

#include "gmenet/check.hpp"

namespace gmenet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blocks are raw little-endian doubles");

constexpr char kMagic[4] = {'G', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

nlohmann::json header_to_json(const CheckpointHeader& h) {
  nlohmann::json j;
  j["schema_version"] = h.schema_version;
  j["kind"] = h.kind;
  j["dims"] = {{"raw_dim", h.raw_dim},
               {"d_model", h.d_model},
               {"tokens", h.tokens},
               {"heads", h.heads},
               {"d_expert", h.d_expert}};
  j["init_seed"] = h.init_seed;
  if (h.kind == "model") {
    j["variant"] = h.variant;
    j["mode"] = h.mode;
    j["split"] = {{"seed", h.split_seed},
                  {"fold", h.fold},
                  {"n_folds", h.n_folds},
                  {"test_frac", h.test_frac},
                  {"independent_center", h.independent_center}};
  }
  return j;
}

CheckpointHeader header_from_json(const nlohmann::json& j) {
  CheckpointHeader h;
  h.schema_version = j.at("schema_version").get<int>();
  h.kind = j.at("kind").get<std::string>();
  const auto& d = j.at("dims");
  h.raw_dim = d.at("raw_dim").get<Index>();
  h.d_model = d.at("d_model").get<Index>();
  h.tokens = d.at("tokens").get<Index>();
  h.heads = d.at("heads").get<Index>();
  h.d_expert = d.at("d_expert").get<Index>();
  h.init_seed = j.at("init_seed").get<std::uint64_t>();
  if (h.kind == "model") {
    h.variant = j.at("variant").get<std::string>();
    h.mode = j.at("mode").get<std::string>();
    const auto& s = j.at("split");
    h.split_seed = s.at("seed").get<std::uint64_t>();
    h.fold = s.at("fold").get<int>();
    h.n_folds = s.at("n_folds").get<int>();
    h.test_frac = s.at("test_frac").get<double>();
    h.independent_center = s.at("independent_center").get<std::string>();
  }
  return h;
}

struct Block {
  std::string name;
  MatX value;
};

CheckpointHeader read_all(const std::string& path, std::vector<Block>* blocks) {
  std::ifstream in(path, std::ios::binary);
  require_io(in.good(), "cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  require_io(in.good() && std::memcmp(magic, kMagic, 4) == 0,
               path + ": not a checkpoint file");
  const std::uint32_t version = read_u32(in);
  require_io(version == kVersion,
               path + ": unsupported checkpoint version " +
                   std::to_string(version));

  const std::uint64_t hdr_len = read_u64(in);
  std::string hdr_text(hdr_len, '\0');
  in.read(hdr_text.data(), static_cast<std::streamsize>(hdr_len));
  require_io(in.good(), path + ": truncated header");
  CheckpointHeader header;
  try {
    header = header_from_json(nlohmann::json::parse(hdr_text));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint header: " + e.what());
  }

  const std::uint64_t n_blocks = read_u64(in);
  if (blocks) {
    blocks->resize(n_blocks);
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
      const std::uint64_t name_len = read_u64(in);
      std::string name(name_len, '\0');
      in.read(name.data(), static_cast<std::streamsize>(name_len));
      const auto rows = static_cast<Index>(read_u64(in));
      const auto cols = static_cast<Index>(read_u64(in));
      MatX value(rows, cols);
      in.read(reinterpret_cast<char*>(value.data()),
              static_cast<std::streamsize>(sizeof(double)) * rows * cols);
      require_io(in.good(), path + ": truncated block " + name);
      (*blocks)[b] = {std::move(name), std::move(value)};
    }
  }
  return header;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const ParamStore& ps, const std::string& prefix) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require_io(out.good(), "cannot write checkpoint: " + path);

  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const std::string hdr_text = header_to_json(header).dump();
  write_u64(out, hdr_text.size());
  out.write(hdr_text.data(), static_cast<std::streamsize>(hdr_text.size()));

  std::uint64_t n_blocks = 0;
  for (const auto& [name, param] : ps)
    if (name.rfind(prefix, 0) == 0) ++n_blocks;
  write_u64(out, n_blocks);

  for (const auto& [name, param] : ps) {
    if (name.rfind(prefix, 0) != 0) continue;
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, static_cast<std::uint64_t>(param.value.rows()));
    write_u64(out, static_cast<std::uint64_t>(param.value.cols()));
    out.write(reinterpret_cast<const char*>(param.value.data()),
              static_cast<std::streamsize>(sizeof(double)) *
                  param.value.size());
  }
  require_io(out.good(), "short write to checkpoint: " + path);
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  return read_all(path, nullptr);
}

CheckpointHeader load_checkpoint(const std::string& path, ParamStore& ps,
                                 const std::string& prefix) {
  std::vector<Block> blocks;
  CheckpointHeader header = read_all(path, &blocks);

  std::set<std::string> expected;
  for (const auto& [name, param] : ps)
    if (name.rfind(prefix, 0) == 0) expected.insert(name);

  for (auto& block : blocks) {
    require_io(block.name.rfind(prefix, 0) == 0,
                 path + ": block outside group '" + prefix +
                     "': " + block.name);
    require_io(expected.erase(block.name) == 1,
                 path + ": unexpected parameter " + block.name);
    Param& param = ps.at(block.name);
    require_io(param.value.rows() == block.value.rows() &&
                     param.value.cols() == block.value.cols(),
                 path + ": shape mismatch for " + block.name);
    param.value = std::move(block.value);
  }
  if (!expected.empty())
    throw std::runtime_error(path + ": checkpoint is missing " +
                             *expected.begin());
  return header;
}

}  // namespace gmenet
