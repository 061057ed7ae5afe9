#include "gdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace gdiff {
namespace {

constexpr char kMagic[8] = {'G', 'D', 'I', 'F', 'F', 'C', 'K', 'P'};
constexpr std::size_t kHeaderBytes = 8 + 6 * 4 + 2 * 8 + 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> serialize_checkpoint(const DenoiserParams& params) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 8 * (params.values.size() + params.running.size()) + 8);
  out.resize(sizeof kMagic);
  std::memcpy(out.data(), kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.config.layers));
  put_u32(out, static_cast<std::uint32_t>(params.config.width));
  put_u32(out, params.config.branch == Branch::Discrete ? 0u : 1u);
  put_u32(out, params.config.task == Task::Tsp ? 0u : 1u);
  put_u32(out, static_cast<std::uint32_t>(params.config.diffusion_steps));
  put_f64(out, params.config.beta_first);
  put_f64(out, params.config.beta_last);
  put_u64(out, params.values.size());
  for (double v : params.values) put_f64(out, v);
  for (double v : params.running) put_f64(out, v);
  put_u64(out, fnv1a64(out.data(), out.size()));
  return out;
}

DenoiserParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    if (bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0)
      throw CheckpointChecksumError("checkpoint truncated inside the header");
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::uint8_t* p = bytes.data() + sizeof kMagic;
  const std::uint32_t version = get_u32(p);
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  ModelConfig cfg;
  cfg.layers = static_cast<int>(get_u32(p + 4));
  cfg.width = static_cast<int>(get_u32(p + 8));
  const std::uint32_t branch = get_u32(p + 12);
  const std::uint32_t task = get_u32(p + 16);
  cfg.diffusion_steps = static_cast<int>(get_u32(p + 20));
  cfg.beta_first = std::bit_cast<double>(get_u64(p + 24));
  cfg.beta_last = std::bit_cast<double>(get_u64(p + 32));
  const std::uint64_t count = get_u64(p + 40);
  if (branch > 1 || task > 1 || cfg.layers < 1 || cfg.width < 2 || cfg.width > (1 << 16) || cfg.layers > (1 << 12) ||
      cfg.diffusion_steps < 1 || !(cfg.beta_first > 0.0 && cfg.beta_first <= cfg.beta_last && cfg.beta_last < 1.0))
    throw CheckpointError("checkpoint header holds an invalid model description");
  cfg.branch = branch == 0 ? Branch::Discrete : Branch::Continuous;
  cfg.task = task == 0 ? Task::Tsp : Task::Mis;

  DenoiserParams params;
  params.config = cfg;
  params.layout = ParamLayout::build(cfg);
  const std::size_t running = static_cast<std::size_t>(cfg.layers) * 4 * cfg.width;
  const std::size_t expected = kHeaderBytes + 8 * (params.layout.total + running) + 8;
  if (bytes.size() != expected)
    throw CheckpointChecksumError("checkpoint size mismatch (" + std::to_string(bytes.size()) + " bytes, expected " +
                                  std::to_string(expected) + "): truncated or corrupt");
  const std::uint64_t stored = get_u64(bytes.data() + expected - 8);
  if (stored != fnv1a64(bytes.data(), expected - 8)) throw CheckpointChecksumError("checkpoint checksum mismatch");
  if (count != params.layout.total) throw CheckpointError("checkpoint parameter count does not match its header");

  const std::uint8_t* body = bytes.data() + kHeaderBytes;
  params.values.resize(params.layout.total);
  for (std::size_t i = 0; i < params.values.size(); ++i) params.values[i] = std::bit_cast<double>(get_u64(body + 8 * i));
  body += 8 * params.values.size();
  params.running.resize(running);
  for (std::size_t i = 0; i < running; ++i) params.running[i] = std::bit_cast<double>(get_u64(body + 8 * i));
  return params;
}

void save_checkpoint(const DenoiserParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DenoiserParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace gdiff
