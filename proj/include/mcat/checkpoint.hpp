// Self-describing checkpoint archive: architecture spec (JSON), the build
// seed, and every named parameter/buffer array as float64. Loading rebuilds
// the network from the stored spec and validates every array shape.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcat/nn.hpp"

namespace mcat {

inline nlohmann::json arch_to_json(const ArchitectureSpec& s) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& st : s.stages) stages.push_back({{"blocks", st.blocks}, {"channels", st.channels}});
  return {
      {"input_size", s.input_size},
      {"input_channels", s.input_channels},
      {"stem_channels", s.stem_channels},
      {"stem_kernel", s.stem_kernel},
      {"stem_stride", s.stem_stride},
      {"stem_pool", s.stem_pool},
      {"stages", stages},
      {"downsample", s.downsample == DownsampleMode::MaxPool ? "maxpool" : "strided_conv"},
      {"shortcut", s.shortcut == ShortcutMode::ZeroPad ? "zero_pad" : "projection"},
      {"batch_norm", s.batch_norm},
      {"output_width", s.output_width},
  };
}

inline ArchitectureSpec arch_from_json(const nlohmann::json& j) {
  ArchitectureSpec s;
  s.input_size = j.at("input_size").get<int>();
  s.input_channels = j.at("input_channels").get<int>();
  s.stem_channels = j.at("stem_channels").get<int>();
  s.stem_kernel = j.at("stem_kernel").get<int>();
  s.stem_stride = j.at("stem_stride").get<int>();
  s.stem_pool = j.at("stem_pool").get<bool>();
  s.stages.clear();
  for (const auto& st : j.at("stages"))
    s.stages.push_back({st.at("blocks").get<int>(), st.at("channels").get<int>()});
  s.downsample = j.at("downsample").get<std::string>() == "maxpool" ? DownsampleMode::MaxPool
                                                                    : DownsampleMode::StridedConv;
  s.shortcut = j.at("shortcut").get<std::string>() == "zero_pad" ? ShortcutMode::ZeroPad
                                                                 : ShortcutMode::Projection;
  s.batch_norm = j.at("batch_norm").get<bool>();
  s.output_width = j.at("output_width").get<int>();
  return s;
}

namespace detail {
constexpr char kCheckpointMagic[8] = {'M', 'C', 'A', 'T', 'C', 'K', 'P', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), std::streamsize(s.size()));
}
inline std::string read_string(std::istream& in) {
  std::string s(read_u64(in), '\0');
  in.read(s.data(), std::streamsize(s.size()));
  return s;
}
}  // namespace detail

template <typename S>
void save_checkpoint(Network<S>& net, std::uint64_t seed, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path.string());
  out.write(detail::kCheckpointMagic, 8);
  detail::write_string(out, arch_to_json(net.spec()).dump());
  detail::write_u64(out, seed);
  auto params = net.params();
  detail::write_u64(out, params.size());
  for (auto& p : params) {
    detail::write_string(out, p.name);
    detail::write_u64(out, p.value->shape().size());
    for (auto d : p.value->shape()) detail::write_u64(out, std::uint64_t(d));
    std::vector<double> buf(std::size_t(p.value->size()));
    for (std::int64_t i = 0; i < p.value->size(); ++i) buf[std::size_t(i)] = double((*p.value)[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 8));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

template <typename S>
struct LoadedCheckpoint {
  std::unique_ptr<Network<S>> network;
  std::uint64_t seed = 0;
};

template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(detail::kCheckpointMagic, 8))
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint");

  LoadedCheckpoint<S> result;
  const ArchitectureSpec spec = arch_from_json(nlohmann::json::parse(detail::read_string(in)));
  result.seed = detail::read_u64(in);
  result.network = std::make_unique<Network<S>>(spec);

  auto params = result.network->params();
  const std::uint64_t n = detail::read_u64(in);
  if (n != params.size())
    throw std::runtime_error("load_checkpoint: array count mismatch in " + path.string());
  for (std::uint64_t k = 0; k < n; ++k) {
    const std::string name = detail::read_string(in);
    const std::uint64_t ndim = detail::read_u64(in);
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) d = std::int64_t(detail::read_u64(in));
    auto& p = params[std::size_t(k)];
    if (p.name != name || p.value->shape() != shape)
      throw std::runtime_error("load_checkpoint: array '" + name +
                               "' does not match the stored architecture spec");
    std::vector<double> buf(std::size_t(Tensor<S>::count(shape)));
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * 8));
    if (!in) throw std::runtime_error("load_checkpoint: truncated data in " + path.string());
    for (std::size_t i = 0; i < buf.size(); ++i) (*p.value)[std::int64_t(i)] = S(buf[i]);
  }
  return result;
}

}  // namespace mcat
