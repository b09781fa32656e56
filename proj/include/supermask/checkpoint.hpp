#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "supermask/data.hpp"
#include "supermask/network.hpp"

namespace supermask {

/// Binary container of named sections.
///
///   "SMCK" | version:u8 | sections:u32
///   per section: name_len:u32 | name | kind:u8 | payload_len:u64 | payload
///     kind 0 (f32 array): rank:u32 | dims:u32 x rank | values:f32 x prod(dims)
///     kind 1 (text):      UTF-8 bytes
///     kind 2 (i32 array): count:u32 | values:i32 x count
///
/// All integers and floats are little-endian.
class Container {
 public:
  static constexpr std::uint8_t kVersion = 1;

  using Payload = std::variant<DenseArray<float>, std::string, std::vector<std::int32_t>>;
  struct Section {
    std::string name;
    Payload payload;
  };

  void put(std::string name, Payload payload);
  bool contains(const std::string& name) const { return find(name) != nullptr; }
  const DenseArray<float>& array(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  const std::vector<std::int32_t>& ints(const std::string& name) const;
  const std::vector<Section>& sections() const { return sections_; }

  std::vector<std::uint8_t> encode() const;
  static Container decode(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path);

 private:
  const Section* find(const std::string& name) const;
  std::vector<Section> sections_;
};

/// Frozen weights, biases, mask logits and scale factors of every layer, plus a config echo.
Container network_checkpoint(const Network<Real>& net, const std::string& config_echo);
/// Overwrites the network's tensors from a checkpoint; shapes must match.
void restore_network(Network<Real>& net, const Container& c);

void put_dataset(Container& c, const std::string& prefix, const LabeledDataset& d);
LabeledDataset get_dataset(const Container& c, const std::string& prefix, Split split);

}  // namespace supermask
