#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptgan/tensor.hpp"

namespace ptgan {

/// Self-describing parameter archive: magic + version, a JSON header with
/// the named array table and a free-form meta subtree, then raw
/// little-endian doubles. Serialization is canonical (arrays sorted by
/// name, sorted JSON keys), so save→load→save is byte-identical.
class Archive {
 public:
  static constexpr uint32_t kVersion = 1;

  void put(const std::string& name, const Tensor& t) { arrays_[name] = t; }
  void put_meta(const nlohmann::json& meta) { meta_ = meta; }

  bool has(const std::string& name) const { return arrays_.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  std::vector<std::string> names() const;
  const nlohmann::json& meta() const { return meta_; }

  /// Canonical byte serialization.
  std::vector<uint8_t> serialize() const;
  static Archive deserialize(const std::vector<uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

  /// FNV-1a over the canonical bytes.
  uint64_t checksum() const;

 private:
  std::map<std::string, Tensor> arrays_;  // ordered -> canonical layout
  nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace ptgan
