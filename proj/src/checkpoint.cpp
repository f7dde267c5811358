#include "ptgan/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ptgan/error.hpp"
#include "ptgan/rng.hpp"

namespace ptgan {

namespace {
constexpr char kMagic[8] = {'P', 'T', 'G', 'N', 'A', 'R', 'C', '1'};
}

const Tensor& Archive::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end())
    fail(Errc::weights_unavailable, "archive has no array '" + name + "'");
  return it->second;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  out.reserve(arrays_.size());
  for (const auto& [name, t] : arrays_) out.push_back(name);
  return out;
}

std::vector<uint8_t> Archive::serialize() const {
  nlohmann::json header;
  header["version"] = kVersion;
  header["meta"] = meta_;
  nlohmann::json table = nlohmann::json::array();
  int64_t offset = 0;  // element offset into the payload
  for (const auto& [name, t] : arrays_) {
    table.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  header["arrays"] = table;
  const std::string header_str = header.dump();

  std::vector<uint8_t> bytes;
  bytes.reserve(sizeof(kMagic) + 8 + header_str.size() +
                static_cast<size_t>(offset) * sizeof(double));
  bytes.insert(bytes.end(), kMagic, kMagic + sizeof(kMagic));
  uint64_t hlen = header_str.size();
  const auto* hp = reinterpret_cast<const uint8_t*>(&hlen);
  bytes.insert(bytes.end(), hp, hp + 8);
  bytes.insert(bytes.end(), header_str.begin(), header_str.end());
  for (const auto& [name, t] : arrays_) {
    const auto* dp = reinterpret_cast<const uint8_t*>(t.data());
    bytes.insert(bytes.end(), dp, dp + t.size() * sizeof(double));
  }
  return bytes;
}

Archive Archive::deserialize(const std::vector<uint8_t>& bytes) {
  require(bytes.size() >= sizeof(kMagic) + 8 &&
              std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0,
          Errc::malformed_document, "not a parameter archive");
  uint64_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kMagic), 8);
  const size_t header_start = sizeof(kMagic) + 8;
  require(header_start + hlen <= bytes.size(), Errc::malformed_document,
          "archive header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + header_start,
                                   bytes.begin() + header_start + hlen);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed_document, std::string("archive header: ") + e.what());
  }
  require(header.value("version", 0u) == kVersion, Errc::malformed_document,
          "unsupported archive version");

  Archive ar;
  ar.meta_ = header.value("meta", nlohmann::json::object());
  const size_t payload_start = header_start + hlen;
  for (const auto& entry : header["arrays"]) {
    const std::string name = entry["name"].get<std::string>();
    const std::vector<int> shape = entry["shape"].get<std::vector<int>>();
    const int64_t offset = entry["offset"].get<int64_t>();
    Tensor t(shape);
    const size_t byte_off = payload_start + static_cast<size_t>(offset) * sizeof(double);
    require(byte_off + t.size() * sizeof(double) <= bytes.size(),
            Errc::malformed_document, "archive payload truncated at '" + name + "'");
    std::memcpy(t.data(), bytes.data() + byte_off, t.size() * sizeof(double));
    ar.arrays_[name] = std::move(t);
  }
  return ar;
}

void Archive::save(const std::filesystem::path& path) const {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  const std::vector<uint8_t> bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::missing_file, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), Errc::missing_file, "short write to " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

uint64_t Archive::checksum() const {
  const std::vector<uint8_t> bytes = serialize();
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace ptgan
