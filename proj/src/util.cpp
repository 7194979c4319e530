#include "ceci/util.hpp"

#include "ceci/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace ceci {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::LayerViolation: return "LayerViolation";
    case ErrorCode::MultipleParents: return "MultipleParents";
    case ErrorCode::InvalidNode: return "InvalidNode";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::UnknownRoom: return "UnknownRoom";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::DegenerateRoom: return "DegenerateRoom";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::CatalogMismatch: return "CatalogMismatch";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EndpointError: return "EndpointError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::UnreadableInput: return "UnreadableInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string_view tool_version() { return CECI_VERSION; }

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: EVP_Digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) + 0x9E3779B97F4A7C15ULL * (index + 1));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::MissingArtifact, "cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  static std::atomic<std::uint64_t> counter{0};
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::UnreadableInput, "cannot write " + tmp.string());
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw Error(ErrorCode::UnreadableInput, "short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ceci
