#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ceci {

/// Version string embedded in every artifact this library writes.
std::string_view tool_version();

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SplitMix64 finalizer; used to derive independent per-item seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for item `index` of a run keyed by `master`. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace ceci
