#pragma once

#include "c3/mlp.hpp"
#include "c3/reference_store.hpp"

#include <filesystem>
#include <stdexcept>

namespace c3 {

// Binary layout, all little-endian:
//   magic[4] ("C3ST" store, "C3MD" model), u32 version
//   dimension table (u64 entries)
//   payload: 64-bit floats, row-major; intervals as i64
//   u32 crc32 of every preceding byte

class PersistenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wrong magic bytes or unsupported format version.
class VersionMismatch : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

class TruncatedFile : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

class ChecksumMismatch : public PersistenceError {
public:
    using PersistenceError::PersistenceError;
};

inline constexpr std::uint32_t kFormatVersion = 1;

void persist_store(const ReferenceStored& store, const std::filesystem::path& path);
ReferenceStored load_store(const std::filesystem::path& path);

void persist_model(const MlpParamsd& params, const std::filesystem::path& path);
MlpParamsd load_model(const std::filesystem::path& path);

}  // namespace c3
