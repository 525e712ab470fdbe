#pragma once

#include "lodqn/coefficient.hpp"
#include "lodqn/corrector.hpp"
#include "lodqn/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lodqn {

/// Binary formats, all little-endian:
///   LODF  magic "LODF", version u32, n_per_side u32, n^2 f64 element values
///   LODU  magic "LODU", version u32, n_per_side u32, (n+1)^2 f64 node values
///   LODC  magic "LODC", version u32, coarse n u32, fine n u32, k u32,
///         linearization id u8, 32-byte fingerprint, then per coarse free
///         node (lexicographic) the fine free-node vector as f64
constexpr std::uint32_t kFileFormatVersion = 1;

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serializeField(const SpatialField& field);
void writeFieldFile(const std::filesystem::path& path, const SpatialField& field);
SpatialField readFieldFile(const std::filesystem::path& path);

void writeVectorFile(const std::filesystem::path& path, const Eigen::VectorXd& nodal,
                     int n_per_side);
Eigen::VectorXd readVectorFile(const std::filesystem::path& path, int& n_per_side);

void writeCorrectorFile(const std::filesystem::path& path, const CorrectorSet& set,
                        const MeshPair& pair);
/// Returns nothing on any mismatch (bad magic/version, wrong meta, wrong
/// fingerprint); the caller treats that as a cache miss.
std::optional<CorrectorSet> readCorrectorFile(const std::filesystem::path& path,
                                              const MeshPair& pair, int k, Linearization kind,
                                              const Fingerprint& expected);

Fingerprint sha256(const std::vector<std::uint8_t>& bytes);

/// Fingerprint of a corrector configuration: hash of the p* vector bytes,
/// the serialized coefficient fields, and the model descriptors.
Fingerprint correctorFingerprint(const Eigen::VectorXd& p_star, const CombinedCoefficient& coeff);

std::string toHex(const Fingerprint& fp, std::size_t bytes = 32);

/// Write-temp-then-rename so concurrent readers never observe a torn file.
void atomicWrite(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

} // namespace lodqn
