#pragma once

#include <filesystem>
#include <string>

namespace bsdelab {

/// Shortest round-trip decimal form of a double ('.' decimal point, no
/// locale). All emitted artifacts use this so byte-level reproducibility
/// does not depend on stream state.
std::string format_double(double value);

/// Write contents to path atomically (temp file in the same directory,
/// then rename). Creates parent directories as needed.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

/// Worker count for parallel sections: BSDE_LAB_THREADS when set (>=1),
/// otherwise hardware concurrency.
int worker_count();

} // namespace bsdelab
