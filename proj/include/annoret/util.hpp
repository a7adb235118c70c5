#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace annoret {

// Error taxonomy. The CLI maps these onto exit codes:
// config_error -> 1, format/data errors -> 2, backend_error -> 3.
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct backend_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Non-finite values or impossible numeric states; a data error for exit-code purposes.
struct numeric_error : data_error {
    using data_error::data_error;
};

/// Print a warning line to stderr ("[warn] ...").
void warn(const std::string& msg);

/// Suppress/restore warning output (used by tests and quiet runs).
void set_warnings_enabled(bool enabled);

// ---- string helpers ----

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Lowercased maximal alphanumeric runs of `s`.
std::vector<std::string> tokenize(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

/// Everything up to the first '.', '!' or '?' (inclusive), trimmed.
std::string first_sentence(std::string_view text);

// ---- hashing ----

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Stable 64-bit mix of two values (splitmix finalizer).
std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b);

// ---- files ----

std::string read_file(const std::filesystem::path& path);

/// Write via temp file + rename so partial output never lands at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string format_double(double v, int precision = 6);

}  // namespace annoret
