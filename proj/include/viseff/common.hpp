#pragma once
// Shared small utilities: seeded RNG derivation, quantiles, hashing,
// ISO-8601 timestamps, number formatting for stable artifact output.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace viseff {

// FNV-1a 64-bit, used for config hashes, input digests and seed derivation.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Derive a child seed from a base seed and a stage label. All randomness in
// the pipeline flows from one top-level seed through these labels.
inline uint64_t derive_seed(uint64_t base, std::string_view label) {
    uint64_t h = fnv1a64(label);
    h ^= base + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

inline uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t index) {
    return derive_seed(base, std::string(label) + "#" + std::to_string(index));
}

using Rng = std::mt19937_64;

// Quantile with linear interpolation between closest ranks (the common
// "type 7" definition). `sorted` must be ascending and non-empty.
// p in [0,1].
double quantile_sorted(const std::vector<double>& sorted, double p);

// Convenience: copies, sorts, then interpolates.
double quantile(std::vector<double> values, double p);

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

// Standard normal CDF.
double norm_cdf(double z);

// Parse "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[.fff][Z]" as UTC seconds since
// the Unix epoch. Throws std::runtime_error on malformed input.
int64_t parse_iso8601_utc(std::string_view s);

// Inverse: epoch seconds -> "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601_utc(int64_t epoch_seconds);

// Stable float formatting for CSV/JSON artifacts (shortest round-trip "%.17g"
// is noisy; we pin 10 significant digits which is plenty for our statistics
// and keeps artifacts byte-stable).
std::string fmt_double(double v);

// Read a whole file into a string; throws on failure.
std::string read_file(const std::string& path);

// Write a string to a file atomically enough for our purposes.
void write_file(const std::string& path, std::string_view content);

// Split helper used by a few parsers.
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace viseff
