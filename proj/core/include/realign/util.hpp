// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace realign {

// ---------------------------------------------------------------------------
// Hashing / digests
//
// Content digests (prompt digests, image digests, resume-ledger keys) are
// 64-bit FNV-1a rendered as 16 lowercase hex chars. They key mock scripts and
// checkpoint ledgers; they are not a security boundary.
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view data);
std::uint64_t fnv1a64(std::span<const std::uint8_t> data);
std::string digest_hex(std::string_view data);
std::string digest_hex(std::span<const std::uint8_t> data);

/// SplitMix64 finalizer, used to mix seeds with string-derived salts.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// std::mt19937_64 has a standardized bit stream; all derived draws below are
// implemented here (not via std::*_distribution, whose output is
// implementation-defined) so runs reproduce across platforms.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n) by rejection sampling. n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// k distinct values sampled uniformly without replacement from [0, n).
    std::vector<std::size_t> sample_distinct(std::size_t k, std::size_t n);

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Numeric helpers
// ---------------------------------------------------------------------------

/// Round half away from zero is not needed; the pipeline pins round-half-up:
/// floor(v + 0.5). Identical on every platform.
long round_half_up(double v);

/// Percentage rounded to 2 decimals, round-half-up, e.g. 66.27.
double round_pct2(double v);

/// Compact decimal rendering for box fractions: 0.68 -> "0.68", 0 -> "0.0".
std::string format_fraction(double v);

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view text);

/// Replaces ${NAME} with the value of the environment variable NAME.
/// Unset variables expand to the empty string.
std::string interpolate_env(const std::string& text);

// ---------------------------------------------------------------------------
// Filesystem
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path);
std::vector<std::uint8_t> read_file_bytes(const std::string& path);

/// Writes to <path>.tmp then renames, so readers never observe a torn file.
void write_file_atomic(const std::string& path, std::string_view content);

// ---------------------------------------------------------------------------
// Bounded worker pool
// ---------------------------------------------------------------------------

/// Runs fn(0..n-1) on `workers` threads. The first exception thrown by any
/// worker is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Process-wide cooperative interrupt flag (set by the CLI's SIGINT handler,
/// polled by pipeline stages between records).
bool interrupt_requested();
void request_interrupt(bool value);

std::string iso8601_now();

} // namespace realign
