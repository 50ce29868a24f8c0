#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace stenoflow {

inline constexpr double kPi = 3.14159265358979323846;

/// Pressure unit conversion used at all I/O boundaries; internal unit system is CGS.
inline constexpr double kDynPerMmHg = 1333.22;

inline double mmhg_to_dyn(double p) { return p * kDynPerMmHg; }
inline double dyn_to_mmhg(double p) { return p / kDynPerMmHg; }

/// 64-bit FNV-1a, used for provenance keys (not security).
uint64_t fnv1a(const void* data, std::size_t len, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t hash_file_bytes(const std::string& path);

std::string hash_hex(uint64_t h);

/// Deterministic RNG. std::uniform_real_distribution and std::shuffle are
/// implementation-defined, so the mappings are spelled out here.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    /// Uniform in (0,1): 53-bit mantissa draw, zero excluded.
    double uniform01();
    /// Uniform integer in [0, n), n >= 1.
    uint64_t below(uint64_t n);
    /// Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n);

private:
    uint64_t state_[4];
};

/// Shortest decimal form that round-trips an IEEE double (printf %.17g).
std::string format_double(double v);
/// Bit-exact hexadecimal float form (printf %a).
std::string format_hex(double v);
double parse_double(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// n log-spaced values in [lo, hi], endpoints included.
std::vector<double> log_spaced(double lo, double hi, int n);

double trapezoid(const std::vector<double>& values, double dx);

double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

} // namespace stenoflow
