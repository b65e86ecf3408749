// ============================================================================
// util.hpp - Small shared helpers: error types, formatting, hashing, RNG.
// ============================================================================
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace olfact {

// Error categories map onto CLI exit codes: config=2, data=3, numeric=4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

// FNV-1a over a byte string, hex-encoded. Used for config hashes / stats ids.
std::string fnv1a_hex(const std::string& bytes);

// Levenshtein distance, used for nearest-match suggestions in lookups.
std::size_t edit_distance(const std::string& a, const std::string& b);
std::vector<std::string> nearest_names(const std::string& query,
                                       const std::vector<std::string>& names,
                                       std::size_t count = 3);

// Deterministic RNG used everywhere. Gaussian via Box-Muller so streams are
// identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {  // [0,1)
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double gaussian(double mean = 0.0, double stddev = 1.0);
    std::uint64_t next_u64() { return engine_(); }
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }
    // Independent child stream; distinct tags give distinct streams.
    Rng fork(std::uint64_t tag) const;

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Runs fn(0) .. fn(n-1) across up to hardware_concurrency threads. Work items
// must be independent; the first exception is rethrown after all workers
// finish.
void run_parallel(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace olfact
