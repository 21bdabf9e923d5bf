#pragma once

// common.hpp — error hierarchy, deterministic RNG, hashing, and small string
// helpers shared by every stads module. Nothing here touches the network or
// the filesystem.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stads {

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

class error : public std::runtime_error {
public:
    error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct schema_error : error {
    explicit schema_error(const std::string& w) : error("schema", w) {}
};
struct row_error : error {
    explicit row_error(const std::string& w) : error("row", w) {}
};
struct split_error : error {
    explicit split_error(const std::string& w) : error("split", w) {}
};
struct config_error : error {
    explicit config_error(const std::string& w) : error("config", w) {}
};
struct credential_error : error {
    explicit credential_error(const std::string& w) : error("credential", w) {}
};
struct transport_error : error {
    transport_error(const std::string& w, int status)
        : error("transport", w), last_status(status) {}
    int last_status;  // HTTP status of the final attempt, 0 for connection-level failures
};
struct store_error : error {
    explicit store_error(const std::string& w) : error("store", w) {}
};

// ---------------------------------------------------------------------------
// hashing (FNV-1a, 64-bit) — request fingerprints and run ids
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf, 16);
}

// ---------------------------------------------------------------------------
// deterministic RNG
//
// Splits, shot picks, synthetic rows and permutation tests must replay
// byte-identically across toolchains, so we own the whole stream instead of
// relying on std::shuffle / std::normal_distribution (both are
// implementation-defined). splitmix64 core, rejection-sampled bounded
// uniforms, Fisher-Yates, Box-Muller.
// ---------------------------------------------------------------------------

class det_rng {
public:
    explicit det_rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform integer in [0, n), unbiased via rejection
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw error("rng", "below(0) has no valid range");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // uniform double in [0, 1) with 53 random bits
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller, second deviate cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so log stays finite
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// string helpers
// ---------------------------------------------------------------------------

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                          s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                          s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline bool parse_long(std::string_view s, long long& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline std::string format_fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts,
                        std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace stads
