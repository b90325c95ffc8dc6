#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace agecurves {

// splitmix64, used to spread one user seed into independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic RNG stream. One instance per chain / fold / replicate;
/// derive child streams with `stream(k)` so parallel tasks never share state.
/// Distribution objects are created per call, so every draw is a pure function
/// of the engine state and serialize/deserialize round-trips exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : seed_(seed), engine_(seed) {}

    /// Independent child stream for task index k (stable in k, not in call order).
    Rng stream(std::uint64_t k) const {
        std::uint64_t s = seed_ ^ (0x9e3779b97f4a7c15ULL * (k + 1));
        return Rng(splitmix64(s));
    }

    double uniform() {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return u(engine_);
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        std::normal_distribution<double> d(0.0, 1.0);
        return mean + sd * d(engine_);
    }

    /// Gamma(shape, rate): density proportional to x^{shape-1} e^{-rate x}.
    double gamma(double shape, double rate) {
        std::gamma_distribution<double> g(shape, 1.0 / rate);
        return g(engine_);
    }

    /// InvGamma(shape, rate): density proportional to x^{-shape-1} e^{-rate/x},
    /// mean rate/(shape-1) for shape > 1.
    double inv_gamma(double shape, double rate) {
        double g = 0.0;
        while (g <= 0.0) g = gamma(shape, rate);
        return 1.0 / g;
    }

    /// Poisson draw returned as a double so extreme means stay representable.
    /// Above 1e9 a rounded Gaussian is used; there the approximation error is
    /// far below Monte Carlo noise.
    double poisson(double mean) {
        if (mean <= 0.0) return 0.0;
        if (mean < 1e9) {
            std::poisson_distribution<long long> p(mean);
            return static_cast<double>(p(engine_));
        }
        double y = std::round(mean + std::sqrt(mean) * normal());
        return y < 0.0 ? 0.0 : y;
    }

    std::mt19937_64& engine() { return engine_; }

    std::string serialize() const {
        std::ostringstream os;
        os << seed_ << ' ' << engine_;
        return os.str();
    }
    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> seed_ >> engine_;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace agecurves
