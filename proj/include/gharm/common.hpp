#ifndef GHARM_COMMON_HPP
#define GHARM_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gharm {

using Vec = std::vector<double>;

// b(x) -> R^n, written into out (size n)
using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;
// sigma(x) -> R^{n x n}, row-major, written into out (size n*n)
using SigmaFn = std::function<void(std::span<const double> x, std::span<double> out)>;
// g(y, z) -> R
using DriverFn = std::function<double(double y, std::span<const double> z)>;
// f(x) -> R
using FieldFn = std::function<double(std::span<const double> x)>;

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ComparisonViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExitTruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PrecisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RadiusConditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A Monte Carlo point estimate with its standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dist2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

enum class Verdict { Pass, Warn, Fail };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Warn: return "warn";
        case Verdict::Fail: return "fail";
    }
    return "?";
}

struct ValidationReport {
    std::string subject;
    Verdict verdict = Verdict::Pass;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;

    bool passed() const { return verdict != Verdict::Fail; }
};

// Axis-aligned box in R^n: per-dimension [lo, hi].
struct Box {
    Vec lo;
    Vec hi;

    std::size_t dim() const { return lo.size(); }

    bool contains(std::span<const double> x) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    double dist_to_boundary(std::span<const double> x) const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < lo.size(); ++i) {
            d = std::min(d, x[i] - lo[i]);
            d = std::min(d, hi[i] - x[i]);
        }
        return d;
    }

    double diameter() const {
        double s = 0.0;
        for (std::size_t i = 0; i < lo.size(); ++i) {
            double e = hi[i] - lo[i];
            s += e * e;
        }
        return std::sqrt(s);
    }
};

}  // namespace gharm

#endif
