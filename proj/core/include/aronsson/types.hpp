#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace aronsson {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Axis-aligned box [lo, hi] in state space.
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size()) {
            throw std::invalid_argument("Box: lo/hi dimension mismatch");
        }
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            if (!(lo[i] < hi[i])) {
                throw std::invalid_argument("Box: requires lo < hi per axis");
            }
        }
    }

    static Box cube(int dim, double half_width) {
        return Box(Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width));
    }

    int dim() const { return static_cast<int>(lo.size()); }

    /// Largest per-axis excess over the box; <= 0 iff x is inside the closed box.
    double margin(const Vec& x) const {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            m = std::max(m, std::max(lo[i] - x[i], x[i] - hi[i]));
        }
        return m;
    }

    bool contains(const Vec& x) const { return margin(x) <= 0.0; }

    Vec widths() const { return hi - lo; }
};

struct SingularPointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalOutsideDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HessianUnavailableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CflViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyRegionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoExitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientPointsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aronsson
