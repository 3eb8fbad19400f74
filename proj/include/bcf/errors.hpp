#pragma once

#include <stdexcept>
#include <string>

namespace bcf {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Two densities (or a density and an operator) live on different grids.
class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& what = "grid mismatch") : Error(what) {}
};

// Value outside the valid density range (negative, NaN or infinite).
class NonFinite : public Error {
public:
    explicit NonFinite(const std::string& what = "negative or non-finite value") : Error(what) {}
};

// A density (or pooled density) carries no mass anywhere.
class AllZero : public Error {
public:
    explicit AllZero(const std::string& what = "density is zero everywhere") : Error(what) {}
};

// Normalized density exceeds the configured pointwise cap: the state grid is
// too coarse (or the raw values too peaked) for a bounded-density model.
class CapExceeded : public Error {
public:
    explicit CapExceeded(const std::string& what = "density exceeds pointwise cap") : Error(what) {}
};

// Values presented as an already-normalized density do not integrate to one.
class NotNormalized : public Error {
public:
    explicit NotNormalized(const std::string& what = "values do not integrate to 1") : Error(what) {}
};

// Pooling / pooled-limit weights are negative or do not sum to one.
class BadWeights : public Error {
public:
    explicit BadWeights(const std::string& what = "invalid pooling weights") : Error(what) {}
};

// Joint likelihood vanished on every cell: the posterior is undefined.
class ZeroEvidence : public Error {
public:
    explicit ZeroEvidence(const std::string& what = "zero evidence: joint likelihood vanishes on all cells") : Error(what) {}
};

// Transition kernel columns do not integrate to one within tolerance.
class KernelNotStochastic : public Error {
public:
    explicit KernelNotStochastic(const std::string& what = "kernel columns do not integrate to 1") : Error(what) {}
};

// Directed graph (or weight-matrix sparsity pattern) is not strongly connected.
class NotIrreducible : public Error {
public:
    explicit NotIrreducible(const std::string& what = "graph is not strongly connected") : Error(what) {}
};

// An iterative solver hit its iteration cap before reaching tolerance.
class NoConvergence : public Error {
public:
    explicit NoConvergence(const std::string& what = "iteration did not converge") : Error(what) {}
};

// A quantity is undefined in this dimension/configuration (e.g. second
// singular value of a 1x1 matrix).
class Degenerate : public Error {
public:
    explicit Degenerate(const std::string& what = "degenerate configuration") : Error(what) {}
};

// No balanced weight assignment exists for the requested graph/method.
class CannotBalance : public Error {
public:
    explicit CannotBalance(const std::string& what = "cannot balance weights on this graph") : Error(what) {}
};

// Tracking/non-tracking block structure violated (coupling where a zero
// block is required, or a block fails its own connectivity/balance checks).
class PartitionViolation : public Error {
public:
    explicit PartitionViolation(const std::string& what = "hierarchical partition violated") : Error(what) {}
};

// No consensus-loop count can meet the disagreement target.
class Infeasible : public Error {
public:
    explicit Infeasible(const std::string& what = "no loop count satisfies the disagreement target") : Error(what) {}
};

// Requested computation exceeds the configured enumeration/size budget.
class TooLarge : public Error {
public:
    explicit TooLarge(const std::string& what = "problem exceeds configured size budget") : Error(what) {}
};

// Scenario/configuration file is malformed or inconsistent.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what = "invalid configuration") : Error(what) {}
};

} // namespace bcf
