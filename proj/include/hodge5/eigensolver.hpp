#pragma once

#include "hodge5/fields.hpp"
#include "hodge5/torus_operators.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hodge5 {

/// value is lambda for the Beltrami operator (B u = i lambda u, so u is an
/// eigenvector of the Hermitian -iB) and mu = lambda^2 for the Laplacian.
/// The vector has unit g-norm and its largest coefficient is real positive.
struct EigenPair {
    double value = 0.0;
    FormField vector;
    double residual = 0.0;
};

struct SpectrumOptions {
    /// Number of smallest-magnitude nonzero eigenpairs; 0 returns all.
    int count = 0;
    double residual_tolerance = 1e-9;
    /// Reduced dimension above which the iterative solver is used.
    int dense_threshold = 4000;
    bool vectors = true;
    std::uint64_t seed = 0;
    int max_restarts = 60;
    /// Relative residual requested from the Krylov iteration.
    double krylov_tolerance = 1e-11;
};

/// Eigenpairs plus what is known about the eigenvalue just past the cut.
struct SpectrumResult {
    std::vector<EigenPair> pairs;
    std::optional<double> next_value;  ///< first excluded value, when known
    bool complete = false;             ///< every nonzero eigenvalue was returned
    std::string method;                ///< "per-mode", "dense" or "krylov"
};

/// Smallest-magnitude nonzero eigenpairs of `op` compressed to `subspace`.
/// Beltrami and Laplacian handles support full and co-exact restrictions;
/// other handles are solved densely on the full space. NumericalError if the
/// iteration fails, ContractError for unsupported combinations.
SpectrumResult compute_spectrum(const OperatorHandle& op, DomainRestriction subspace, const SpectrumOptions& options = {});

std::vector<EigenPair> spectrum(const OperatorHandle& op, DomainRestriction subspace, const SpectrumOptions& options = {});

struct Cluster {
    double value = 0.0;
    int multiplicity = 0;
    std::vector<double> members;
    std::vector<double> residuals;
    bool resolved = true;
    std::string verdict;
};

struct SpectrumReport {
    std::vector<Cluster> clusters;
    double tolerance = 0.0;
    std::string operator_name;
    std::string metric;
    std::string method;
    int lattice_radius = -1;
    int requested = 0;

    int total_multiplicity() const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Single-linkage clustering: a new cluster starts where the gap exceeds tol.
SpectrumReport cluster(std::vector<double> values, double tol);

/// 1e-7 times the spread of the values (1e-7 times max(1,|v|) when the spread is 0).
double default_cluster_tolerance(const std::vector<double>& values);

struct RealPair {
    FormField alpha;
    FormField beta;
    double lambda = 0.0;
    double beltrami_alpha_defect = 0.0;  ///< |B alpha + lambda beta|
    double beltrami_beta_defect = 0.0;   ///< |B beta - lambda alpha|
    double cross_inner = 0.0;            ///< |<alpha, beta>_g|
    double laplace_alpha_defect = 0.0;   ///< |Delta alpha - lambda^2 alpha|
    double laplace_beta_defect = 0.0;
    double independence = 0.0;           ///< smallest singular value of the Gram matrix of (alpha, beta)
};

/// Real and imaginary parts of a Beltrami eigenfield, each of unit g-norm.
/// DegenerateError if lambda = 0; ContractError if omega is not an eigenfield
/// to 1e-9 relative residual.
RealPair realify(const Galerkin& g, const FormField& omega, double lambda);

struct PairOptions {
    int count = 0;
    double cluster_tolerance = 0.0;  ///< 0 selects default_cluster_tolerance
    SpectrumOptions spectrum;
};

/// Real co-exact Laplacian spectrum on 2-forms with a pairing verdict per
/// cluster: "pair" (multiplicity 2), "non-generic" (even > 2), "unresolved"
/// (cut by the eigenvalue count). An odd multiplicity in a resolved cluster
/// throws InvariantViolation.
SpectrumReport pair_spectrum(const Galerkin& g, const PairOptions& options = {});

/// Residual check helpers shared with the tests.
double beltrami_residual(const TorusGalerkin& g, const FormField& u, double lambda);

} // namespace hodge5
