#pragma once

#include "hodge5/exterior_algebra.hpp"
#include "hodge5/grid.hpp"
#include "hodge5/lattice.hpp"

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hodge5 {

/// Truncated Fourier series of a k-form: one FormFiber per lattice mode,
/// stored mode-major in a single coefficient vector. The reality flag marks
/// fields with c(-q) = conj(c(q)), i.e. real-valued forms.
class FormField {
public:
    FormField(ModeLattice lattice, int rank);
    FormField(ModeLattice lattice, int rank, Eigen::VectorXcd coeffs, bool real = false);

    static FormField zero(const ModeLattice& lattice, int rank) { return FormField(lattice, rank); }
    static FormField single_mode(const ModeLattice& lattice, const Mode& q, const FormFiber& fiber);
    /// Gaussian coefficients; with `real` set the result is conjugation symmetric.
    static FormField random(const ModeLattice& lattice, int rank, std::mt19937_64& rng, bool real = false);

    const ModeLattice& lattice() const { return m_lattice; }
    int rank() const { return m_rank; }
    int components() const { return form_dimension(m_rank); }
    const Eigen::VectorXcd& coeffs() const { return m_coeffs; }
    /// Mutable access drops the reality flag; call mark_real() afterwards if needed.
    Eigen::VectorXcd& coeffs()
    {
        m_real = false;
        return m_coeffs;
    }

    auto block(int mode)
    {
        m_real = false;
        return m_coeffs.segment(static_cast<long>(mode) * components(), components());
    }
    auto block(int mode) const { return m_coeffs.segment(static_cast<long>(mode) * components(), components()); }
    FormFiber fiber(int mode) const { return FormFiber(m_rank, block(mode), ScalarKind::complex); }

    bool is_real() const { return m_real; }
    /// Sets the flag after checking conjugation symmetry to 1e-12 relative.
    void mark_real();
    /// max |c(-q) - conj(c(q))| / max |c|.
    double reality_defect() const;

    /// Real and imaginary parts as fields, (u + conj u)/2 and (u - conj u)/2i.
    FormField real_part() const;
    FormField imag_part() const;
    FormField conjugate() const;

    FormField& operator+=(const FormField& other);
    FormField& operator-=(const FormField& other);
    FormField& operator*=(cdouble s);

    friend FormField operator+(FormField a, const FormField& b) { return a += b; }
    friend FormField operator-(FormField a, const FormField& b) { return a -= b; }
    friend FormField operator*(cdouble s, FormField a) { return a *= s; }
    friend FormField operator*(FormField a, cdouble s) { return a *= s; }

    void require_compatible(const FormField& other) const;

private:
    ModeLattice m_lattice;
    int m_rank;
    Eigen::VectorXcd m_coeffs;
    bool m_real = false;
};

/// Finite sum of c cos(k.x) and c sin(k.x) terms with integer wave vectors.
class TrigPolynomial {
public:
    enum class Kind { cos, sin };
    struct Term {
        double coefficient;
        Kind kind;
        Mode wave;
    };

    TrigPolynomial() = default;
    explicit TrigPolynomial(std::vector<Term> terms) : m_terms(std::move(terms)) {}

    /// Grammar: term (('+'|'-') term)*, term = [number '*'] ('cos'|'sin') '(' linear ')',
    /// linear = [int '*'] x<1..5> (('+'|'-') [int '*'] x<1..5>)*. Throws ConfigurationError.
    static TrigPolynomial parse(const std::string& text);

    double operator()(const Vector5d& x) const;
    const std::vector<Term>& terms() const { return m_terms; }
    int max_frequency() const;
    bool empty() const { return m_terms.empty(); }
    std::string to_string() const;

private:
    std::vector<Term> m_terms;
};

/// A Riemannian metric on the torus: either one constant SPD tensor or SPD
/// samples on the (2 K_g + 1)^5 collocation grid.
class MetricField {
public:
    static MetricField constant(const MetricTensor& g);
    static MetricField flat() { return constant(MetricTensor::identity()); }
    /// Samples in grid point order; each validated SPD.
    static MetricField sampled(int grid_radius, const std::vector<Matrix5d>& samples);
    /// e^{2 f} base, sampled on the grid of radius `grid_radius`.
    static MetricField conformal(const TrigPolynomial& f, int grid_radius, const MetricTensor& base = MetricTensor::identity());

    bool is_constant() const { return !m_grid_radius.has_value(); }
    const MetricTensor& constant_value() const;
    int grid_radius() const;
    CollocationGrid grid() const { return CollocationGrid::with_radius(grid_radius()); }
    const std::vector<MetricTensor>& samples() const { return m_samples; }
    /// Metric at grid point `index` (the constant value for constant metrics).
    const MetricTensor& at(int index) const;

    /// Short human-readable label ("constant", "sampled(Kg=2)").
    std::string describe() const;

private:
    std::optional<int> m_grid_radius;
    std::vector<MetricTensor> m_samples;
};

/// Symmetric (0,2)-tensor field, constant or sampled on a collocation grid.
class SymTensorField {
public:
    static SymTensorField constant(const SymTensor& h);
    static SymTensorField sampled(int grid_radius, std::vector<SymTensor> samples);
    /// phi * g pointwise.
    static SymTensorField scaled_metric(const MetricField& g, double phi);

    bool is_constant() const { return !m_grid_radius.has_value(); }
    int grid_radius() const;
    const SymTensor& constant_value() const;
    const std::vector<SymTensor>& samples() const { return m_samples; }
    const SymTensor& at(int index) const;
    ScalarKind kind() const;

    SymTensorField scaled(double s) const;

private:
    std::optional<int> m_grid_radius;
    std::vector<SymTensor> m_samples;
};

using Direction = SymTensorField;

/// g + eps h with SPD validated at every sample (MetricError otherwise).
/// Complex-kind directions are rejected with ArgumentError.
MetricField perturb(const MetricField& g, const Direction& h, double eps);

/// Grid radius shared by a metric and a direction; nullopt if both constant.
/// ConfigurationError on mismatched sampled grids.
std::optional<int> common_grid_radius(const MetricField& g, const Direction& h);

/// ceil(3K/2): the metric grid radius used when none is given.
int default_grid_radius(int lattice_radius);

/// Seeded random constant SPD metric, B^T B / 5 + I / 2 with Gaussian B.
MetricTensor random_metric(std::mt19937_64& rng);

/// Metric values on the grid of radius `radius` (expanding a constant metric).
std::vector<MetricTensor> metric_on_grid(const MetricField& g, int radius);

} // namespace hodge5
