#include "hodge5/fields.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace hodge5 {

FormField::FormField(ModeLattice lattice, int rank)
    : m_lattice(std::move(lattice))
    , m_rank(rank)
    , m_coeffs(Eigen::VectorXcd::Zero(static_cast<long>(m_lattice.size()) * form_dimension(rank)))
    , m_real(true)
{}

FormField::FormField(ModeLattice lattice, int rank, Eigen::VectorXcd coeffs, bool real)
    : m_lattice(std::move(lattice)), m_rank(rank), m_coeffs(std::move(coeffs))
{
    if (m_coeffs.size() != static_cast<long>(m_lattice.size()) * form_dimension(rank)) {
        throw ArgumentError("field coefficient count does not match lattice and rank");
    }
    if (real) {
        mark_real();
    }
}

FormField FormField::single_mode(const ModeLattice& lattice, const Mode& q, const FormFiber& fiber)
{
    FormField f(lattice, fiber.rank);
    f.block(lattice.index(q)) = fiber.coeffs;
    f.m_real = q.isZero() && fiber.coeffs.imag().isZero(0.0);
    return f;
}

FormField FormField::random(const ModeLattice& lattice, int rank, std::mt19937_64& rng, bool real)
{
    std::normal_distribution<double> normal;
    FormField f(lattice, rank);
    for (long i = 0; i < f.m_coeffs.size(); ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        f.m_coeffs(i) = cdouble(re, im);
    }
    if (real) {
        f = f.real_part();
    } else {
        f.m_real = false;
    }
    return f;
}

double FormField::reality_defect() const
{
    double defect = 0.0;
    for (int m = 0; m < m_lattice.size(); ++m) {
        const int n = m_lattice.negated(m);
        defect = std::max(defect, (block(n) - block(m).conjugate()).cwiseAbs().maxCoeff());
    }
    const double scale = m_coeffs.size() ? m_coeffs.cwiseAbs().maxCoeff() : 0.0;
    return scale > 0.0 ? defect / scale : defect;
}

void FormField::mark_real()
{
    if (reality_defect() > 1e-12) {
        throw ArgumentError("field is not conjugation symmetric");
    }
    m_real = true;
}

FormField FormField::conjugate() const
{
    FormField out(m_lattice, m_rank);
    for (int m = 0; m < m_lattice.size(); ++m) {
        out.block(m_lattice.negated(m)) = block(m).conjugate();
    }
    out.m_real = m_real;
    return out;
}

FormField FormField::real_part() const
{
    FormField out = *this;
    out += conjugate();
    out *= 0.5;
    out.m_real = true;
    return out;
}

FormField FormField::imag_part() const
{
    FormField out = *this;
    out -= conjugate();
    out *= cdouble(0.0, -0.5);
    out.m_real = true;
    return out;
}

void FormField::require_compatible(const FormField& other) const
{
    if (m_lattice != other.m_lattice) {
        throw ArgumentError("fields live on different lattices");
    }
    if (m_rank != other.m_rank) {
        throw RankError("fields have different ranks");
    }
}

FormField& FormField::operator+=(const FormField& other)
{
    require_compatible(other);
    m_coeffs += other.m_coeffs;
    m_real = m_real && other.m_real;
    return *this;
}

FormField& FormField::operator-=(const FormField& other)
{
    require_compatible(other);
    m_coeffs -= other.m_coeffs;
    m_real = m_real && other.m_real;
    return *this;
}

FormField& FormField::operator*=(cdouble s)
{
    m_coeffs *= s;
    m_real = m_real && s.imag() == 0.0;
    return *this;
}

// ---------------------------------------------------------------------------

namespace {

class TrigParser {
public:
    explicit TrigParser(const std::string& text) : m_text(text) {}

    TrigPolynomial run()
    {
        std::vector<TrigPolynomial::Term> terms;
        skip();
        double sign = 1.0;
        if (peek() == '+' || peek() == '-') {
            sign = get() == '-' ? -1.0 : 1.0;
        }
        for (;;) {
            TrigPolynomial::Term t = term();
            t.coefficient *= sign;
            terms.push_back(t);
            skip();
            if (at_end()) {
                break;
            }
            const char c = get();
            if (c != '+' && c != '-') {
                fail("expected '+' or '-'");
            }
            sign = c == '-' ? -1.0 : 1.0;
        }
        return TrigPolynomial(std::move(terms));
    }

private:
    TrigPolynomial::Term term()
    {
        skip();
        double coefficient = 1.0;
        if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.') {
            coefficient = number();
            skip();
            if (peek() == '*') {
                get();
            }
            skip();
        }
        TrigPolynomial::Kind kind;
        if (m_text.compare(m_pos, 3, "cos") == 0) {
            kind = TrigPolynomial::Kind::cos;
        } else if (m_text.compare(m_pos, 3, "sin") == 0) {
            kind = TrigPolynomial::Kind::sin;
        } else {
            fail("expected cos or sin");
        }
        m_pos += 3;
        expect('(');
        Mode wave = linear();
        expect(')');
        return {coefficient, kind, wave};
    }

    Mode linear()
    {
        Mode wave = Mode::Zero();
        skip();
        int sign = 1;
        if (peek() == '+' || peek() == '-') {
            sign = get() == '-' ? -1 : 1;
        }
        bool any = false;
        for (;;) {
            skip();
            int factor = 1;
            if (std::isdigit(static_cast<unsigned char>(peek()))) {
                factor = integer();
                skip();
                if (peek() == '*') {
                    get();
                }
                skip();
            }
            if (peek() != 'x') {
                fail("expected variable x1..x5");
            }
            get();
            const char d = get();
            if (d < '1' || d > '5') {
                fail("variable index must be 1..5");
            }
            wave(d - '1') += sign * factor;
            any = true;
            skip();
            if (peek() == '+' || peek() == '-') {
                sign = get() == '-' ? -1 : 1;
                continue;
            }
            break;
        }
        if (!any) {
            fail("empty argument");
        }
        return wave;
    }

    double number()
    {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(m_text.substr(m_pos), &used);
        } catch (const std::exception&) {
            fail("bad number");
        }
        m_pos += used;
        return v;
    }

    int integer()
    {
        int v = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (get() - '0');
            if (v > 1000000) {
                fail("wave number too large");
            }
        }
        return v;
    }

    void expect(char c)
    {
        skip();
        if (get() != c) {
            fail(std::string("expected '") + c + "'");
        }
    }

    void skip()
    {
        while (m_pos < m_text.size() && std::isspace(static_cast<unsigned char>(m_text[m_pos]))) {
            ++m_pos;
        }
    }

    bool at_end() const { return m_pos >= m_text.size(); }
    char peek() const { return at_end() ? '\0' : m_text[m_pos]; }
    char get() { return at_end() ? '\0' : m_text[m_pos++]; }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigurationError("conformal factor \"" + m_text + "\": " + what + " at position " + std::to_string(m_pos));
    }

    const std::string& m_text;
    std::size_t m_pos = 0;
};

} // namespace

TrigPolynomial TrigPolynomial::parse(const std::string& text)
{
    return TrigParser(text).run();
}

double TrigPolynomial::operator()(const Vector5d& x) const
{
    double s = 0.0;
    for (const auto& t : m_terms) {
        const double phase = t.wave.cast<double>().dot(x);
        s += t.coefficient * (t.kind == Kind::cos ? std::cos(phase) : std::sin(phase));
    }
    return s;
}

int TrigPolynomial::max_frequency() const
{
    int k = 0;
    for (const auto& t : m_terms) {
        k = std::max(k, t.wave.cwiseAbs().maxCoeff());
    }
    return k;
}

std::string TrigPolynomial::to_string() const
{
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& t : m_terms) {
        if (!first) {
            os << (t.coefficient < 0 ? " - " : " + ");
        } else if (t.coefficient < 0) {
            os << "-";
        }
        first = false;
        os << std::abs(t.coefficient) << "*" << (t.kind == Kind::cos ? "cos(" : "sin(");
        bool lead = true;
        for (int i = 0; i < 5; ++i) {
            const int w = t.wave(i);
            if (w == 0) {
                continue;
            }
            if (w < 0) {
                os << "-";
            } else if (!lead) {
                os << "+";
            }
            if (std::abs(w) != 1) {
                os << std::abs(w) << "*";
            }
            os << "x" << (i + 1);
            lead = false;
        }
        if (lead) {
            os << "0*x1";
        }
        os << ")";
    }
    return os.str();
}

// ---------------------------------------------------------------------------

MetricField MetricField::constant(const MetricTensor& g)
{
    MetricField f;
    f.m_samples.push_back(g);
    return f;
}

MetricField MetricField::sampled(int grid_radius, const std::vector<Matrix5d>& samples)
{
    const CollocationGrid grid = CollocationGrid::with_radius(grid_radius);
    if (static_cast<int>(samples.size()) != grid.size()) {
        throw ConfigurationError("sampled metric needs " + std::to_string(grid.size()) + " samples, got " +
                                 std::to_string(samples.size()));
    }
    MetricField f;
    f.m_grid_radius = grid_radius;
    f.m_samples.reserve(samples.size());
    for (const auto& s : samples) {
        f.m_samples.emplace_back(s);
    }
    return f;
}

MetricField MetricField::conformal(const TrigPolynomial& f, int grid_radius, const MetricTensor& base)
{
    const CollocationGrid grid = CollocationGrid::with_radius(grid_radius);
    std::vector<Matrix5d> samples(static_cast<std::size_t>(grid.size()));
    for (int p = 0; p < grid.size(); ++p) {
        samples[static_cast<std::size_t>(p)] = std::exp(2.0 * f(grid.point(p))) * base.matrix();
    }
    return sampled(grid_radius, samples);
}

const MetricTensor& MetricField::constant_value() const
{
    if (!is_constant()) {
        throw ArgumentError("metric is not constant");
    }
    return m_samples.front();
}

int MetricField::grid_radius() const
{
    if (is_constant()) {
        throw ArgumentError("constant metric has no grid");
    }
    return *m_grid_radius;
}

const MetricTensor& MetricField::at(int index) const
{
    return is_constant() ? m_samples.front() : m_samples[static_cast<std::size_t>(index)];
}

std::string MetricField::describe() const
{
    return is_constant() ? "constant" : "sampled(Kg=" + std::to_string(*m_grid_radius) + ")";
}

SymTensorField SymTensorField::constant(const SymTensor& h)
{
    SymTensorField f;
    f.m_samples.push_back(h);
    return f;
}

SymTensorField SymTensorField::sampled(int grid_radius, std::vector<SymTensor> samples)
{
    const CollocationGrid grid = CollocationGrid::with_radius(grid_radius);
    if (static_cast<int>(samples.size()) != grid.size()) {
        throw ConfigurationError("sampled tensor field needs " + std::to_string(grid.size()) + " samples");
    }
    SymTensorField f;
    f.m_grid_radius = grid_radius;
    f.m_samples = std::move(samples);
    return f;
}

SymTensorField SymTensorField::scaled_metric(const MetricField& g, double phi)
{
    if (g.is_constant()) {
        return constant(SymTensor(Matrix5d(phi * g.constant_value().matrix())));
    }
    std::vector<SymTensor> s;
    s.reserve(g.samples().size());
    for (const auto& m : g.samples()) {
        s.emplace_back(Matrix5d(phi * m.matrix()));
    }
    return sampled(g.grid_radius(), std::move(s));
}

int SymTensorField::grid_radius() const
{
    if (is_constant()) {
        throw ArgumentError("constant tensor field has no grid");
    }
    return *m_grid_radius;
}

const SymTensor& SymTensorField::constant_value() const
{
    if (!is_constant()) {
        throw ArgumentError("tensor field is not constant");
    }
    return m_samples.front();
}

const SymTensor& SymTensorField::at(int index) const
{
    return is_constant() ? m_samples.front() : m_samples[static_cast<std::size_t>(index)];
}

ScalarKind SymTensorField::kind() const
{
    for (const auto& s : m_samples) {
        if (s.kind() == ScalarKind::complex) {
            return ScalarKind::complex;
        }
    }
    return ScalarKind::real;
}

SymTensorField SymTensorField::scaled(double s) const
{
    SymTensorField out = *this;
    for (auto& h : out.m_samples) {
        h = h.kind() == ScalarKind::real ? SymTensor(Matrix5d(s * h.real_matrix())) : SymTensor(Matrix5cd(s * h.matrix()));
    }
    return out;
}

std::optional<int> common_grid_radius(const MetricField& g, const Direction& h)
{
    if (!g.is_constant() && !h.is_constant() && g.grid_radius() != h.grid_radius()) {
        throw ConfigurationError("metric and direction are sampled on different grids");
    }
    if (!g.is_constant()) {
        return g.grid_radius();
    }
    if (!h.is_constant()) {
        return h.grid_radius();
    }
    return std::nullopt;
}

std::vector<MetricTensor> metric_on_grid(const MetricField& g, int radius)
{
    if (!g.is_constant()) {
        if (g.grid_radius() != radius) {
            throw ConfigurationError("metric grid radius does not match");
        }
        return g.samples();
    }
    const int n = CollocationGrid::with_radius(radius).size();
    return std::vector<MetricTensor>(static_cast<std::size_t>(n), g.constant_value());
}

MetricField perturb(const MetricField& g, const Direction& h, double eps)
{
    if (h.kind() == ScalarKind::complex) {
        throw ArgumentError("metric perturbation needs a real direction");
    }
    const auto radius = common_grid_radius(g, h);
    try {
        if (!radius) {
            return MetricField::constant(MetricTensor(g.constant_value().matrix() + eps * h.constant_value().real_matrix()));
        }
        const int n = CollocationGrid::with_radius(*radius).size();
        std::vector<Matrix5d> samples(static_cast<std::size_t>(n));
        for (int p = 0; p < n; ++p) {
            samples[static_cast<std::size_t>(p)] = g.at(p).matrix() + eps * h.at(p).real_matrix();
        }
        return MetricField::sampled(*radius, samples);
    } catch (const MetricError& e) {
        throw MetricError("g + eps h is not a metric at eps = " + std::to_string(eps) + ": " + e.what());
    }
}

int default_grid_radius(int lattice_radius)
{
    return (3 * lattice_radius + 1) / 2;
}

MetricTensor random_metric(std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    Matrix5d b;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            b(i, j) = normal(rng);
        }
    }
    return MetricTensor(Matrix5d(b.transpose() * b / 5.0 + 0.5 * Matrix5d::Identity()));
}

} // namespace hodge5
