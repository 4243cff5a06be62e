#include "cli.hpp"

#include "hodge5/eigensolver.hpp"
#include "hodge5/parallel.hpp"
#include "hodge5/perturbation.hpp"
#include "hodge5/serialization.hpp"
#include "hodge5/sylvester.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace hodge5::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Strict config access

void allow_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) {
        throw ConfigurationError(where + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigurationError("unknown key \"" + key + "\" in " + where);
        }
    }
}

const json& require(const json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key)) {
        throw ConfigurationError("missing key \"" + key + "\" in " + where);
    }
    return j.at(key);
}

template <typename T>
T get_as(const json& v, const std::string& what)
{
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigurationError(what + " has the wrong type");
    }
}

template <typename T>
T optional(const json& j, const std::string& key, T fallback)
{
    return j.contains(key) ? get_as<T>(j.at(key), key) : fallback;
}

double positive(const json& j, const std::string& key, double fallback)
{
    const double v = optional<double>(j, key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigurationError(key + " must be positive");
    }
    return v;
}

int nonnegative(const json& j, const std::string& key, int fallback)
{
    const int v = optional<int>(j, key, fallback);
    if (v < 0) {
        throw ConfigurationError(key + " must be nonnegative");
    }
    return v;
}

Matrix5d matrix5(const json& v, const std::string& what)
{
    const auto rows = get_as<std::vector<std::vector<double>>>(v, what);
    if (rows.size() != 5) {
        throw ConfigurationError(what + " must be a 5x5 matrix");
    }
    Matrix5d m;
    for (int i = 0; i < 5; ++i) {
        if (rows[static_cast<std::size_t>(i)].size() != 5) {
            throw ConfigurationError(what + " must be a 5x5 matrix");
        }
        for (int j = 0; j < 5; ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

Vector5d vector5(const json& v, const std::string& what)
{
    const auto xs = get_as<std::vector<double>>(v, what);
    if (xs.size() != 5) {
        throw ConfigurationError(what + " must have 5 entries");
    }
    return Vector5d(xs.data());
}

// ---------------------------------------------------------------------------

struct Context {
    json config;
    fs::path config_dir;
    fs::path out_dir;
    std::uint64_t seed = 0;
    int radius = 0;
    MetricField metric = MetricField::flat();
    std::string metric_label;
};

const std::set<std::string> kCommonKeys{"schema_version", "metric", "lattice_radius", "seed"};

std::set<std::string> with_common(std::set<std::string> keys)
{
    keys.insert(kCommonKeys.begin(), kCommonKeys.end());
    return keys;
}

MetricField build_metric(const json& m, const Context& ctx, std::string& label)
{
    const std::string type = get_as<std::string>(require(m, "type", "metric"), "metric.type");
    if (type == "flat") {
        allow_keys(m, {"type"}, "metric");
        label = "flat";
        return MetricField::flat();
    }
    if (type == "constant") {
        allow_keys(m, {"type", "matrix"}, "metric");
        label = "constant";
        return MetricField::constant(MetricTensor(matrix5(require(m, "matrix", "metric"), "metric.matrix")));
    }
    if (type == "random_constant") {
        allow_keys(m, {"type", "seed"}, "metric");
        std::mt19937_64 rng(optional<std::uint64_t>(m, "seed", ctx.seed));
        label = "random_constant";
        return MetricField::constant(random_metric(rng));
    }
    if (type == "conformal") {
        allow_keys(m, {"type", "f", "grid_radius"}, "metric");
        const TrigPolynomial f = TrigPolynomial::parse(get_as<std::string>(require(m, "f", "metric"), "metric.f"));
        const int kg = nonnegative(m, "grid_radius", default_grid_radius(ctx.radius));
        label = "conformal(" + f.to_string() + ")";
        return MetricField::conformal(f, kg);
    }
    if (type == "sampled") {
        allow_keys(m, {"type", "file"}, "metric");
        fs::path file = get_as<std::string>(require(m, "file", "metric"), "metric.file");
        if (file.is_relative()) {
            file = ctx.config_dir / file;
        }
        label = "sampled(" + file.filename().string() + ")";
        if (file.extension() == ".json") {
            std::ifstream is(file);
            if (!is) {
                throw ConfigurationError("cannot read " + file.string());
            }
            json j;
            try {
                is >> j;
            } catch (const json::exception& e) {
                throw ConfigurationError(std::string("malformed metric file: ") + e.what());
            }
            return metric_field_from_json(j);
        }
        return load_metric_field(file);
    }
    throw ConfigurationError("unknown metric type \"" + type + "\"");
}

Context load_context(const fs::path& config_path, const std::optional<std::uint64_t>& seed, const fs::path& out)
{
    Context ctx;
    std::ifstream is(config_path);
    if (!is) {
        throw ConfigurationError("cannot read config " + config_path.string());
    }
    try {
        is >> ctx.config;
    } catch (const json::exception& e) {
        throw ConfigurationError(std::string("malformed config: ") + e.what());
    }
    if (!ctx.config.is_object()) {
        throw ConfigurationError("config must be a JSON object");
    }
    const int version = get_as<int>(require(ctx.config, "schema_version", "config"), "schema_version");
    if (version != kSchemaVersion) {
        throw ConfigurationError("unsupported schema_version " + std::to_string(version));
    }
    ctx.config_dir = config_path.parent_path();
    ctx.out_dir = out;
    ctx.seed = seed ? *seed : optional<std::uint64_t>(ctx.config, "seed", 0);
    ctx.radius = get_as<int>(require(ctx.config, "lattice_radius", "config"), "lattice_radius");
    if (ctx.radius < 0 || ctx.radius > 8) {
        throw ConfigurationError("lattice_radius must be in 0..8");
    }
    ctx.metric = build_metric(require(ctx.config, "metric", "config"), ctx, ctx.metric_label);
    if (!ctx.metric.is_constant() && 2 * ctx.metric.grid_radius() + 1 < 2 * ctx.radius + 1) {
        throw ConfigurationError("metric grid radius is smaller than the lattice radius");
    }
    return ctx;
}

struct Output {
    std::string name;
    std::string content;
};

void write_outputs(const fs::path& dir, const std::vector<Output>& files)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigurationError("cannot create output directory " + dir.string());
    }
    for (const auto& f : files) {
        std::ofstream os(dir / f.name, std::ios::binary);
        if (!os) {
            throw ConfigurationError("cannot write " + (dir / f.name).string());
        }
        os << f.content;
    }
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

json header(const Context& ctx, const std::string& command)
{
    return {{"schema_version", kSchemaVersion},
            {"command", command},
            {"metric", ctx.metric_label},
            {"lattice_radius", ctx.radius},
            {"seed", ctx.seed}};
}

SpectrumOptions spectrum_options(const json& c)
{
    SpectrumOptions o;
    o.count = nonnegative(c, "count", 0);
    o.residual_tolerance = positive(c, "residual_tolerance", o.residual_tolerance);
    o.dense_threshold = nonnegative(c, "dense_threshold", o.dense_threshold);
    return o;
}

// ---------------------------------------------------------------------------
// spectrum

int cmd_spectrum(const Context& ctx)
{
    const json& c = ctx.config;
    allow_keys(c, with_common({"operator", "count", "cluster_tolerance", "residual_tolerance", "dense_threshold"}), "config");
    const std::string op = optional<std::string>(c, "operator", "laplacian");
    SpectrumOptions so = spectrum_options(c);
    so.seed = ctx.seed;
    const Galerkin g = TorusGalerkin::create(ctx.metric, ctx.radius);

    SpectrumReport rep;
    if (op == "laplacian") {
        PairOptions po;
        po.count = so.count;
        po.cluster_tolerance = c.contains("cluster_tolerance") ? positive(c, "cluster_tolerance", 1.0) : 0.0;
        po.spectrum = so;
        po.spectrum.vectors = false;
        rep = pair_spectrum(g, po);
    } else if (op == "beltrami") {
        so.vectors = false;
        const SpectrumResult res = compute_spectrum(beltrami(g), DomainRestriction::coexact, so);
        std::vector<double> values;
        for (const auto& p : res.pairs) {
            values.push_back(p.value);
        }
        const double tol = c.contains("cluster_tolerance") ? positive(c, "cluster_tolerance", 1.0)
                                                           : default_cluster_tolerance(values);
        rep = cluster(values, tol);
        rep.operator_name = "beltrami co-exact";
        rep.method = res.method;
        rep.lattice_radius = ctx.radius;
        // Values are sorted by |lambda|, so membership is matched by value.
        for (auto& cl : rep.clusters) {
            for (double m : cl.members) {
                for (const auto& p : res.pairs) {
                    if (p.value == m) {
                        cl.residuals.push_back(p.residual);
                        break;
                    }
                }
            }
            cl.verdict = cl.multiplicity == 1 ? "simple" : "degenerate";
        }
        if (!res.complete && !rep.clusters.empty()) {
            // The count cut may split the clusters at either end of the |lambda| ordering.
            const double edge = std::abs(res.pairs.back().value);
            for (auto& cl : rep.clusters) {
                const bool near_cut = std::abs(std::abs(cl.value) - edge) <= tol;
                const bool past = res.next_value && std::abs(std::abs(*res.next_value) - std::abs(cl.value)) <= tol;
                if (near_cut && (!res.next_value || past)) {
                    cl.resolved = false;
                    cl.verdict = "unresolved";
                }
            }
        }
    } else {
        throw ConfigurationError("operator must be \"laplacian\" or \"beltrami\"");
    }
    rep.metric = ctx.metric_label;
    json j = header(ctx, "spectrum");
    j["report"] = rep.to_json();
    int pairs = 0, non_generic = 0, unresolved = 0;
    for (const auto& cl : rep.clusters) {
        pairs += cl.verdict == "pair";
        non_generic += cl.verdict == "non-generic";
        unresolved += !cl.resolved;
    }
    j["summary"] = {{"clusters", rep.clusters.size()},
                    {"eigenvalues", rep.total_multiplicity()},
                    {"pairs", pairs},
                    {"non_generic", non_generic},
                    {"unresolved", unresolved}};
    write_outputs(ctx.out_dir, {{"spectrum.json", dump(j)}, {"spectrum.csv", rep.to_csv()}});
    return ok;
}

// ---------------------------------------------------------------------------
// split

DirectionFamily parse_family(const std::string& s)
{
    if (s == "constant_plus_low_frequency") {
        return DirectionFamily::constant_plus_low_frequency;
    }
    if (s == "constant") {
        return DirectionFamily::constant;
    }
    if (s == "conformal_constant") {
        return DirectionFamily::conformal_constant;
    }
    throw ConfigurationError("unknown direction family \"" + s + "\"");
}

int cmd_split(const Context& ctx)
{
    const json& c = ctx.config;
    allow_keys(c, with_common({"lambda", "direction", "eps_grid", "degree", "gap", "count", "residual_tolerance",
                               "dense_threshold"}),
               "config");
    const double lambda = get_as<double>(require(c, "lambda", "config"), "lambda");
    BranchOptions bo;
    if (c.contains("eps_grid")) {
        bo.eps_grid = get_as<std::vector<double>>(c.at("eps_grid"), "eps_grid");
        for (double e : bo.eps_grid) {
            if (e == 0.0 || !std::isfinite(e)) {
                throw ConfigurationError("eps_grid entries must be finite and nonzero");
            }
        }
    }
    bo.degree = optional<int>(c, "degree", bo.degree);
    if (bo.degree < 1) {
        throw ConfigurationError("degree must be at least 1");
    }
    bo.gap = c.contains("gap") ? positive(c, "gap", 1.0) : 0.0;
    bo.spectrum = spectrum_options(c);
    bo.spectrum.seed = ctx.seed;

    const json dir = c.contains("direction") ? c.at("direction") : json{{"type", "search"}};
    const std::string type = get_as<std::string>(require(dir, "type", "direction"), "direction.type");
    const Galerkin g = TorusGalerkin::create(ctx.metric, ctx.radius);
    const Eigenspace es = beltrami_eigenspace(g, lambda, bo.spectrum);

    json j = header(ctx, "split");
    j["direction"] = dir;
    j["gap"] = es.gap;
    std::optional<Direction> h;
    std::optional<SplittingPrediction> pred;
    if (type == "search") {
        allow_keys(dir, {"type", "family", "attempts"}, "direction");
        const DirectionFamily fam = parse_family(optional<std::string>(dir, "family", "constant_plus_low_frequency"));
        const int attempts = optional<int>(dir, "attempts", 8);
        if (attempts < 1) {
            throw ConfigurationError("attempts must be positive");
        }
        SplittingSearch s = find_splitting_direction(g, lambda, es.basis, attempts, ctx.seed, fam);
        j["search"] = {{"found", s.found()}, {"attempts", s.attempts}, {"spreads", s.spreads}};
        if (!s.found()) {
            j["m"] = es.basis.size();
            j["lambda"] = lambda;
            write_outputs(ctx.out_dir, {{"split.json", dump(j)}});
            return ok;
        }
        h = std::move(s.direction);
        pred = std::move(s.prediction);
    } else if (type == "constant") {
        allow_keys(dir, {"type", "matrix"}, "direction");
        h = Direction::constant(SymTensor(matrix5(require(dir, "matrix", "direction"), "direction.matrix")));
    } else if (type == "random_constant") {
        allow_keys(dir, {"type"}, "direction");
        std::mt19937_64 rng(ctx.seed);
        h = Direction::constant(random_sym_tensor(rng));
    } else if (type == "metric") {
        allow_keys(dir, {"type"}, "direction");
        h = Direction::scaled_metric(ctx.metric, 1.0);
    } else {
        throw ConfigurationError("unknown direction type \"" + type + "\"");
    }
    if (!pred) {
        pred = predict_splitting(g, *h, lambda, es.basis);
    }
    const BranchTrace trace = trace_branches(g, *h, lambda, bo);
    const PerturbationReport rep = compare_splitting(*pred, trace, ctx.seed);
    j.update(rep.to_json());
    j["command"] = "split";
    j["spread"] = pred->spread();
    j["hermitian_defect"] = pred->hermitian_defect;
    j["window"] = trace.window;

    std::ostringstream csv;
    csv.precision(17);
    csv << "eps";
    for (int b = 0; b < trace.m; ++b) {
        csv << ",l" << b + 1;
    }
    csv << '\n';
    bool zero_written = false;
    for (std::size_t i = 0; i < trace.eps.size(); ++i) {
        if (!zero_written && trace.eps[i] > 0.0) {
            csv << 0.0;
            for (int b = 0; b < trace.m; ++b) {
                csv << ',' << lambda;
            }
            csv << '\n';
            zero_written = true;
        }
        csv << trace.eps[i];
        for (double v : trace.branches[i]) {
            csv << ',' << v;
        }
        csv << '\n';
    }
    write_outputs(ctx.out_dir, {{"split.json", dump(j)}, {"branches.csv", csv.str()}});
    return ok;
}

// ---------------------------------------------------------------------------
// sylvester

GridTwoForm grid_field(const json& node, const Context& ctx, int grid_radius, std::mt19937_64& rng,
                       const std::vector<char>& mask, const GridTwoForm* w, const std::string& where)
{
    const std::string type = get_as<std::string>(require(node, "type", where), where + ".type");
    const int n = CollocationGrid::with_radius(grid_radius).size();
    if (type == "zero") {
        allow_keys(node, {"type"}, where);
        return {grid_radius, Eigen::VectorXcd::Zero(10L * n)};
    }
    if (type == "random") {
        allow_keys(node, {"type"}, where);
        return sample_two_form(FormField::random(ModeLattice(ctx.radius), 2, rng, true), grid_radius);
    }
    if (type == "random_masked") {
        allow_keys(node, {"type"}, where);
        std::normal_distribution<double> normal;
        GridTwoForm f{grid_radius, Eigen::VectorXcd::Zero(10L * n)};
        for (int p = 0; p < n; ++p) {
            const bool inside = mask.empty() || mask[static_cast<std::size_t>(p)];
            for (int i = 0; i < 10; ++i) {
                const double x = normal(rng);
                if (inside) {
                    f.values(10L * p + i) = x;
                }
            }
        }
        return f;
    }
    if (type == "equal_w") {
        allow_keys(node, {"type"}, where);
        if (!w) {
            throw ConfigurationError(where + ": equal_w is only valid for v");
        }
        return *w;
    }
    if (type == "file") {
        allow_keys(node, {"type", "file"}, where);
        fs::path file = get_as<std::string>(require(node, "file", where), where + ".file");
        if (file.is_relative()) {
            file = ctx.config_dir / file;
        }
        const FormField u = load_form_field(file);
        if (u.rank() != 2) {
            throw ConfigurationError(where + ": expected a 2-form");
        }
        return sample_two_form(u, grid_radius);
    }
    throw ConfigurationError("unknown field type \"" + type + "\" in " + where);
}

json sylvester_suite(int pairs, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto antisym = [&] {
        Matrix5<double> a;
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                a(i, j) = normal(rng);
            }
        }
        return Matrix5<double>(a - a.transpose());
    };
    double worst_res = 0.0, worst_sym_gain = 0.0, worst_kernel_asym = 0.0, worst_orth = 0.0;
    int min_dim = 25, max_dim = 0;
    for (int t = 0; t < pairs; ++t) {
        const Matrix5<double> w = antisym();
        const Matrix5<double> v = antisym();
        const auto sol = solve_sylvester(w, v);
        worst_res = std::max(worst_res, sol.residual / v.norm());
        worst_sym_gain = std::max(worst_sym_gain, sol.symmetric_residual - sol.residual);
        const auto ker = kernel_basis(w);
        min_dim = std::min(min_dim, static_cast<int>(ker.size()));
        max_dim = std::max(max_dim, static_cast<int>(ker.size()));
        for (const auto& e : ker) {
            worst_kernel_asym = std::max(worst_kernel_asym, (e - e.transpose()).norm());
            worst_orth = std::max(worst_orth, std::abs(e.cwiseProduct(v).sum()) / v.norm());
        }
    }
    return {{"pairs", pairs},
            {"max_relative_residual", worst_res},
            {"max_symmetrization_loss", worst_sym_gain},
            {"max_kernel_asymmetry", worst_kernel_asym},
            {"max_relative_orthogonality", worst_orth},
            {"kernel_dimension_min", min_dim},
            {"kernel_dimension_max", max_dim}};
}

int cmd_sylvester(const Context& ctx)
{
    const json& c = ctx.config;
    allow_keys(c, with_common({"grid_radius", "w", "v", "mask", "suite_pairs"}), "config");
    int radius = ctx.metric.is_constant() ? nonnegative(c, "grid_radius", ctx.radius) : ctx.metric.grid_radius();
    if (!ctx.metric.is_constant() && c.contains("grid_radius") && c.at("grid_radius") != radius) {
        throw ConfigurationError("grid_radius must match the sampled metric grid");
    }
    const CollocationGrid grid = CollocationGrid::with_radius(radius);
    std::vector<char> mask;
    if (c.contains("mask")) {
        const json& m = c.at("mask");
        const std::string type = get_as<std::string>(require(m, "type", "mask"), "mask.type");
        if (type == "box") {
            allow_keys(m, {"type", "lower", "upper"}, "mask");
            const Vector5d lo = vector5(require(m, "lower", "mask"), "mask.lower");
            const Vector5d hi = vector5(require(m, "upper", "mask"), "mask.upper");
            mask.resize(static_cast<std::size_t>(grid.size()));
            for (int p = 0; p < grid.size(); ++p) {
                const Vector5d x = grid.point(p);
                mask[static_cast<std::size_t>(p)] = ((x.array() >= lo.array()) && (x.array() <= hi.array())).all();
            }
        } else if (type == "all") {
            allow_keys(m, {"type"}, "mask");
        } else {
            throw ConfigurationError("unknown mask type \"" + type + "\"");
        }
    }
    std::mt19937_64 rng(ctx.seed);
    const json wspec = c.contains("w") ? c.at("w") : json{{"type", "random"}};
    const json vspec = c.contains("v") ? c.at("v") : json{{"type", "random_masked"}};
    const GridTwoForm w = grid_field(wspec, ctx, radius, rng, mask, nullptr, "w");
    const GridTwoForm v = grid_field(vspec, ctx, radius, rng, mask, &w, "v");
    const int suite_pairs = nonnegative(c, "suite_pairs", 1000);

    const DensityResult res = density_construct(ctx.metric, w, v, mask);
    double t_max = 0.0;
    for (const auto& t : res.t.samples()) {
        t_max = std::max(t_max, t.matrix().cwiseAbs().maxCoeff());
    }
    json j = header(ctx, "sylvester");
    j["grid_radius"] = res.grid_radius;
    j["masked_points"] = res.masked_points;
    j["residual"] = res.residual;
    j["v_max"] = res.v_max;
    j["t_max"] = t_max;
    j["suite"] = sylvester_suite(suite_pairs, ctx.seed);
    write_outputs(ctx.out_dir, {{"sylvester.json", dump(j)}});
    return ok;
}

// ---------------------------------------------------------------------------
// decompose

struct Check {
    std::string name;
    double value;
    double tolerance;
    bool pass;
};

json checks_json(const std::vector<Check>& checks, bool& all)
{
    json arr = json::array();
    all = true;
    for (const auto& c : checks) {
        arr.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass}});
        all = all && c.pass;
    }
    return arr;
}

Check bound(const std::string& name, double value, double tol)
{
    return {name, value, tol, std::isfinite(value) && value <= tol};
}

int harmonic_dimension(const TorusGalerkin& g, const OperatorHandle& harmonic, int k, std::mt19937_64& rng)
{
    const int probes = form_dimension(k) + 4;
    std::vector<FormField> h;
    for (int i = 0; i < probes; ++i) {
        h.push_back(harmonic(FormField::random(g.lattice(), k, rng)));
    }
    Eigen::MatrixXcd gram(probes, probes);
    for (int a = 0; a < probes; ++a) {
        for (int b = 0; b < probes; ++b) {
            gram(a, b) = l2_inner(g, h[static_cast<std::size_t>(b)], h[static_cast<std::size_t>(a)]);
        }
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(0.5 * (gram + gram.adjoint())).eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    int rank = 0;
    for (int i = 0; i < ev.size(); ++i) {
        rank += ev(i) > 1e-8 * top;
    }
    return rank;
}

int cmd_decompose(const Context& ctx)
{
    const json& c = ctx.config;
    allow_keys(c, with_common({"rank", "samples", "tolerance"}), "config");
    const int k = optional<int>(c, "rank", 2);
    if (k < 0 || k > 5) {
        throw ConfigurationError("rank must be in 0..5");
    }
    const int samples = std::max(1, nonnegative(c, "samples", 4));
    const double tol = positive(c, "tolerance", 1e-9);
    const Galerkin g = TorusGalerkin::create(ctx.metric, ctx.radius);
    const HodgeProjectors p = hodge_projectors(g, k);
    std::mt19937_64 rng(ctx.seed);
    const std::array<const OperatorHandle*, 3> ps{&p.harmonic, &p.exact, &p.coexact};
    double idem = 0.0, orth = 0.0, complete = 0.0;
    for (int s = 0; s < samples; ++s) {
        const FormField u = FormField::random(g->lattice(), k, rng);
        const double nu = l2_norm(*g, u);
        std::array<FormField, 3> parts{ps[0]->map(u), ps[1]->map(u), ps[2]->map(u)};
        for (int a = 0; a < 3; ++a) {
            idem = std::max(idem, l2_norm(*g, (*ps[static_cast<std::size_t>(a)])(parts[static_cast<std::size_t>(a)]) -
                                                   parts[static_cast<std::size_t>(a)]) / nu);
            for (int b = a + 1; b < 3; ++b) {
                orth = std::max(orth, std::abs(l2_inner(*g, parts[static_cast<std::size_t>(a)],
                                                        parts[static_cast<std::size_t>(b)])) / (nu * nu));
            }
        }
        complete = std::max(complete, l2_norm(*g, u - parts[0] - parts[1] - parts[2]) / nu);
    }
    const int dim = harmonic_dimension(*g, p.harmonic, k, rng);
    const int expected = form_dimension(k);
    std::vector<Check> checks{bound("idempotence", idem, tol), bound("orthogonality", orth, tol),
                              bound("completeness", complete, tol),
                              {"harmonic_dimension", static_cast<double>(dim), static_cast<double>(expected), dim == expected}};
    bool all = true;
    json j = header(ctx, "decompose");
    j["rank"] = k;
    j["harmonic_dimension"] = dim;
    j["checks"] = checks_json(checks, all);
    j["pass"] = all;
    write_outputs(ctx.out_dir, {{"decompose.json", dump(j)}});
    return all ? ok : invariant_violation;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const Context& ctx)
{
    const json& c = ctx.config;
    allow_keys(c, with_common({"samples", "eigenpairs", "dense_threshold"}), "config");
    const int samples = std::max(1, nonnegative(c, "samples", 3));
    const int eigenpairs = nonnegative(c, "eigenpairs", 6);
    const Galerkin g = TorusGalerkin::create(ctx.metric, ctx.radius);
    std::mt19937_64 rng(ctx.seed);
    std::vector<Check> checks;

    bool signs = laplacian_sign(5, 2) == -1;
    for (int n = 1; n <= 6; ++n) {
        for (int k = 0; k <= n; ++k) {
            signs = signs && codifferential_sign(n, k) == (((n * (k + 1) + 1) % 2 == 0) ? 1 : -1);
        }
    }
    checks.push_back({"sign_table", signs ? 0.0 : 1.0, 0.0, signs});

    double dd = 0.0, star2 = 0.0, delta = 0.0, lap = 0.0;
    const auto proj = hodge_projectors(g, 2);
    const OperatorHandle b = beltrami(g);
    for (int s = 0; s < samples; ++s) {
        for (int k = 0; k <= 3; ++k) {
            const FormField u = FormField::random(g->lattice(), k, rng);
            dd = std::max(dd, exterior_d(exterior_d(u)).coeffs().norm() / u.coeffs().norm());
        }
        const FormField u2 = FormField::random(g->lattice(), 2, rng);
        star2 = std::max(star2, l2_norm(*g, hodge_star_field(*g, hodge_star_field(*g, u2)) - u2) / l2_norm(*g, u2));
        const FormField u3 = FormField::random(g->lattice(), 3, rng);
        FormField sds = hodge_star_field(*g, exterior_d(hodge_star_field(*g, u3)));
        sds *= static_cast<double>(codifferential_sign(5, 3));
        delta = std::max(delta, l2_norm(*g, codifferential(*g, u3) - sds) / std::max(l2_norm(*g, sds), 1e-300));
        const FormField w = proj.coexact(u2);
        const FormField lw = hodge_laplacian(g, 2)(w);
        FormField bbw = b(b(w));
        bbw *= static_cast<double>(laplacian_sign(5, 2));
        lap = std::max(lap, l2_norm(*g, lw - bbw) / l2_norm(*g, lw));
    }
    checks.push_back(bound("d_squared", dd, 1e-12));
    checks.push_back(bound("star_squared", star2, 1e-10));
    checks.push_back(bound("codifferential_formula", delta, 1e-10));
    checks.push_back(bound("laplacian_is_minus_beltrami_squared", lap, 1e-10));
    checks.push_back(bound("beltrami_skew", symmetry_defect(b, samples, ctx.seed), 1e-10));
    checks.push_back(bound("laplacian_symmetric", symmetry_defect(hodge_laplacian(g, 2), samples, ctx.seed), 1e-10));

    if (eigenpairs > 0 && g->lattice().radius() > 0) {
        SpectrumOptions so;
        so.count = eigenpairs;
        so.seed = ctx.seed;
        so.dense_threshold = nonnegative(c, "dense_threshold", so.dense_threshold);
        double ba = 0.0, cross = 0.0, la = 0.0;
        for (const auto& p : compute_spectrum(b, DomainRestriction::coexact, so).pairs) {
            const RealPair r = realify(g, p.vector, p.value);
            ba = std::max({ba, r.beltrami_alpha_defect, r.beltrami_beta_defect});
            cross = std::max(cross, r.cross_inner);
            la = std::max({la, r.laplace_alpha_defect, r.laplace_beta_defect});
        }
        checks.push_back(bound("realification_beltrami", ba, 1e-8));
        checks.push_back(bound("realification_orthogonality", cross, 1e-8));
        checks.push_back(bound("realification_laplacian", la, 1e-8));
    }
    bool all = true;
    json j = header(ctx, "verify");
    j["checks"] = checks_json(checks, all);
    j["pass"] = all;
    write_outputs(ctx.out_dir, {{"verify.json", dump(j)}});
    return all ? ok : invariant_violation;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Spectral exterior calculus on the 5-torus", "hodge5"};
    app.require_subcommand(1);
    std::string config;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config, "JSON experiment config")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--threads", threads, "worker threads (default: H5_THREADS or 1)")->check(CLI::PositiveNumber);
    app.fallthrough();
    for (const char* name : {"spectrum", "split", "sylvester", "decompose", "verify"}) {
        app.add_subcommand(name);
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (threads) {
            set_thread_count(*threads);
        }
        const Context ctx = load_context(config, seed, out_dir);
        if (command == "spectrum") {
            return cmd_spectrum(ctx);
        }
        if (command == "split") {
            return cmd_split(ctx);
        }
        if (command == "sylvester") {
            return cmd_sylvester(ctx);
        }
        if (command == "decompose") {
            return cmd_decompose(ctx);
        }
        return cmd_verify(ctx);
    } catch (const InvariantViolation& e) {
        err << "invariant violation: " << e.what() << '\n';
        return invariant_violation;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return numerical_error;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
}

} // namespace hodge5::cli
