#include "hodge5/serialization.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hodge5 {

namespace {

template <typename T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> b;
        std::memcpy(b.data(), &v, sizeof(T));
        std::reverse(b.begin(), b.end());
        std::memcpy(&v, b.data(), sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::ostream& os, T v)
{
    v = to_little(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) {
        throw ConfigurationError("truncated container");
    }
    return to_little(v);
}

void put_magic(std::ostream& os, const char* magic)
{
    os.write(magic, 4);
    put<std::uint32_t>(os, kContainerVersion);
}

void expect_magic(std::istream& is, const char* magic)
{
    char m[4] = {};
    is.read(m, 4);
    if (!is || std::memcmp(m, magic, 4) != 0) {
        throw ConfigurationError(std::string("not a ") + magic + " container");
    }
    const auto version = get<std::uint32_t>(is);
    if (version != kContainerVersion) {
        throw ConfigurationError("unsupported container version " + std::to_string(version));
    }
}

int grid_points(bool sampled, std::uint32_t radius)
{
    return sampled ? CollocationGrid::with_radius(static_cast<int>(radius)).size() : 1;
}

std::vector<double> flatten(const Matrix5d& m)
{
    std::vector<double> out;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            out.push_back(m(i, j));
        }
    }
    return out;
}

Matrix5d unflatten(const std::vector<double>& v)
{
    if (v.size() != 25) {
        throw ConfigurationError("expected 25 matrix entries");
    }
    Matrix5d m;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            m(i, j) = v[static_cast<std::size_t>(5 * i + j)];
        }
    }
    return m;
}

template <typename F>
auto json_guard(F&& f)
{
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("malformed JSON container: ") + e.what());
    }
}

template <typename T>
void save_to(const std::filesystem::path& path, const T& value)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ConfigurationError("cannot write " + path.string());
    }
    write_binary(os, value);
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ConfigurationError("cannot read " + path.string());
    }
    return is;
}

} // namespace

void write_binary(std::ostream& os, const FormField& u)
{
    put_magic(os, "H5FM");
    put<std::uint32_t>(os, static_cast<std::uint32_t>(u.lattice().radius()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(u.rank()));
    put<std::uint8_t>(os, u.is_real() ? 1 : 0);
    for (const cdouble c : u.coeffs()) {
        put<double>(os, c.real());
        put<double>(os, c.imag());
    }
}

FormField read_form_field(std::istream& is)
{
    expect_magic(is, "H5FM");
    const auto k = get<std::uint32_t>(is);
    const auto rank = get<std::uint32_t>(is);
    const auto real = get<std::uint8_t>(is);
    if (rank > 5 || k > 64) {
        throw ConfigurationError("H5FM header out of range");
    }
    const ModeLattice lat(static_cast<int>(k));
    Eigen::VectorXcd c(static_cast<long>(lat.size()) * form_dimension(static_cast<int>(rank)));
    for (auto& x : c) {
        const double re = get<double>(is);
        x = cdouble(re, get<double>(is));
    }
    return FormField(lat, static_cast<int>(rank), std::move(c), real != 0);
}

void write_binary(std::ostream& os, const MetricField& g)
{
    put_magic(os, "H5MT");
    const bool sampled = !g.is_constant();
    put<std::uint8_t>(os, sampled ? 1 : 0);
    put<std::uint32_t>(os, sampled ? static_cast<std::uint32_t>(g.grid_radius()) : 0U);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(g.samples().size()));
    for (const auto& s : g.samples()) {
        for (double x : flatten(s.matrix())) {
            put<double>(os, x);
        }
    }
}

MetricField read_metric_field(std::istream& is)
{
    expect_magic(is, "H5MT");
    const bool sampled = get<std::uint8_t>(is) != 0;
    const auto radius = get<std::uint32_t>(is);
    const auto count = get<std::uint32_t>(is);
    if (radius > 64 || static_cast<int>(count) != grid_points(sampled, radius)) {
        throw ConfigurationError("H5MT header out of range");
    }
    std::vector<Matrix5d> samples;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<double> v(25);
        for (auto& x : v) {
            x = get<double>(is);
        }
        samples.push_back(unflatten(v));
    }
    if (!sampled) {
        return MetricField::constant(MetricTensor(samples.front()));
    }
    return MetricField::sampled(static_cast<int>(radius), samples);
}

void write_binary(std::ostream& os, const SymTensorField& h)
{
    put_magic(os, "H5ST");
    const bool sampled = !h.is_constant();
    put<std::uint8_t>(os, sampled ? 1 : 0);
    put<std::uint32_t>(os, sampled ? static_cast<std::uint32_t>(h.grid_radius()) : 0U);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(h.samples().size()));
    put<std::uint8_t>(os, h.kind() == ScalarKind::real ? 1 : 0);
    for (const auto& s : h.samples()) {
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                put<double>(os, s.matrix()(i, j).real());
                put<double>(os, s.matrix()(i, j).imag());
            }
        }
    }
}

SymTensorField read_tensor_field(std::istream& is)
{
    expect_magic(is, "H5ST");
    const bool sampled = get<std::uint8_t>(is) != 0;
    const auto radius = get<std::uint32_t>(is);
    const auto count = get<std::uint32_t>(is);
    get<std::uint8_t>(is);  // reality flag; the kind is recovered from the data
    if (radius > 64 || static_cast<int>(count) != grid_points(sampled, radius)) {
        throw ConfigurationError("H5ST header out of range");
    }
    std::vector<SymTensor> samples;
    for (std::uint32_t n = 0; n < count; ++n) {
        Matrix5cd m;
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                const double re = get<double>(is);
                m(i, j) = cdouble(re, get<double>(is));
            }
        }
        samples.emplace_back(m);
    }
    if (!sampled) {
        return SymTensorField::constant(samples.front());
    }
    return SymTensorField::sampled(static_cast<int>(radius), std::move(samples));
}

nlohmann::json to_json(const FormField& u)
{
    std::vector<double> re;
    std::vector<double> im;
    for (const cdouble c : u.coeffs()) {
        re.push_back(c.real());
        im.push_back(c.imag());
    }
    return {{"type", "H5FM"},
            {"version", kContainerVersion},
            {"K", u.lattice().radius()},
            {"rank", u.rank()},
            {"real", u.is_real()},
            {"re", re},
            {"im", im}};
}

FormField form_field_from_json(const nlohmann::json& j)
{
    return json_guard([&] {
        if (j.at("type").get<std::string>() != "H5FM" || j.at("version").get<std::uint32_t>() != kContainerVersion) {
            throw ConfigurationError("not an H5FM JSON container");
        }
        const ModeLattice lat(j.at("K").get<int>());
        const int rank = j.at("rank").get<int>();
        const auto re = j.at("re").get<std::vector<double>>();
        const auto im = j.at("im").get<std::vector<double>>();
        const std::size_t n = static_cast<std::size_t>(lat.size()) * static_cast<std::size_t>(form_dimension(rank));
        if (re.size() != n || im.size() != n) {
            throw ConfigurationError("H5FM JSON coefficient count mismatch");
        }
        Eigen::VectorXcd c(static_cast<long>(n));
        for (std::size_t i = 0; i < n; ++i) {
            c(static_cast<long>(i)) = cdouble(re[i], im[i]);
        }
        return FormField(lat, rank, std::move(c), j.at("real").get<bool>());
    });
}

nlohmann::json to_json(const MetricField& g)
{
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : g.samples()) {
        samples.push_back(flatten(s.matrix()));
    }
    nlohmann::json j{{"type", "H5MT"}, {"version", kContainerVersion}, {"sampled", !g.is_constant()}, {"samples", samples}};
    j["grid_radius"] = g.is_constant() ? 0 : g.grid_radius();
    return j;
}

MetricField metric_field_from_json(const nlohmann::json& j)
{
    return json_guard([&] {
        if (j.at("type").get<std::string>() != "H5MT" || j.at("version").get<std::uint32_t>() != kContainerVersion) {
            throw ConfigurationError("not an H5MT JSON container");
        }
        std::vector<Matrix5d> samples;
        for (const auto& s : j.at("samples")) {
            samples.push_back(unflatten(s.get<std::vector<double>>()));
        }
        if (!j.at("sampled").get<bool>()) {
            if (samples.size() != 1) {
                throw ConfigurationError("constant metric needs one sample");
            }
            return MetricField::constant(MetricTensor(samples.front()));
        }
        return MetricField::sampled(j.at("grid_radius").get<int>(), samples);
    });
}

nlohmann::json to_json(const SymTensorField& h)
{
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : h.samples()) {
        samples.push_back({{"re", flatten(s.matrix().real())}, {"im", flatten(s.matrix().imag())}});
    }
    nlohmann::json j{{"type", "H5ST"},
                     {"version", kContainerVersion},
                     {"sampled", !h.is_constant()},
                     {"real", h.kind() == ScalarKind::real},
                     {"samples", samples}};
    j["grid_radius"] = h.is_constant() ? 0 : h.grid_radius();
    return j;
}

SymTensorField tensor_field_from_json(const nlohmann::json& j)
{
    return json_guard([&] {
        if (j.at("type").get<std::string>() != "H5ST" || j.at("version").get<std::uint32_t>() != kContainerVersion) {
            throw ConfigurationError("not an H5ST JSON container");
        }
        std::vector<SymTensor> samples;
        for (const auto& s : j.at("samples")) {
            const Matrix5d re = unflatten(s.at("re").get<std::vector<double>>());
            const Matrix5d im = unflatten(s.at("im").get<std::vector<double>>());
            Matrix5cd m = re.cast<cdouble>();
            m.imag() = im;
            samples.emplace_back(m);
        }
        if (!j.at("sampled").get<bool>()) {
            if (samples.size() != 1) {
                throw ConfigurationError("constant tensor field needs one sample");
            }
            return SymTensorField::constant(samples.front());
        }
        return SymTensorField::sampled(j.at("grid_radius").get<int>(), std::move(samples));
    });
}

void save(const std::filesystem::path& path, const FormField& u)
{
    save_to(path, u);
}

void save(const std::filesystem::path& path, const MetricField& g)
{
    save_to(path, g);
}

void save(const std::filesystem::path& path, const SymTensorField& h)
{
    save_to(path, h);
}

FormField load_form_field(const std::filesystem::path& path)
{
    auto is = open_in(path);
    return read_form_field(is);
}

MetricField load_metric_field(const std::filesystem::path& path)
{
    auto is = open_in(path);
    return read_metric_field(is);
}

SymTensorField load_tensor_field(const std::filesystem::path& path)
{
    auto is = open_in(path);
    return read_tensor_field(is);
}

} // namespace hodge5
