#include "bvfilter/io.hpp"

#include "bvfilter/error.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <unistd.h>

namespace bvfilter {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'B', 'V', 'F', 'D'};
constexpr std::uint32_t kSnapshotVersion = 1;

[[noreturn]] void bad(const std::string& what) { throw IoError("scenario: " + what); }

const json& field(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) bad(std::string("missing field '") + key + "'");
    return obj.at(key);
}

double number(const json& v, const char* what) {
    if (!v.is_number()) bad(std::string(what) + " must be a number");
    return v.get<double>();
}

Eigen::VectorXd vector_of(const json& v, std::size_t dim, const char* what) {
    if (v.is_number()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), v.get<double>());
    if (!v.is_array() || v.size() != dim) bad(std::string(what) + " must be a number or an array of length " + std::to_string(dim));
    Eigen::VectorXd out(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], what);
    return out;
}

// A scalar means s·I (rows == cols) or a 1x1 block.
Eigen::MatrixXd matrix_of(const json& v, std::size_t rows, std::size_t cols, const char* what) {
    const auto r = static_cast<Eigen::Index>(rows);
    const auto c = static_cast<Eigen::Index>(cols);
    if (v.is_number()) {
        if (rows != cols) bad(std::string(what) + " must be a full matrix");
        return v.get<double>() * Eigen::MatrixXd::Identity(r, c);
    }
    if (!v.is_array() || v.size() != rows) bad(std::string(what) + " must have " + std::to_string(rows) + " rows");
    Eigen::MatrixXd out(r, c);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols) bad(std::string(what) + " must have " + std::to_string(cols) + " columns");
        for (std::size_t j = 0; j < cols; ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(v[i][j], what);
    }
    return out;
}

std::string type_of(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return field(v, "type").get<std::string>();
}

std::shared_ptr<const VectorField> drift_of(const json& v, std::size_t m) {
    const std::string t = type_of(v);
    if (t == "zero") return std::make_shared<ZeroField>(m, m);
    if (t == "linear")
        return std::make_shared<AffineField>(matrix_of(field(v, "A"), m, m, "b.A"),
                                             v.contains("c") ? vector_of(v["c"], m, "b.c") : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m)));
    if (t == "cubic_clipped")
        return std::make_shared<ClippedCubicField>(m, number(field(v, "coef"), "b.coef"), number(field(v, "clip"), "b.clip"));
    bad("unknown drift preset '" + t + "'");
}

std::shared_ptr<const VectorField> observation_of(const json& v, std::size_t m, std::size_t n) {
    const std::string t = type_of(v);
    if (t == "zero") return std::make_shared<ZeroField>(m, n);
    if (t == "linear")
        return std::make_shared<AffineField>(matrix_of(field(v, "H"), n, m, "h.H"),
                                             v.contains("g") ? vector_of(v["g"], n, "h.g") : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
    if (t == "tanh") {
        if (n != m) bad("tanh observation needs n == m");
        const bool obj = v.is_object();
        return std::make_shared<TanhField>(m, obj ? v.value("scale", 1.0) : 1.0, obj ? v.value("amplitude", 1.0) : 1.0);
    }
    bad("unknown observation preset '" + t + "'");
}

InitialLaw xi_of(const json& v, std::size_t m, const std::optional<SpatialGrid>& grid) {
    const std::string t = type_of(v);
    if (t == "gaussian") return InitialLaw::gaussian(vector_of(field(v, "mean"), m, "xi.mean"), matrix_of(field(v, "cov"), m, m, "xi.cov"));
    if (t == "mixture") {
        std::vector<GaussianComponent> parts;
        for (const auto& c : field(v, "components"))
            parts.push_back({number(field(c, "weight"), "xi.weight"), vector_of(field(c, "mean"), m, "xi.mean"),
                             matrix_of(field(c, "cov"), m, m, "xi.cov")});
        return InitialLaw::mixture(std::move(parts));
    }
    if (t == "grid") {
        if (!grid) bad("grid initial law needs a spatial grid");
        return InitialLaw::grid_density(*grid, vector_of(field(v, "values"), grid->size(), "xi.values"));
    }
    bad("unknown initial law '" + t + "'");
}

SpatialGrid grid_of(const json& v, std::size_t m) {
    std::vector<double> lower, upper;
    std::vector<std::size_t> counts;
    const Eigen::VectorXd lo = vector_of(field(v, "lower"), m, "grid.lower");
    const Eigen::VectorXd hi = vector_of(field(v, "upper"), m, "grid.upper");
    const json& c = field(v, "counts");
    for (std::size_t i = 0; i < m; ++i) {
        lower.push_back(lo[static_cast<Eigen::Index>(i)]);
        upper.push_back(hi[static_cast<Eigen::Index>(i)]);
        counts.push_back(c.is_array() ? c.at(i).get<std::size_t>() : c.get<std::size_t>());
    }
    return SpatialGrid(lower, upper, counts);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& s : out) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::ptrdiff_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }
};

Table parse_table(std::string_view text) {
    Table table;
    std::istringstream in{std::string(text)};
    std::string line;
    bool schema_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            if (line.rfind(kSchemaLine, 0) == 0) schema_seen = true;
            continue;
        }
        auto cells = split(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) throw IoError("csv: row width differs from header");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            try {
                row.push_back(std::stod(c));
            } catch (const std::exception&) {
                throw IoError("csv: not a number: '" + c + "'");
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (!schema_seen) throw IoError("csv: missing schema line");
    if (table.header.empty()) throw IoError("csv: missing header");
    return table;
}

template <class T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("snapshot: truncated file");
    return v;
}

}  // namespace

ScenarioSpec parse_scenario(const json& doc) {
    ScenarioSpec spec;
    const json& dims = field(doc, "dims");
    spec.m = dims.value("m", std::size_t{1});
    spec.n = dims.value("n", std::size_t{1});
    spec.d = dims.value("d", spec.m);
    spec.time = TimeGrid(number(field(doc, "horizon"), "horizon"), field(doc, "steps").get<std::size_t>());
    if (doc.contains("grid")) spec.space = grid_of(doc["grid"], spec.m);

    const json& coeffs = field(doc, "coeffs");
    spec.drift = drift_of(field(coeffs, "b"), spec.m);
    const json& sigma = field(coeffs, "sigma");
    if (type_of(sigma) != "constant") bad("unknown diffusion preset '" + type_of(sigma) + "'");
    spec.diffusion = std::make_shared<ConstantDiffusion>(matrix_of(field(sigma, "matrix"), spec.m, spec.d, "sigma.matrix"));
    spec.observation = observation_of(field(coeffs, "h"), spec.m, spec.n);
    const json& gamma = field(coeffs, "gamma");
    if (type_of(gamma) != "constant") bad("unknown gamma preset '" + type_of(gamma) + "'");
    spec.gamma = std::make_shared<ConstantNoise>(matrix_of(field(gamma, "matrix"), spec.n, spec.n, "gamma.matrix"));

    spec.xi = xi_of(field(doc, "xi"), spec.m, spec.space);

    std::vector<Jump> jumps;
    std::vector<Knot> knots;
    if (doc.contains("nu")) {
        const json& nu = doc["nu"];
        for (const auto& j : nu.value("jumps", json::array())) {
            if (!j.is_array() || j.size() != 2) bad("nu.jumps entries are [t, vec]");
            jumps.push_back({number(j[0], "jump time"), vector_of(j[1], spec.m, "jump size")});
        }
        for (const auto& k : nu.value("continuous", json::array())) {
            if (!k.is_array() || k.size() != 2) bad("nu.continuous entries are [t, vec]");
            knots.push_back({number(k[0], "knot time"), vector_of(k[1], spec.m, "knot value")});
        }
    }
    spec.nu = BVPath(spec.time, spec.m, std::move(jumps), std::move(knots), number(field(doc, "fuel_K"), "fuel_K"));
    spec.y0 = doc.contains("y0") ? vector_of(doc["y0"], spec.n, "y0") : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.n));
    if (doc.contains("delta")) spec.gamma_floor = number(doc["delta"], "delta");
    if (doc.contains("bounds")) {
        const json& b = doc["bounds"];
        if (b.contains("b")) spec.drift_bound = number(b["b"], "bounds.b");
        if (b.contains("sigma")) spec.diffusion_bound = number(b["sigma"], "bounds.sigma");
        if (b.contains("h")) spec.observation_bound = number(b["h"], "bounds.h");
    }
    spec.seed = doc.value("seed", std::uint64_t{0});
    return spec;
}

ScenarioSpec parse_scenario_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("scenario: invalid JSON: ") + e.what());
    }
    try {
        return parse_scenario(doc);
    } catch (const json::exception& e) {
        throw IoError(std::string("scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) { return Scenario(parse_scenario_text(read_text(path))); }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const json& doc) { write_atomic(path, doc.dump(2) + "\n"); }

std::string track_csv(const FilterTrack& track) {
    const std::size_t m = track.dim();
    std::string out(kSchemaLine);
    out += "\n# method=" + track.method + "\nt";
    for (std::size_t i = 0; i < m; ++i) out += ",mean_" + std::to_string(i + 1);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) out += ",cov_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
    out += ",log_mass";
    for (const auto& [name, _] : track.extras) out += "," + name;
    out += "\n";
    for (std::size_t k = 0; k < track.nodes(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out += fmt(track.t[k]);
        for (std::size_t i = 0; i < m; ++i) out += "," + fmt(track.mean(static_cast<Eigen::Index>(i), kk));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j)
                out += "," + fmt(track.cov[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out += "," + fmt(track.log_mass[kk]);
        for (const auto& [_, values] : track.extras) out += "," + fmt(values[kk]);
        out += "\n";
    }
    return out;
}

void write_track_csv(const std::filesystem::path& path, const FilterTrack& track) { write_atomic(path, track_csv(track)); }

FilterTrack parse_track_csv(std::string_view text) {
    const Table table = parse_table(text);
    FilterTrack track;
    {
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line) && !line.empty() && line[0] == '#')
            if (line.rfind("# method=", 0) == 0) track.method = line.substr(9);
    }
    if (table.column("t") != 0) throw IoError("csv: first column must be t");
    std::size_t m = 0;
    while (table.column("mean_" + std::to_string(m + 1)) >= 0) ++m;
    const auto lm = table.column("log_mass");
    if (m == 0 || lm < 0) throw IoError("csv: not a filter track");
    const auto nodes = static_cast<Eigen::Index>(table.rows.size());
    track.mean.resize(static_cast<Eigen::Index>(m), nodes);
    track.log_mass.resize(nodes);
    for (auto c = static_cast<std::size_t>(lm) + 1; c < table.header.size(); ++c)
        track.extras.emplace_back(table.header[c], Eigen::VectorXd(nodes));
    for (Eigen::Index k = 0; k < nodes; ++k) {
        const auto& row = table.rows[static_cast<std::size_t>(k)];
        track.t.push_back(row[0]);
        Eigen::MatrixXd cov(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        std::size_t c = 1;
        for (std::size_t i = 0; i < m; ++i) track.mean(static_cast<Eigen::Index>(i), k) = row[c++];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) {
                const auto ii = static_cast<Eigen::Index>(i);
                const auto jj = static_cast<Eigen::Index>(j);
                cov(ii, jj) = cov(jj, ii) = row[c++];
            }
        track.cov.push_back(cov);
        track.log_mass[k] = row[static_cast<std::size_t>(lm)];
        for (std::size_t e = 0; e < track.extras.size(); ++e)
            track.extras[e].second[k] = row[static_cast<std::size_t>(lm) + 1 + e];
    }
    return track;
}

FilterTrack read_track_csv(const std::filesystem::path& path) { return parse_track_csv(read_text(path)); }

std::string path_csv(const PathBundle& b) {
    std::string out(kSchemaLine);
    out += "\nt";
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) out += ",X_" + std::to_string(i + 1);
    for (Eigen::Index j = 0; j < b.y.rows(); ++j) out += ",Y_" + std::to_string(j + 1);
    out += ",log_eta\n";
    for (std::size_t k = 0; k < b.t.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out += fmt(b.t[k]);
        for (Eigen::Index i = 0; i < b.x.rows(); ++i) out += "," + fmt(b.x(i, kk));
        for (Eigen::Index j = 0; j < b.y.rows(); ++j) out += "," + fmt(b.y(j, kk));
        out += "," + fmt(b.log_eta[kk]) + "\n";
    }
    return out;
}

void write_path_csv(const std::filesystem::path& path, const PathBundle& bundle) { write_atomic(path, path_csv(bundle)); }

ObservationFile read_observation_csv(const std::filesystem::path& path) {
    const Table table = parse_table(read_text(path));
    std::vector<std::size_t> cols;
    while (true) {
        const auto c = table.column("Y_" + std::to_string(cols.size() + 1));
        if (c < 0) break;
        cols.push_back(static_cast<std::size_t>(c));
    }
    if (cols.empty() || table.column("t") < 0) throw IoError("csv: no t / Y_1.. columns in " + path.string());
    const auto tc = static_cast<std::size_t>(table.column("t"));
    ObservationFile out;
    out.y.resize(static_cast<Eigen::Index>(cols.size()), static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        out.t.push_back(table.rows[k][tc]);
        for (std::size_t j = 0; j < cols.size(); ++j)
            out.y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = table.rows[k][cols[j]];
    }
    return out;
}

void write_density_snapshot(const std::filesystem::path& path, const DensityField& p) {
    std::string out(kMagic, 4);
    put(out, kSnapshotVersion);
    put(out, static_cast<std::uint32_t>(p.grid.dims()));
    for (std::size_t a = 0; a < p.grid.dims(); ++a) {
        put(out, p.grid.lower(a));
        put(out, p.grid.upper(a));
        put(out, static_cast<std::uint64_t>(p.grid.count(a)));
    }
    put(out, p.time);
    put(out, p.log_scale);
    out.append(reinterpret_cast<const char*>(p.values.data()), static_cast<std::size_t>(p.values.size()) * sizeof(double));
    write_atomic(path, out);
}

DensityField read_density_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kMagic, 4)) throw IoError("snapshot: bad magic");
    if (take<std::uint32_t>(in) != kSnapshotVersion) throw IoError("snapshot: unsupported version");
    const auto dims = take<std::uint32_t>(in);
    if (dims != 1 && dims != 2) throw IoError("snapshot: bad dimension");
    std::vector<double> lower, upper;
    std::vector<std::size_t> counts;
    for (std::uint32_t a = 0; a < dims; ++a) {
        lower.push_back(take<double>(in));
        upper.push_back(take<double>(in));
        counts.push_back(static_cast<std::size_t>(take<std::uint64_t>(in)));
    }
    DensityField p{SpatialGrid(lower, upper, counts), {}, 0.0, 0.0};
    p.time = take<double>(in);
    p.log_scale = take<double>(in);
    p.values.resize(static_cast<Eigen::Index>(p.grid.size()));
    if (!in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(p.grid.size() * sizeof(double))))
        throw IoError("snapshot: truncated payload");
    return p;
}

json to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
    return out;
}

}  // namespace bvfilter
