#include "stifflab/cli_io.hpp"

#include "stifflab/errors.hpp"
#include "stifflab/evolve.hpp"
#include "stifflab/parallel.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace stifflab {

// ---------------------------------------------------------------- json helpers

namespace {

std::string join_key(const std::string& key, const std::string& name)
{
    return key.empty() ? name : key + "." + name;
}

const Json* find(const Json& j, const std::string& name)
{
    if (!j.is_object())
        return nullptr;
    auto it = j.find(name);
    return it == j.end() ? nullptr : &*it;
}

double number(const Json& j, const std::string& name, const std::string& key, std::optional<double> fallback = std::nullopt)
{
    const Json* v = find(j, name);
    if (!v) {
        if (fallback)
            return *fallback;
        throw ValidationError(join_key(key, name), "missing required number");
    }
    if (v->is_string() && (v->get<std::string>() == "inf" || v->get<std::string>() == "infinity"))
        return std::numeric_limits<double>::infinity();
    if (!v->is_number())
        throw ValidationError(join_key(key, name), "expected a number");
    return v->get<double>();
}

double positive(const Json& j, const std::string& name, const std::string& key, std::optional<double> fallback = std::nullopt)
{
    double v = number(j, name, key, fallback);
    if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError(join_key(key, name), fmt::format("must be positive and finite, got {}", v));
    return v;
}

long long integer(const Json& j, const std::string& name, const std::string& key, std::optional<long long> fallback = std::nullopt)
{
    const Json* v = find(j, name);
    if (!v) {
        if (fallback)
            return *fallback;
        throw ValidationError(join_key(key, name), "missing required integer");
    }
    if (v->is_number_integer())
        return v->get<long long>();
    if (v->is_number_float()) {
        double d = v->get<double>();
        if (d == std::floor(d) && std::abs(d) < 9e15)
            return static_cast<long long>(d);
    }
    throw ValidationError(join_key(key, name), "expected an integer");
}

std::string text(const Json& j, const std::string& name, const std::string& key, std::optional<std::string> fallback = std::nullopt)
{
    const Json* v = find(j, name);
    if (!v) {
        if (fallback)
            return *fallback;
        throw ValidationError(join_key(key, name), "missing required string");
    }
    if (!v->is_string())
        throw ValidationError(join_key(key, name), "expected a string");
    return v->get<std::string>();
}

std::vector<double> numbers(const Json& j, const std::string& name, const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt)
{
    const Json* v = find(j, name);
    if (!v) {
        if (fallback)
            return *fallback;
        throw ValidationError(join_key(key, name), "missing required list of numbers");
    }
    if (!v->is_array())
        throw ValidationError(join_key(key, name), "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
        if (!e.is_number())
            throw ValidationError(join_key(key, name), "expected a list of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

const Json& table(const Json& j, const std::string& name, const std::string& key)
{
    const Json* v = find(j, name);
    if (!v)
        throw ValidationError(join_key(key, name), "missing required table");
    if (!v->is_object())
        throw ValidationError(join_key(key, name), "expected a table");
    return *v;
}

void strictly_increasing(const std::vector<double>& v, const std::string& key)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1]))
            throw ValidationError(key, fmt::format("values must be strictly increasing (row {})", i));
}

fs::path resolve(const fs::path& p, const fs::path& base)
{
    return p.is_absolute() || base.empty() ? p : base / p;
}

} // namespace

Json load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError(path.string(), "cannot open config file");
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string(), std::string("malformed config: ") + e.what());
    }
}

MeasureSpec load_tabulated_csv(const fs::path& path, const std::string& key)
{
    CsvTable t;
    try {
        t = read_csv(path);
    } catch (const Error&) {
        throw ValidationError(key, "cannot read tabulated measure file " + path.string());
    }
    MeasureSpec s;
    s.kind = MeasureSpec::Kind::Tabulated;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() < 2)
            throw ValidationError(key, fmt::format("row {} of {} needs two columns", r + 1, path.string()));
        try {
            s.x.push_back(std::stod(t.rows[r][0]));
            s.y.push_back(std::stod(t.rows[r][1]));
        } catch (const std::exception&) {
            throw ValidationError(key, fmt::format("row {} of {} is not numeric", r + 1, path.string()));
        }
    }
    if (s.x.size() < 2)
        throw ValidationError(key, "tabulated measure needs at least two rows");
    strictly_increasing(s.x, key + ".x");
    strictly_increasing(s.y, key + ".cdf");
    return s;
}

Conductivity parse_conductivity(const Json& j, const std::string& key)
{
    std::string kind = j.is_string() ? j.get<std::string>() : text(j, "kind", key);
    if (kind == "const_one")
        return Conductivity::const_one();
    if (kind == "power_cusp") {
        double beta = number(j, "beta", key, 0.5);
        if (!(beta > 0.0 && beta < 1.0))
            throw ValidationError(join_key(key, "beta"), fmt::format("must lie in (0, 1), got {}", beta));
        return Conductivity::power_cusp(beta);
    }
    if (kind == "constant")
        return Conductivity::constant(positive(j, "value", key));
    if (kind == "table") {
        auto nodes = numbers(j, "nodes", key);
        auto values = numbers(j, "values", key);
        if (nodes.empty() || nodes.size() != values.size())
            throw ValidationError(join_key(key, "values"), "needs one value per node");
        strictly_increasing(nodes, join_key(key, "nodes"));
        for (double v : values)
            if (!(v > 0.0))
                throw ValidationError(join_key(key, "values"), "conductivity values must be positive");
        return Conductivity::custom_table(nodes, values);
    }
    throw ValidationError(join_key(key, "kind"), "unknown conductivity kind '" + kind + "'");
}

MeasureSpec parse_measure(const Json& j, const std::string& key, const fs::path& base_dir)
{
    std::string kind = j.is_string() ? j.get<std::string>() : text(j, "kind", key);
    if (kind == "lebesgue")
        return MeasureSpec::lebesgue();
    if (kind == "conductivity")
        return MeasureSpec::from_conductivity(parse_conductivity(j.at("conductivity"), join_key(key, "conductivity")));
    if (kind == "cantor") {
        long long level = integer(j, "level", key, 20);
        if (level < 1 || level > 60)
            throw ValidationError(join_key(key, "level"), "must lie in 1..60");
        double wl = number(j, "lebesgue_weight", key, 1.0), wc = number(j, "cantor_weight", key, 1.0);
        if (!(wl >= 0.0) || !(wc >= 0.0))
            throw ValidationError(key, "weights must be nonnegative");
        return MeasureSpec::cantor(static_cast<int>(level), wl, wc);
    }
    if (kind == "tabulated") {
        if (const Json* csv = find(j, "csv")) {
            if (!csv->is_string())
                throw ValidationError(join_key(key, "csv"), "expected a file path");
            return load_tabulated_csv(resolve(csv->get<std::string>(), base_dir), join_key(key, "csv"));
        }
        MeasureSpec s;
        s.kind = MeasureSpec::Kind::Tabulated;
        s.x = numbers(j, "x", key);
        s.y = numbers(j, "cdf", key);
        if (s.x.size() < 2 || s.x.size() != s.y.size())
            throw ValidationError(join_key(key, "cdf"), "needs at least two rows and one cdf value per x");
        strictly_increasing(s.x, join_key(key, "x"));
        strictly_increasing(s.y, join_key(key, "cdf"));
        return s;
    }
    if (kind == "density") {
        MeasureSpec s;
        s.kind = MeasureSpec::Kind::Density;
        s.x = numbers(j, "breaks", key);
        s.y = numbers(j, "densities", key);
        if (s.x.size() < 2 || s.y.size() + 1 != s.x.size())
            throw ValidationError(join_key(key, "densities"), "needs one density per piece between breaks");
        strictly_increasing(s.x, join_key(key, "breaks"));
        for (double d : s.y)
            if (!(d >= 0.0))
                throw ValidationError(join_key(key, "densities"), "densities must be nonnegative");
        return s;
    }
    throw ValidationError(join_key(key, "kind"), "unknown measure kind '" + kind + "'");
}

BarrierFamily parse_barrier_family(const Json& j, const std::string& key)
{
    std::string family = text(j, "family", key, "lejay");
    if (family == "lejay")
        return BarrierFamily::lejay(positive(j, "kappa", key, 1.0), number(j, "alpha_exponent", key, -1.0));
    if (family == "profile") {
        BarrierFamily f;
        f.kind = BarrierFamily::Kind::Profile;
        f.profile_nodes = numbers(j, "nodes", key);
        f.profile_values = numbers(j, "values", key);
        f.exponent = number(j, "exponent", key, -1.0);
        if (f.profile_nodes.empty() || f.profile_nodes.size() != f.profile_values.size())
            throw ValidationError(join_key(key, "values"), "needs one value per node");
        strictly_increasing(f.profile_nodes, join_key(key, "nodes"));
        for (double v : f.profile_values)
            if (!(v > 0.0))
                throw ValidationError(join_key(key, "values"), "profile conductivities must be positive");
        return f;
    }
    throw ValidationError(join_key(key, "family"), "unknown barrier family '" + family + "'");
}

Scenario parse_scenario(const Json& j, const fs::path& base_dir, const std::string& key)
{
    if (!j.is_object())
        throw ValidationError(key, "expected a table");
    Scenario s;
    s.box_half_width = positive(j, "box_half_width", key, 5.0);
    if (const Json* v = find(j, "speed"))
        s.speed = parse_measure(*v, join_key(key, "speed"), base_dir);
    if (const Json* v = find(j, "resistance"))
        s.resistance = parse_measure(*v, join_key(key, "resistance"), base_dir);
    else if (const Json* c = find(j, "conductivity"))
        s.resistance = MeasureSpec::from_conductivity(parse_conductivity(*c, join_key(key, "conductivity")));
    if (const Json* g = find(j, "grid")) {
        std::string gk = join_key(key, "grid");
        s.grid.h = positive(*g, "h", gk, 0.01);
        long long nodes = integer(*g, "nodes", gk, 0);
        if (nodes < 0)
            throw ValidationError(join_key(gk, "nodes"), "must be nonnegative");
        s.grid.nodes = static_cast<std::size_t>(nodes);
        long long cells = integer(*g, "barrier_cells", gk, 16);
        if (cells < 1)
            throw ValidationError(join_key(gk, "barrier_cells"), "must be positive");
        s.grid.barrier_cells = static_cast<std::size_t>(cells);
        if (s.grid.nodes == 0 && s.grid.h > s.box_half_width)
            throw ValidationError(join_key(gk, "h"), fmt::format("spacing {} exceeds the box L={}", s.grid.h, s.box_half_width));
    }
    s.seed = static_cast<std::uint64_t>(integer(j, "seed", key, 1));

    const std::string pk = join_key(key, "phase");
    const Json* p = find(j, "phase");
    std::string kind = !p ? "continuous" : (p->is_string() ? p->get<std::string>() : text(*p, "kind", pk));
    if (kind == "continuous") {
        s.phase = phase::Continuous{};
    } else if (kind == "separate") {
        s.phase = phase::Separate{};
    } else if (kind == "snapping") {
        bool has_kappa = find(*p, "kappa") != nullptr, has_gamma = find(*p, "gamma_bar") != nullptr;
        if (has_kappa == has_gamma)
            throw ValidationError(pk, "give exactly one of kappa and gamma_bar");
        s.phase = phase::Snapping{has_kappa ? positive(*p, "kappa", pk) : 2.0 / positive(*p, "gamma_bar", pk)};
    } else if (kind == "skew") {
        double a = number(*p, "alpha_skew", pk);
        if (!(a > 0.0 && a < 1.0))
            throw ValidationError(join_key(pk, "alpha_skew"), fmt::format("must lie in (0, 1), got {}", a));
        s.phase = phase::SkewSnapping{positive(*p, "kappa", pk), a};
    } else if (kind == "eps_barrier") {
        double eps = positive(*p, "epsilon", pk);
        if (eps >= s.box_half_width)
            throw ValidationError(join_key(pk, "epsilon"),
                                  fmt::format("barrier half-width {} does not fit inside the box L={}", eps, s.box_half_width));
        BarrierFamily fam = parse_barrier_family(find(*p, "barrier") ? table(*p, "barrier", pk) : Json::object(),
                                                 join_key(pk, "barrier"));
        s.phase = phase::EpsBarrier{fam.make(eps)};
    } else {
        throw ValidationError(join_key(pk, "kind"), "unknown phase '" + kind + "'");
    }
    return s;
}

Probe parse_probe(const Json& j, const std::string& key)
{
    if (!j.is_string())
        throw ValidationError(key, "expected a probe name");
    try {
        return probes::by_name(j.get<std::string>());
    } catch (const ArgumentError& e) {
        throw ValidationError(key, e.what());
    }
}

SweepSpec parse_sweep(const Json& config, const fs::path& base_dir)
{
    SweepSpec spec;
    spec.base = parse_scenario(table(config, "scenario", ""), base_dir);
    const Json& sw = table(config, "sweep", "");
    spec.barrier = parse_barrier_family(table(sw, "barrier", "sweep"), "sweep.barrier");
    spec.eps0 = positive(sw, "eps0", "sweep", 0.2);
    spec.n_min = static_cast<int>(integer(sw, "n_min", "sweep", 0));
    spec.n_max = static_cast<int>(integer(sw, "n_max", "sweep", 6));
    if (spec.n_min < 0 || spec.n_max < spec.n_min)
        throw ValidationError("sweep.n_max", "need 0 <= n_min <= n_max");
    if (spec.eps0 >= spec.base.box_half_width)
        throw ValidationError("sweep.eps0", fmt::format("barrier half-width {} does not fit inside the box L={}", spec.eps0, spec.base.box_half_width));
    if (find(sw, "target_gamma_bar")) {
        double t = number(sw, "target_gamma_bar", "sweep");
        if (!(t >= 0.0))
            throw ValidationError("sweep.target_gamma_bar", "must be nonnegative or \"inf\"");
        spec.target_gamma_bar = t;
    }
    if (const Json* pr = find(sw, "probes")) {
        if (!pr->is_array())
            throw ValidationError("sweep.probes", "expected a list of probe names");
        for (std::size_t i = 0; i < pr->size(); ++i)
            spec.probes.push_back(parse_probe((*pr)[i], fmt::format("sweep.probes[{}]", i)));
    } else {
        spec.probes = {probes::gauss(), probes::indicator(0.5, 1.5), probes::odd_exp()};
    }
    spec.alphas = numbers(sw, "alphas", "sweep", std::vector<double>{0.5, 1.0, 4.0});
    for (double a : spec.alphas)
        if (!(a > 0.0))
            throw ValidationError("sweep.alphas", "resolvent rates must be positive");
    spec.tolerance = positive(sw, "tolerance", "sweep", 1e-2);
    spec.run_id = text(config, "run_id", "", "sweep");
    return spec;
}

// ---------------------------------------------------------------- persistence

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return fmt::format("{:016x}", h);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

CsvTable read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ArgumentError("cannot open CSV file " + path.string());
    CsvTable t;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r")
            continue;
        if (header) {
            t.header = split_csv_line(line);
            header = false;
        } else {
            t.rows.push_back(split_csv_line(line));
        }
    }
    return t;
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header, bool append)
{
    bool write_header = true;
    if (append && fs::exists(path) && fs::file_size(path) > 0)
        write_header = false;
    file_ = std::fopen(path.string().c_str(), append ? "ab" : "wb");
    if (!file_)
        throw ArgumentError("cannot open " + path.string() + " for writing");
    if (write_header) {
        for (const auto& h : header)
            field(h);
        end_row();
    }
}

CsvWriter::~CsvWriter()
{
    if (file_)
        std::fclose(file_);
}

CsvWriter& CsvWriter::field(double v)
{
    fmt::print(file_, "{}{:.17g}", first_ ? "" : ",", v);
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::field(long long v)
{
    fmt::print(file_, "{}{}", first_ ? "" : ",", v);
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::field(const std::string& s)
{
    std::string out = s;
    if (s.find_first_of(",\"\n") != std::string::npos) {
        out = "\"";
        for (char c : s)
            out += c == '"' ? std::string("\"\"") : std::string(1, c);
        out += "\"";
    }
    fmt::print(file_, "{}{}", first_ ? "" : ",", out);
    first_ = false;
    return *this;
}

void CsvWriter::end_row()
{
    std::fputc('\n', file_);
    first_ = true;
}

Json RunManifest::to_json() const
{
    return Json{{"run_id", run_id},
                {"command", command},
                {"tool_version", tool_version},
                {"config_hash", config_hash},
                {"inputs", inputs},
                {"outputs", outputs},
                {"wall_clock_seconds", wall_clock_seconds},
                {"seeds", seeds}};
}

void RunManifest::write(const fs::path& path) const
{
    std::ofstream out(path);
    if (!out)
        throw ArgumentError("cannot write manifest " + path.string());
    out << to_json().dump(2) << "\n";
}

void write_svg_plot(const fs::path& path,
                    const std::string& title,
                    const std::vector<SvgSeries>& series,
                    bool log_x,
                    bool log_y,
                    const std::string& x_label,
                    const std::string& y_label)
{
    const double W = 720, H = 460, left = 80, right = 190, top = 40, bottom = 60;
    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0.0) && (!log_y || y > 0.0);
    };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (ok(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!(x1 >= x0)) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    if (x1 == x0)
        x1 = x0 + 1;
    if (y1 == y0)
        y1 = y0 + 1;
    auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * (W - left - right); };
    auto py = [&](double v) { return H - bottom - (ty(v) - y0) / (y1 - y0) * (H - top - bottom); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f"};

    auto out = fmt::output_file(path.string());
    out.print("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"12\">\n", W, H);
    out.print("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.print("<text x=\"{}\" y=\"22\" font-size=\"15\">{}</text>\n", left, title);
    out.print("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left, top, W - left - right, H - top - bottom);
    for (int k = 0; k <= 4; ++k) {
        double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
        out.print("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", px(vx), H - bottom + 16, vx);
        out.print("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", left - 6, py(vy) + 4, vy);
    }
    out.print("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (left + W - right) / 2, H - 18, x_label);
    out.print("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n", (top + H - bottom) / 2, (top + H - bottom) / 2, y_label);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % (sizeof(colors) / sizeof(colors[0]))];
        std::string pts;
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            if (ok(series[s].x[i], series[s].y[i]))
                pts += fmt::format("{:.2f},{:.2f} ", px(series[s].x[i]), py(series[s].y[i]));
        out.print("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
        out.print("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", W - right + 10, top + 16 * (s + 1), color, series[s].label);
    }
    out.print("</svg>\n");
}

// ---------------------------------------------------------------- commands

namespace {

struct RunContext
{
    Json config;
    fs::path base_dir;
    std::string hash;
    std::uint64_t seed = 1;
    std::string run_id;
    RunManifest manifest;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    fs::path output(const CliFlags& flags, const std::string& name)
    {
        fs::path p = flags.out_dir / name;
        std::string s = p.string();
        if (std::find(manifest.outputs.begin(), manifest.outputs.end(), s) == manifest.outputs.end())
            manifest.outputs.push_back(s);
        return p;
    }

    void finish(const CliFlags& flags)
    {
        manifest.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        manifest.write(flags.out_dir / "manifest.json");
    }
};

RunContext open_run(const CliFlags& flags, const std::string& command)
{
    RunContext ctx;
    std::ifstream in(flags.config, std::ios::binary);
    if (!in)
        throw ValidationError(flags.config.string(), "cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    ctx.hash = fnv1a_hex(buf.str());
    ctx.config = load_config(flags.config);
    if (!ctx.config.is_object())
        throw ValidationError(flags.config.string(), "config must be a table");
    ctx.base_dir = flags.config.parent_path();
    ctx.seed = flags.seed ? *flags.seed : static_cast<std::uint64_t>(integer(ctx.config, "seed", "", 1));
    ctx.run_id = text(ctx.config, "run_id", "", fmt::format("{}-{}-s{}", command, ctx.hash.substr(0, 12), ctx.seed));
    fs::create_directories(flags.out_dir);
    ctx.manifest.run_id = ctx.run_id;
    ctx.manifest.command = command;
    ctx.manifest.tool_version = STIFFLAB_VERSION;
    ctx.manifest.config_hash = ctx.hash;
    ctx.manifest.inputs.push_back(flags.config.string());
    ctx.manifest.seeds.push_back(ctx.seed);
    return ctx;
}

const char* side_name(Side s)
{
    switch (s) {
    case Side::Minus:
        return "-";
    case Side::Plus:
        return "+";
    default:
        return "0";
    }
}

Side parse_side(const Json& j, const std::string& name, const std::string& key)
{
    std::string s = text(j, name, key, "+");
    if (s == "+" || s == "plus")
        return Side::Plus;
    if (s == "-" || s == "minus")
        return Side::Minus;
    throw ValidationError(join_key(key, name), "side must be '+' or '-'");
}

Scenario scenario_of(RunContext& ctx)
{
    Scenario sc = parse_scenario(table(ctx.config, "scenario", ""), ctx.base_dir);
    sc.seed = ctx.seed;
    return sc;
}

std::size_t node_near(const Grid& g, double x, Side side)
{
    std::size_t best = 0;
    double dist = INFINITY;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.doubled() && x == 0.0 && g.side(i) != side)
            continue;
        double d = std::abs(g[i] - x);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    return best;
}

} // namespace

int cmd_solve(const CliFlags& flags, const std::string& sub, std::ostream& out)
{
    RunContext ctx = open_run(flags, "solve-" + sub);
    Scenario sc = scenario_of(ctx);
    DiscreteForm form = assemble(sc);
    const Grid& g = form.grid();

    if (sub == "resolvent") {
        const Json empty = Json::object();
        const Json& sj = find(ctx.config, "solve") ? table(ctx.config, "solve", "") : empty;
        double alpha = positive(sj, "alpha", "solve", 1.0);
        Probe f = parse_probe(find(sj, "f") ? sj.at("f") : Json("gauss"), "solve.f");
        auto fv = sample_for(form, f.f);
        auto res = resolvent(form, alpha, fv);
        {
            CsvWriter w(ctx.output(flags, "solution.csv"), {"index", "x", "side", "f", "u"});
            for (std::size_t i = 0; i < g.size(); ++i) {
                w.field(i).field(g[i]).field(std::string(side_name(g.side(i)))).field(fv[i]).field(res.solution[i]);
                w.end_row();
            }
        }
        auto kind = form.tag().kind;
        if (kind != PhaseTag::Kind::EpsBarrier) {
            BcResidual bc = bc_residual_of(form, res.solution);
            double fm = g.doubled() ? flux_at(res.solution, form, Side::Minus) : 0.0;
            double fp = g.doubled() ? flux_at(res.solution, form, Side::Plus) : 0.0;
            CsvWriter w(ctx.output(flags, "bc.csv"), {"alpha", "r_minus", "r_plus", "r_jump", "flux_minus", "flux_plus", "residual"});
            w.field(alpha).field(bc.r_minus).field(bc.r_plus).field(bc.r_jump).field(fm).field(fp).field(res.residual);
            w.end_row();
            out << fmt::format("solve resolvent: {} nodes, phase {}, alpha={} residual={:.3g} r_minus={:.6g} r_plus={:.6g} jump={:.6g}\n",
                               g.size(), phase_name(sc.phase), alpha, res.residual, bc.r_minus, bc.r_plus, bc.r_jump);
        } else {
            out << fmt::format("solve resolvent: {} nodes, phase {}, alpha={} residual={:.3g}\n", g.size(), phase_name(sc.phase), alpha, res.residual);
        }
        if (flags.svg) {
            SvgSeries s{"u", g.nodes(), res.solution};
            write_svg_plot(ctx.output(flags, "solution.svg"), "resolvent solution", {s}, false, false, "x", "u");
        }
    } else if (sub == "heat") {
        const Json& hj = table(ctx.config, "heat", "");
        HeatOptions opt;
        opt.dt = positive(hj, "dt", "heat", 1e-3);
        opt.t_end = positive(hj, "t_end", "heat");
        std::string scheme = text(hj, "scheme", "heat", "crank_nicolson");
        if (scheme == "crank_nicolson")
            opt.scheme = Scheme::CrankNicolson;
        else if (scheme == "implicit_euler")
            opt.scheme = Scheme::ImplicitEuler;
        else
            throw ValidationError("heat.scheme", "expected crank_nicolson or implicit_euler");
        opt.snapshot_times = numbers(hj, "snapshots", "heat", std::vector<double>{opt.t_end});
        for (double t : opt.snapshot_times)
            if (!(t >= 0.0 && t <= opt.t_end))
                throw ValidationError("heat.snapshots", fmt::format("time {} outside [0, {}]", t, opt.t_end));
        opt.rannacher_halfsteps = static_cast<int>(integer(hj, "rannacher_halfsteps", "heat", 2));
        Probe u0 = parse_probe(find(hj, "u0") ? hj.at("u0") : Json(), "heat.u0");
        auto u0v = sample_for(form, u0.f);
        HeatRun run = step_heat(form, u0v, opt);
        {
            CsvWriter w(ctx.output(flags, "snapshots.csv"), {"t", "x", "side", "u"});
            for (std::size_t j = 0; j < run.times.size(); ++j)
                for (std::size_t i = 0; i < g.size(); ++i) {
                    w.field(run.times[j]).field(g[i]).field(std::string(side_name(g.side(i)))).field(run.snapshots[j][i]);
                    w.end_row();
                }
        }
        {
            CsvWriter w(ctx.output(flags, "report.csv"), {"t", "l2_norm", "mass_total", "mass_minus", "mass_plus", "weak_residual"});
            for (std::size_t j = 0; j < run.times.size(); ++j) {
                double tot = 0, mm = 0, mp = 0;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double q = form.mass()[i] * run.snapshots[j][i];
                    tot += q;
                    Side s = g.side(i);
                    if (s == Side::Minus)
                        mm += q;
                    else if (s == Side::Plus)
                        mp += q;
                    else {
                        mm += 0.5 * q;
                        mp += 0.5 * q;
                    }
                }
                w.field(run.times[j]).field(norm_m(form, run.snapshots[j])).field(tot).field(mm).field(mp).field(run.weak_residual);
                w.end_row();
            }
        }
        out << fmt::format("solve heat: {} nodes, {} snapshots, dt={} weak residual={:.3g}\n", g.size(), run.times.size(), run.dt, run.weak_residual);
        if (flags.svg) {
            std::vector<SvgSeries> series;
            for (std::size_t j = 0; j < run.times.size(); ++j)
                series.push_back({fmt::format("t={:.4g}", run.times[j]), g.nodes(), run.snapshots[j]});
            write_svg_plot(ctx.output(flags, "snapshots.svg"), "heat snapshots", series, false, false, "x", "u");
        }
    } else {
        throw ValidationError("subcommand", "expected resolvent or heat, got '" + sub + "'");
    }
    ctx.finish(flags);
    return 0;
}

int cmd_sweep(const CliFlags& flags, std::ostream& out)
{
    RunContext ctx = open_run(flags, "sweep");
    SweepSpec spec = parse_sweep(ctx.config, ctx.base_dir);
    spec.run_id = ctx.run_id;
    spec.threads = flags.threads;
    SweepReport report = run_phase_sweep(spec);
    {
        CsvWriter w(ctx.output(flags, "sweep_" + ctx.run_id + ".csv"),
                    {"run_id", "n", "eps", "gamma_bar_n", "hypothesis_qty", "f_id", "alpha", "l2_error", "jump",
                     "flux_res_plus", "flux_res_minus", "grid_h", "box_L"},
                    true);
        for (const auto& r : report.rows) {
            w.field(r.run_id).field(r.n).field(r.eps).field(r.gamma_bar_n).field(r.hypothesis_qty).field(r.f_id)
                .field(r.alpha).field(r.l2_error).field(r.jump).field(r.flux_res_plus).field(r.flux_res_minus)
                .field(r.grid_h).field(r.box_L);
            w.end_row();
        }
    }
    if (flags.svg) {
        std::vector<SvgSeries> series;
        const std::size_t per_n = spec.probes.size() * spec.alphas.size();
        for (std::size_t k = 0; k < per_n; ++k) {
            SvgSeries s;
            s.label = fmt::format("{} a={}", report.rows[k].f_id, report.rows[k].alpha);
            for (std::size_t r = k; r < report.rows.size(); r += per_n) {
                s.x.push_back(report.rows[r].eps);
                s.y.push_back(report.rows[r].l2_error);
            }
            series.push_back(std::move(s));
        }
        write_svg_plot(ctx.output(flags, "sweep_" + ctx.run_id + ".svg"), "resolvent error vs barrier width", series, true, true, "eps_n", "L2(m) error");
    }
    for (const auto& v : report.verdicts)
        out << fmt::format("verdict target={} f={} alpha={} final_error={:.3e} decreasing={} {}\n",
                           report.target_phase, v.f_id, v.alpha, v.final_error, v.decreasing ? "yes" : "no", v.pass ? "PASS" : "FAIL");
    if (report.hypothesis_flagged)
        out << fmt::format("hypothesis flagged: gamma_bar*m* + lambda*m* does not shrink toward 0 over the sweep (decreasing={})\n",
                           report.hypothesis_decreasing ? "yes" : "no");
    out << fmt::format("verdict {} target={} {}\n", ctx.run_id, report.target_phase, report.pass() ? "PASS" : "FAIL");
    ctx.finish(flags);
    return report.pass() ? 0 : 1;
}

int cmd_mc(const CliFlags& flags, std::ostream& out)
{
    RunContext ctx = open_run(flags, "mc");
    Scenario sc = scenario_of(ctx);
    const Json& mj = table(ctx.config, "mc", "");
    std::string engine = text(mj, "engine", "mc", "snob");
    McOptions opt;
    opt.threads = flags.threads;
    double T = positive(mj, "T", "mc", 1.0);
    opt.snapshot_times = numbers(mj, "snapshots", "mc", std::vector<double>{T});
    for (double t : opt.snapshot_times)
        if (!(t >= 0.0 && t <= T))
            throw ValidationError("mc.snapshots", fmt::format("time {} outside [0, {}]", t, T));
    long long n_paths = integer(mj, "n_paths", "mc", 10000);
    if (n_paths < 1)
        throw ValidationError("mc.n_paths", "must be positive");
    const Json empty = Json::object();
    const Json& xj = find(mj, "x0") ? table(mj, "x0", "mc") : empty;
    Side side0 = parse_side(xj, "side", "mc.x0");
    double coord0 = number(xj, "coord", "mc.x0", 0.0);
    if (coord0 < 0.0)
        throw ValidationError("mc.x0.coord", "coordinate on 𝔾 must be nonnegative");

    PathEnsemble ens;
    std::optional<DiscreteForm> pde;
    std::size_t start_node = 0;
    if (engine == "snob") {
        double kappa;
        if (find(mj, "kappa"))
            kappa = positive(mj, "kappa", "mc");
        else if (auto s = std::get_if<phase::Snapping>(&sc.phase))
            kappa = s->kappa;
        else
            throw ValidationError("mc.kappa", "needed unless the scenario phase is snapping");
        double h = positive(mj, "h", "mc", 1e-3);
        ens = run_snob(GPoint{side0, coord0, false}, kappa, h, T, static_cast<std::size_t>(n_paths), ctx.seed, opt);
        if (find(mj, "cross_check")) {
            Scenario ps = sc;
            ps.phase = phase::Snapping{kappa};
            pde.emplace(assemble(ps));
            start_node = node_near(pde->grid(), side0 == Side::Minus ? -coord0 : coord0, side0);
        }
    } else if (engine == "ctmc") {
        DiscreteForm form = assemble(sc);
        start_node = node_near(form.grid(), side0 == Side::Minus ? -coord0 : coord0, side0);
        ens = run_ctmc(form, start_node, T, static_cast<std::size_t>(n_paths), ctx.seed, opt);
        pde.emplace(std::move(form));
    } else {
        throw ValidationError("mc.engine", "expected snob or ctmc");
    }

    {
        CsvWriter w(ctx.output(flags, "events.csv"), {"path_id", "event_time", "event_kind", "side"});
        for (const auto& e : ens.events) {
            const char* kind = e.kind == EventKind::Rebirth ? "rebirth" : (e.kind == EventKind::Crossing ? "crossing" : "killed");
            w.field(e.path).field(e.time).field(std::string(kind)).field(std::string(side_name(e.side)));
            w.end_row();
        }
    }
    {
        CsvWriter w(ctx.output(flags, "snapshots.csv"), {"path_id", "t", "side", "x"});
        for (std::size_t j = 0; j < ens.snapshot_times.size(); ++j)
            for (std::size_t p = 0; p < ens.n_paths; ++p) {
                const GPoint& q = ens.snapshots[j][p];
                w.field(p).field(ens.snapshot_times[j]).field(std::string(q.dead ? "dead" : side_name(q.side))).field(q.x());
                w.end_row();
            }
    }
    std::size_t rebirths = ens.count(EventKind::Rebirth), plus = 0;
    for (const auto& e : ens.events)
        if (e.kind == EventKind::Rebirth && e.side == Side::Plus)
            ++plus;
    out << fmt::format("mc {}: {} paths, {} rebirths ({} to 0+), {} crossings, {} killings\n", engine, ens.n_paths, rebirths,
                       plus, ens.count(EventKind::Crossing), ens.count(EventKind::Killed));

    if (const Json* cc = find(mj, "cross_check")) {
        Probe f = parse_probe(cc->contains("f") ? cc->at("f") : Json("minus_side"), "mc.cross_check.f");
        double t = number(*cc, "t", "mc.cross_check", T);
        auto est = estimate(ens, functional::MeanAt{t, f.f});
        HeatOptions ho;
        ho.t_end = t;
        ho.dt = positive(*cc, "dt", "mc.cross_check", 1e-3);
        double pde_value = step_heat(*pde, sample(pde->grid(), f.f), ho).final[start_node];
        double z = est.std_error > 0.0 ? (est.value - pde_value) / est.std_error : 0.0;
        CsvWriter w(ctx.output(flags, "crosscheck.csv"), {"functional", "t", "mc_mean", "std_err", "pde_value", "z_score"});
        w.field(f.id).field(t).field(est.value).field(est.std_error).field(pde_value).field(z);
        w.end_row();
        out << fmt::format("cross-check {} at t={}: mc={:.6f} +- {:.6f}, pde={:.6f}, z={:.3f}\n", f.id, t, est.value, est.std_error, pde_value, z);
    }
    ctx.finish(flags);
    return 0;
}

int cmd_check(const CliFlags& flags, std::ostream& out)
{
    RunContext ctx = open_run(flags, "check");
    Scenario sc = find(ctx.config, "scenario") ? scenario_of(ctx) : Scenario::brownian(phase::Separate{});
    const Json empty = Json::object();
    const Json& cj = find(ctx.config, "check") ? table(ctx.config, "check", "") : empty;
    auto kappas = numbers(cj, "kappas", "check", std::vector<double>{0.5, 2.0, 8.0});
    auto alphas = numbers(cj, "alphas", "check", std::vector<double>{0.5, 1.0, 4.0});
    long long n_random = integer(cj, "random_pairs", "check", 20);

    struct Row
    {
        std::string name;
        double value, threshold;
        bool pass;
    };
    std::vector<Row> rows;
    Probe gauss = probes::gauss();

    for (double k : kappas)
        for (double a : alphas) {
            auto r = check_resolvent_identity(sc, k, a, gauss.f);
            rows.push_back({fmt::format("resolvent_identity kappa={} alpha={}", k, a), r.max_abs_error, 1e-9, r.max_abs_error < 1e-9});
            rows.push_back({fmt::format("uam_symmetry kappa={} alpha={}", k, a), r.uam_gap, 1e-10, r.uam_gap < 1e-10});
        }

    std::mt19937_64 rng(ctx.seed);
    std::normal_distribution<double> z;
    Scenario ss = sc;
    ss.phase = phase::Snapping{kappas.empty() ? 2.0 : kappas.front()};
    DiscreteForm snap = assemble(ss, base_doubled_grid(sc));
    double worst = 0.0;
    for (long long t = 0; t < n_random; ++t) {
        std::vector<double> f(snap.size()), g(snap.size());
        for (auto& v : f)
            v = z(rng);
        for (auto& v : g)
            v = z(rng);
        double a = alphas.empty() ? 1.0 : alphas[static_cast<std::size_t>(t) % alphas.size()];
        auto rf = resolvent(snap, a, f).solution;
        auto rg = resolvent(snap, a, g).solution;
        double gap = std::abs(inner_m(snap, rf, g) - inner_m(snap, f, rg)) / (norm_m(snap, f) * norm_m(snap, g));
        worst = std::max(worst, gap);
    }
    rows.push_back({"m_symmetry", worst, 1e-10, worst < 1e-10});

    for (double k : {1.0, 100.0}) {
        Scenario a = sc, c = sc;
        a.phase = phase::Snapping{k};
        c.phase = phase::Continuous{};
        DiscreteForm d = darn(assemble(a, base_doubled_grid(sc)));
        DiscreteForm cont = assemble(c, Grid::from_nodes(d.grid().nodes(), OriginMode::Single));
        bool equal = d.triplets() == cont.triplets() && d.mass() == cont.mass() && d.killing() == cont.killing();
        rows.push_back({fmt::format("darning kappa={}", k), equal ? 0.0 : 1.0, 0.0, equal});
    }

    {
        Scenario c = sc;
        c.phase = phase::Continuous{};
        const double kappa = 2.0, gap = 1.0 / kappa;
        double extra[] = {-gap, gap};
        Grid g = Grid::uniform(sc.box_half_width, sc.grid.h, OriginMode::Single, extra);
        DiscreteForm form = assemble(c, g);
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g[i] <= -gap || g[i] >= gap)
                keep.push_back(i);
        DiscreteForm tr = trace_schur(form, keep);
        std::size_t j = 0;
        while (tr.grid()[j + 1] < 0.0)
            ++j;
        double rel = std::abs(tr.conductance()[j] - kappa / 4.0) / (kappa / 4.0);
        rows.push_back({"trace_gap_coupling kappa=2", rel, 1e-6, rel < 1e-6});
    }

    bool all = true;
    {
        CsvWriter w(ctx.output(flags, "check.csv"), {"check", "value", "threshold", "pass"});
        for (const auto& r : rows) {
            w.field(r.name).field(r.value).field(r.threshold).field(std::string(r.pass ? "true" : "false"));
            w.end_row();
            out << fmt::format("{} {} value={:.3e} threshold={:.1e}\n", r.pass ? "PASS" : "FAIL", r.name, r.value, r.threshold);
            all = all && r.pass;
        }
    }
    ctx.finish(flags);
    if (!all)
        throw InvariantViolation("identity / invariant battery reported failures");
    return 0;
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const AssemblyError*>(&e) ||
        dynamic_cast<const InvariantViolation*>(&e))
        return 3;
    return 2;
}

} // namespace stifflab
