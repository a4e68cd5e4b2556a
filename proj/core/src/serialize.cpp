#include "fcomb/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

namespace fcomb {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const char* name) {
    if (!j.is_array() || j.empty()) throw ValidationError(std::string(name) + ": expected a non-empty matrix");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& r = j.at(static_cast<std::size_t>(i));
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
            throw ValidationError(std::string(name) + ": ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json dgp_json(const Ar2Dgp& d) {
    return {{"phi1", d.phi1}, {"phi2", d.phi2}, {"sigma2_eps", d.sigma2_eps}};
}

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < pos; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(source, line, col, "malformed JSON");
    }
}

template <class F>
auto with_schema_errors(const std::string& source, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ValidationError(source + ": unexpected JSON content (" + e.what() + ")");
    }
}

DgpSolution solution_from(const json& j) {
    DgpSolution s;
    s.loss = parse_loss(j.at("loss").get<std::string>());
    const json& d = j.at("dgp");
    s.dgp = {d.at("phi1").get<double>(), d.at("phi2").get<double>(), d.at("sigma2_eps").get<double>()};
    s.target_eta_star = j.at("target_eta_star").get<double>();
    s.achieved_eta_star = j.at("achieved_eta_star").get<double>();
    s.gamma_star = j.at("gamma_star").get<std::vector<double>>();
    s.criterion_value = j.at("criterion_value").get<double>();
    s.constraint_residuals = j.at("constraint_residuals").get<std::vector<double>>();
    s.sim_n = j.at("sim_n").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.dgp.validate();
    return s;
}

json solution_json(const DgpSolution& s) {
    return {{"loss", to_string(s.loss)},
            {"dgp", dgp_json(s.dgp)},
            {"target_eta_star", s.target_eta_star},
            {"achieved_eta_star", s.achieved_eta_star},
            {"gamma_star", s.gamma_star},
            {"criterion_value", s.criterion_value},
            {"constraint_residuals", s.constraint_residuals},
            {"sim_n", s.sim_n},
            {"seed", s.seed}};
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

struct CsvRow {
    std::size_t line;
    std::vector<std::string> cells;
    std::vector<std::size_t> columns;  // 1-based start column of each cell
};

std::vector<CsvRow> read_csv(std::istream& in, const std::string& source,
                             const std::vector<std::string>& header) {
    std::string text;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<CsvRow> rows;
    while (std::getline(in, text)) {
        ++line_no;
        if (trim(text).empty()) continue;
        CsvRow row{line_no, {}, {}};
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = text.find(',', start);
            row.columns.push_back(start + 1);
            row.cells.push_back(trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!have_header) {
            if (row.cells != header) {
                std::string want;
                for (std::size_t i = 0; i < header.size(); ++i) want += (i ? "," : "") + header[i];
                throw ParseError(source, line_no, 1, "expected header '" + want + "'");
            }
            have_header = true;
            continue;
        }
        if (row.cells.size() != header.size())
            throw ParseError(source, line_no, 1,
                             "expected " + std::to_string(header.size()) + " cells, found " +
                                 std::to_string(row.cells.size()));
        rows.push_back(std::move(row));
    }
    if (!have_header) throw ParseError(source, 1, 1, "empty file (missing header)");
    return rows;
}

double parse_cell(const CsvRow& row, std::size_t i, const std::string& source) {
    const std::string& s = row.cells[i];
    if (s.empty()) throw ParseError(source, row.line, row.columns[i], "missing value");
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e)
        throw ParseError(source, row.line, row.columns[i], "not a number: '" + s + "'");
    if (!std::isfinite(v))
        throw ParseError(source, row.line, row.columns[i], "non-finite value '" + s + "'");
    return v;
}

void check_increasing(const std::vector<CsvRow>& rows, const std::string& source) {
    double prev = -INFINITY;
    for (const CsvRow& r : rows) {
        const double t = parse_cell(r, 0, source);
        if (t == prev) throw ParseError(source, r.line, r.columns[0], "duplicate t");
        if (t < prev) throw ParseError(source, r.line, r.columns[0], "t is not strictly increasing");
        prev = t;
    }
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t l, std::size_t c,
                       const std::string& message)
    : ValidationError(source + ":" + std::to_string(l) + ":" + std::to_string(c) + ": " + message),
      line(l),
      column(c) {}

std::string format_real(double x) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf, static_cast<std::size_t>(n));
}

std::string to_json(const FitResult& fit, int indent) {
    json j = {{"theta",
               {{"eta", fit.theta.eta}, {"weights", fit.theta.weights()}, {"gamma", fit.theta.gamma}}},
              {"in_sample_avg_loss", fit.in_sample_avg_loss},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"multi_start_best_of", fit.multi_start_best_of},
              {"identified_set_note", nullptr}};
    if (fit.identified_set_note) j["identified_set_note"] = *fit.identified_set_note;
    return j.dump(indent);
}

std::string to_json(const TestOutcome& o, int indent) {
    json j = {{"delta_p", o.delta_p},
              {"omega_hat", o.omega_hat},
              {"d_p", o.d_p},
              {"critical_value", o.critical_value},
              {"p_value", nullptr},
              {"reject", o.reject},
              {"cv_method", to_string(o.cv_method)},
              {"alpha", o.alpha},
              {"omega_floored", o.omega_floored}};
    if (o.p_value) j["p_value"] = *o.p_value;
    return j.dump(indent);
}

std::string to_json(const SimulatedCvModel& m, int indent) {
    json j = {{"m_etaeta", matrix_json(m.m_etaeta)},
              {"m_etagamma", matrix_json(m.m_etagamma)},
              {"sigma_x", matrix_json(m.sigma_x)},
              {"sigma_z", matrix_json(m.sigma_z)},
              {"ratio_p_over_r", m.ratio_p_over_r},
              {"draws_h", m.draws_h},
              {"seed", m.seed}};
    return j.dump(indent);
}

SimulatedCvModel cv_model_from_json(const std::string& text, const std::string& source) {
    const json j = parse_json(text, source);
    return with_schema_errors(source, [&] {
        SimulatedCvModel m;
        m.m_etaeta = matrix_from(j.at("m_etaeta"), "m_etaeta");
        m.m_etagamma = matrix_from(j.at("m_etagamma"), "m_etagamma");
        m.sigma_x = matrix_from(j.at("sigma_x"), "sigma_x");
        m.sigma_z = matrix_from(j.at("sigma_z"), "sigma_z");
        m.ratio_p_over_r = j.at("ratio_p_over_r").get<double>();
        m.draws_h = j.at("draws_h").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.validate();
        return m;
    });
}

std::string to_json(const DgpSolution& s, int indent) { return solution_json(s).dump(indent); }

std::string to_json(const std::vector<DgpSolution>& catalog, int indent) {
    json entries = json::array();
    for (const DgpSolution& s : catalog) entries.push_back(solution_json(s));
    return json{{"entries", entries}}.dump(indent);
}

DgpSolution dgp_solution_from_json(const std::string& text, const std::string& source) {
    const json j = parse_json(text, source);
    return with_schema_errors(source, [&] { return solution_from(j); });
}

std::vector<DgpSolution> catalog_from_json(const std::string& text, const std::string& source) {
    const json j = parse_json(text, source);
    return with_schema_errors(source, [&] {
        std::vector<DgpSolution> out;
        for (const json& e : j.at("entries")) out.push_back(solution_from(e));
        return out;
    });
}

const DgpSolution& catalog_lookup(const std::vector<DgpSolution>& catalog, Loss loss, double target) {
    for (const DgpSolution& s : catalog)
        if (s.loss == loss && std::abs(s.target_eta_star - target) < 1e-9) return s;
    throw ValidationError("catalog has no " + std::string(to_string(loss)) + " entry for eta* = " +
                          format_real(target));
}

std::string to_json(const RejectionCurve& curve, const McConfig& c, int indent) {
    json pts = json::array();
    for (const CurvePoint& p : curve.points)
        pts.push_back({{"T", p.total},
                       {"frequency", p.frequency},
                       {"ci_lo", p.ci_lo},
                       {"ci_hi", p.ci_hi},
                       {"reps", p.reps},
                       {"rejections", p.rejections},
                       {"failures", p.failures},
                       {"positive_delta", p.positive_delta}});
    json cfg = {{"dgp", dgp_json(c.dgp)},
                {"loss", to_string(c.loss)},
                {"benchmark", to_string(c.benchmark)},
                {"alternative", to_string(c.alternative)},
                {"cv", to_string(c.method)},
                {"reps", c.reps},
                {"alpha", c.alpha},
                {"seed", c.base_seed},
                {"draws_h", c.draws_h},
                {"reuse_truncated", c.reuse_truncated},
                {"bandwidth_base", c.bandwidth == BandwidthBase::P ? "P" : "T"}};
    return json{{"config", cfg}, {"points", pts}}.dump(indent);
}

std::string to_json(const std::vector<SizePowerRow>& table, const SizePowerConfig& c, int indent) {
    json rows = json::array();
    for (const SizePowerRow& r : table)
        rows.push_back({{"panel", r.panel},
                        {"T", r.total},
                        {"two_step", r.two_step},
                        {"t_test", r.t_test},
                        {"standard", r.standard},
                        {"reps", r.reps},
                        {"failures", r.failures}});
    json cfg = {{"loss", to_string(c.loss)},
                {"null_dgp", dgp_json(c.null_dgp)},
                {"power_dgp", dgp_json(c.power_dgp)},
                {"benchmark_eta", c.benchmark_eta},
                {"reps", c.reps},
                {"alpha", c.alpha},
                {"seed", c.base_seed},
                {"draws_h", c.draws_h}};
    return json{{"config", cfg}, {"rows", rows}}.dump(indent);
}

std::string to_json(const SeriesSample& s, const Ar2Dgp& dgp, int indent) {
    return json{{"dgp", dgp_json(dgp)}, {"seed", s.seed}, {"burn_in", s.burn_in}, {"values", s.values}}
        .dump(indent);
}

void write_series_csv(std::ostream& out, std::span<const double> values) {
    out << "t,y\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << (i + 1) << ',' << format_real(values[i]) << '\n';
}

std::vector<double> read_series_csv(std::istream& in, const std::string& source) {
    const auto rows = read_csv(in, source, {"t", "y"});
    check_increasing(rows, source);
    std::vector<double> y;
    y.reserve(rows.size());
    for (const CsvRow& r : rows) y.push_back(parse_cell(r, 1, source));
    return y;
}

void write_loss_csv(std::ostream& out, const LossSeries& bench, const LossSeries& alt) {
    if (bench.losses.size() != alt.losses.size()) throw ValidationError("loss series lengths differ");
    out << "t,loss_benchmark,loss_alternative\n";
    const std::size_t t0 = bench.split.r + 1;
    for (std::size_t i = 0; i < bench.losses.size(); ++i)
        out << (t0 + i) << ',' << format_real(bench.losses[i]) << ',' << format_real(alt.losses[i]) << '\n';
}

PairedLosses ingest_loss_csv(std::istream& in, std::size_t r, const std::string& source) {
    const auto rows = read_csv(in, source, {"t", "loss_benchmark", "loss_alternative"});
    if (rows.empty()) throw ParseError(source, 2, 1, "no data rows");
    check_increasing(rows, source);
    PairedLosses out;
    for (const CsvRow& row : rows) {
        out.bench.losses.push_back(parse_cell(row, 1, source));
        out.alt.losses.push_back(parse_cell(row, 2, source));
    }
    out.bench.split = {r, rows.size()};
    out.alt.split = out.bench.split;
    return out;
}

PairedLosses ingest_loss_csv(const std::filesystem::path& path, std::size_t r) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return ingest_loss_csv(in, r, path.string());
}

std::vector<double> read_single_loss_csv(std::istream& in, const std::string& source) {
    const auto rows = read_csv(in, source, {"t", "loss"});
    if (rows.empty()) throw ParseError(source, 2, 1, "no data rows");
    check_increasing(rows, source);
    std::vector<double> out;
    for (const CsvRow& row : rows) out.push_back(parse_cell(row, 1, source));
    return out;
}

void write_curve_csv(std::ostream& out, const RejectionCurve& curve) {
    out << "T,frequency,ci_lo,ci_hi,reps\n";
    for (const CurvePoint& p : curve.points)
        out << p.total << ',' << format_real(p.frequency) << ',' << format_real(p.ci_lo) << ','
            << format_real(p.ci_hi) << ',' << p.reps << '\n';
}

void write_size_power_csv(std::ostream& out, const std::vector<SizePowerRow>& table) {
    out << "panel,T,two_step,t_test,standard,reps,failures\n";
    for (const SizePowerRow& r : table)
        out << r.panel << ',' << r.total << ',' << format_real(r.two_step) << ','
            << format_real(r.t_test) << ',' << format_real(r.standard) << ',' << r.reps << ','
            << r.failures << '\n';
}

std::string curve_svg(const RejectionCurve& curve, const std::string& title) {
    const double w = 640, h = 400, left = 60, right = 20, top = 40, bottom = 50;
    double tmin = 0, tmax = 1;
    if (!curve.points.empty()) {
        tmin = static_cast<double>(curve.points.front().total);
        tmax = static_cast<double>(curve.points.back().total);
        if (tmax <= tmin) tmax = tmin + 1;
    }
    auto sx = [&](double t) { return left + (t - tmin) / (tmax - tmin) * (w - left - right); };
    auto sy = [&](double p) { return top + (1.0 - p) * (h - top - bottom); };
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::string escaped;
    for (char ch : title) {
        if (ch == '<') escaped += "&lt;";
        else if (ch == '>') escaped += "&gt;";
        else if (ch == '&') escaped += "&amp;";
        else escaped += ch;
    }
    o << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\">" << escaped << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << w - right << "\" y2=\"" << sy(0)
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << sy(0) << "\" x2=\"" << left << "\" y2=\"" << sy(1)
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double p = k / 4.0;
        o << "<text x=\"" << left - 8 << "\" y=\"" << sy(p) + 4 << "\" text-anchor=\"end\">" << p
          << "</text>\n";
    }
    o << "<text x=\"" << sx(tmin) << "\" y=\"" << h - 20 << "\" text-anchor=\"middle\">" << tmin << "</text>\n";
    o << "<text x=\"" << sx(tmax) << "\" y=\"" << h - 20 << "\" text-anchor=\"middle\">" << tmax << "</text>\n";
    if (!curve.points.empty()) {
        o << "<polygon fill=\"#cfe0f3\" stroke=\"none\" points=\"";
        for (const CurvePoint& p : curve.points) o << sx(static_cast<double>(p.total)) << ',' << sy(p.ci_hi) << ' ';
        for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it)
            o << sx(static_cast<double>(it->total)) << ',' << sy(it->ci_lo) << ' ';
        o << "\"/>\n<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
        for (const CurvePoint& p : curve.points) o << sx(static_cast<double>(p.total)) << ',' << sy(p.frequency) << ' ';
        o << "\"/>\n";
    }
    o << "</svg>\n";
    return o.str();
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

}  // namespace fcomb
