#include "minsurro/io/dataset_io.hpp"

#include "minsurro/io/format.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace minsurro {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void write_vec(std::ostream& out, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
}

void write_blank(std::ostream& out, int n) {
    for (int i = 0; i < n; ++i) out << ',';
}

bool parse_double(const std::string& s, double& v) {
    if (s == "nan" || s == "inf" || s == "-inf") {
        v = s == "nan" ? std::nan("") : (s == "inf" ? INFINITY : -INFINITY);
        return true;
    }
    const char* b = s.data();
    const char* e = b + s.size();
    auto r = std::from_chars(b, e, v);
    return r.ec == std::errc() && r.ptr == e;
}

// Columns named prefix0, prefix1, ... starting at `pos`.
int count_group(const std::vector<std::string>& header, std::size_t pos, const std::string& prefix) {
    int n = 0;
    while (pos + static_cast<std::size_t>(n) < header.size() &&
           header[pos + static_cast<std::size_t>(n)] == prefix + std::to_string(n))
        ++n;
    return n;
}

} // namespace

void write_dataset(const Dataset& data, std::ostream& out) {
    require(data.n_x >= 1, "write_dataset: n_x must be >= 1");
    const bool has_g = data.gradient_count() > 0;
    const bool has_lam = data.m > 0 && data.optimal_count() > 0;
    std::string sep;
    for (int i = 0; i < data.n_x; ++i, sep = ",") out << sep << 'x' << i;
    for (int i = 0; i < data.n_p; ++i, sep = ",") out << sep << 'p' << i;
    out << sep << 'f';
    if (has_g)
        for (int i = 0; i < data.n_x; ++i) out << ",g" << i;
    if (has_lam)
        for (int i = 0; i < data.m; ++i) out << ",lam" << i;
    out << ",is_optimal\n";
    for (const auto& s : data.samples) {
        out << format_double(s.x(0));
        for (Eigen::Index i = 1; i < s.x.size(); ++i) out << ',' << format_double(s.x(i));
        write_vec(out, s.p);
        out << ',' << format_double(s.f);
        if (has_g) {
            if (s.grad) write_vec(out, *s.grad);
            else write_blank(out, data.n_x);
        }
        if (has_lam) {
            if (s.dual) write_vec(out, *s.dual);
            else write_blank(out, data.m);
        }
        out << ',' << (s.is_optimal ? 1 : 0) << '\n';
    }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    write_dataset(data, out);
}

Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset: empty file, header expected");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);

    Dataset d;
    std::size_t pos = 0;
    d.n_x = count_group(header, pos, "x");
    pos += static_cast<std::size_t>(d.n_x);
    d.n_p = count_group(header, pos, "p");
    pos += static_cast<std::size_t>(d.n_p);
    if (d.n_x == 0) throw DataError("dataset: header has no 'x0' column");
    if (pos >= header.size() || header[pos] != "f") throw DataError("dataset: header is missing column 'f'");
    ++pos;
    const int n_g = count_group(header, pos, "g");
    if (n_g != 0 && n_g != d.n_x) throw DataError("dataset: gradient group must have n_x columns");
    pos += static_cast<std::size_t>(n_g);
    d.m = count_group(header, pos, "lam");
    pos += static_cast<std::size_t>(d.m);
    if (pos >= header.size() || header[pos] != "is_optimal")
        throw DataError("dataset: header is missing column 'is_optimal'");
    if (pos + 1 != header.size()) throw DataError("dataset: unexpected column '" + header[pos + 1] + "'");

    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        const std::string where = "dataset row " + std::to_string(row);
        if (cells.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(cells.size()));
        std::size_t c = 0;
        auto mandatory = [&](Vec& v, int n) {
            v.resize(n);
            for (int i = 0; i < n; ++i, ++c) {
                double x;
                if (!parse_double(cells[c], x) || !std::isfinite(x))
                    throw DataError(where + ": bad value in column '" + header[c] + "'");
                v(i) = x;
            }
        };
        auto optional_group = [&](int n) -> std::optional<Vec> {
            if (n == 0) return std::nullopt;
            bool blank = true;
            for (int i = 0; i < n; ++i) blank = blank && cells[c + static_cast<std::size_t>(i)].empty();
            if (blank) {
                c += static_cast<std::size_t>(n);
                return std::nullopt;
            }
            Vec v;
            mandatory(v, n);
            return v;
        };
        Sample s;
        mandatory(s.x, d.n_x);
        mandatory(s.p, d.n_p);
        Vec f;
        mandatory(f, 1);
        s.f = f(0);
        s.grad = optional_group(n_g);
        s.dual = optional_group(d.m);
        const auto& flag = cells[c];
        if (flag != "0" && flag != "1") throw DataError(where + ": is_optimal must be 0 or 1");
        s.is_optimal = flag == "1";
        d.samples.push_back(std::move(s));
    }
    d.validate();
    return d;
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset file not found: " + path.string());
    return read_dataset(in);
}

void write_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history " + path.string());
    out << "epoch,loss_total,loss_fit,reg1,reg2\n";
    for (const auto& h : history)
        out << h.epoch << ',' << format_double(h.loss.total) << ',' << format_double(h.loss.fit) << ','
            << format_double(h.loss.reg1) << ',' << format_double(h.loss.reg2) << '\n';
}

} // namespace minsurro
