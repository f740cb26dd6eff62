/*
 Copyright 2026 The sgpmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "sgpmpc/experiment_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace sgpmpc {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

Index CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<Index>(i);
    throw InvalidArgument("CSV has no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    const std::string& cell = rows.at(row).at(static_cast<std::size_t>(column(name)));
    if (cell == "nan") return std::nan("");
    if (cell == "inf") return std::numeric_limits<double>::infinity();
    if (cell == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(cell);
}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw InvalidArgument("CSV row width does not match header");
    rows.push_back(std::move(row));
}

std::string to_csv(const CsvTable& table) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    return out.str();
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string raw;
    bool first = true;
    while (std::getline(in, raw)) {
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(raw);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!raw.empty() && raw.back() == ',') cells.emplace_back();
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.add_row(std::move(cells));
        }
    }
    return table;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

CsvTable trace_to_csv(const ClosedLoopTrace& trace) {
    CsvTable table;
    const Index nx = trace.steps.empty() ? 0 : trace.steps.front().x.size();
    const Index nu = trace.steps.empty() ? 0 : trace.steps.front().u.size();
    table.header.push_back("k");
    for (Index i = 0; i < nx; ++i) table.header.push_back("x" + std::to_string(i));
    for (Index i = 0; i < nu; ++i) table.header.push_back("u" + std::to_string(i));
    for (const char* name : {"max_violation", "predicted_violation", "max_rows", "acceptance_rate", "clamped",
                             "prepare_ms", "feedback_ms", "total_ms"})
        table.header.emplace_back(name);
    for (const auto& s : trace.steps) {
        std::vector<std::string> row{std::to_string(s.k)};
        for (Index i = 0; i < nx; ++i) row.push_back(format_number(s.x(i)));
        for (Index i = 0; i < nu; ++i) row.push_back(format_number(s.u(i)));
        row.push_back(format_number(s.max_violation));
        row.push_back(format_number(s.predicted_violation));
        row.push_back(std::to_string(s.max_rows));
        row.push_back(format_number(s.acceptance_rate));
        row.push_back(std::to_string(s.clamped));
        row.push_back(format_number(s.prepare_ms));
        row.push_back(format_number(s.feedback_ms));
        row.push_back(format_number(s.total_ms));
        table.add_row(std::move(row));
    }
    return table;
}

ClosedLoopTrace trace_from_csv(const CsvTable& table) {
    Index nx = 0, nu = 0;
    for (const auto& h : table.header) {
        if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1]))) ++nx;
        if (h.size() > 1 && h[0] == 'u' && std::isdigit(static_cast<unsigned char>(h[1]))) ++nu;
    }
    ClosedLoopTrace trace;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        StepRecord s;
        s.k = static_cast<Index>(table.number(r, "k"));
        s.x.resize(nx);
        s.u.resize(nu);
        for (Index i = 0; i < nx; ++i) s.x(i) = table.number(r, "x" + std::to_string(i));
        for (Index i = 0; i < nu; ++i) s.u(i) = table.number(r, "u" + std::to_string(i));
        s.max_violation = table.number(r, "max_violation");
        s.predicted_violation = table.number(r, "predicted_violation");
        s.max_rows = static_cast<Index>(table.number(r, "max_rows"));
        s.acceptance_rate = table.number(r, "acceptance_rate");
        s.clamped = static_cast<long>(table.number(r, "clamped"));
        s.prepare_ms = table.number(r, "prepare_ms");
        s.feedback_ms = table.number(r, "feedback_ms");
        s.total_ms = table.number(r, "total_ms");
        trace.steps.push_back(std::move(s));
    }
    return trace;
}

CsvTable without_timing(const CsvTable& table) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        const std::string& h = table.header[i];
        if (h.size() < 3 || h.compare(h.size() - 3, 3, "_ms") != 0) keep.push_back(i);
    }
    CsvTable out;
    for (std::size_t i : keep) out.header.push_back(table.header[i]);
    for (const auto& r : table.rows) {
        std::vector<std::string> row;
        for (std::size_t i : keep) row.push_back(r[i]);
        out.rows.push_back(std::move(row));
    }
    return out;
}

SvgPlot::SvgPlot(double x_min, double x_max, double y_min, double y_max, int width, int height)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), width_(width), height_(height) {
    if (!(x_max > x_min) || !(y_max > y_min)) throw InvalidArgument("SVG extent must be non-empty");
}

Point2 SvgPlot::map(const Point2& p) const {
    const double margin = 50.0;
    const double sx = (width_ - 2 * margin) / (x_max_ - x_min_);
    const double sy = (height_ - 2 * margin) / (y_max_ - y_min_);
    return {margin + (p.x() - x_min_) * sx, height_ - margin - (p.y() - y_min_) * sy};
}

namespace {

std::string points_attr(const std::vector<Point2>& pts, const std::function<Point2(const Point2&)>& map) {
    std::ostringstream out;
    out.precision(6);
    for (const auto& p : pts) {
        const Point2 q = map(p);
        out << q.x() << ',' << q.y() << ' ';
    }
    return out.str();
}

}  // namespace

void SvgPlot::polygon(const Polygon& points, const std::string& fill, const std::string& stroke,
                      double opacity) {
    if (points.empty()) return;
    if (points.size() < 3) {
        polyline(points, stroke, 1.0, false, 1.0);
        return;
    }
    std::ostringstream out;
    out << "<polygon points=\"" << points_attr(points, [this](const Point2& p) { return map(p); })
        << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\" stroke=\"" << stroke
        << "\" stroke-width=\"0.8\"/>\n";
    body_ += out.str();
}

void SvgPlot::polyline(const std::vector<Point2>& points, const std::string& stroke, double width,
                       bool dashed, double opacity) {
    if (points.empty()) return;
    std::ostringstream out;
    out << "<polyline points=\"" << points_attr(points, [this](const Point2& p) { return map(p); })
        << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\" stroke-opacity=\""
        << opacity << '"';
    if (dashed) out << " stroke-dasharray=\"6,4\"";
    out << "/>\n";
    body_ += out.str();
}

void SvgPlot::circle(const Point2& center, double radius_px, const std::string& fill) {
    const Point2 c = map(center);
    std::ostringstream out;
    out << "<circle cx=\"" << c.x() << "\" cy=\"" << c.y() << "\" r=\"" << radius_px << "\" fill=\"" << fill
        << "\"/>\n";
    body_ += out.str();
}

void SvgPlot::text(const Point2& at, const std::string& content, int size) {
    const Point2 p = map(at);
    std::ostringstream out;
    out << "<text x=\"" << p.x() << "\" y=\"" << p.y() << "\" font-size=\"" << size
        << "\" font-family=\"sans-serif\">" << content << "</text>\n";
    body_ += out.str();
}

void SvgPlot::axes(const std::string& x_label, const std::string& y_label) {
    polygon({{x_min_, y_min_}, {x_max_, y_min_}, {x_max_, y_max_}, {x_min_, y_max_}}, "none", "#444", 0.0);
    std::ostringstream out;
    out << "<text x=\"" << width_ / 2 << "\" y=\"" << height_ - 12 << "\" font-size=\"14\" "
        << "font-family=\"sans-serif\">" << x_label << "</text>\n";
    out << "<text x=\"12\" y=\"" << height_ / 2 << "\" font-size=\"14\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 12 " << height_ / 2 << ")\">" << y_label << "</text>\n";
    char range[160];
    std::snprintf(range, sizeof(range), "[%.3g, %.3g] x [%.3g, %.3g]", x_min_, x_max_, y_min_, y_max_);
    out << "<text x=\"50\" y=\"30\" font-size=\"12\" font-family=\"sans-serif\">" << range << "</text>\n";
    body_ += out.str();
}

std::string SvgPlot::str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
        << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_ << "</svg>\n";
    return out.str();
}

}  // namespace sgpmpc
