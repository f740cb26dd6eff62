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

// CSV tables, trace serialization and a minimal SVG writer.

#pragma once

#include <string>
#include <vector>

#include "sgpmpc/mpc_runtime.hpp"
#include "sgpmpc/uncertainty_baselines.hpp"

namespace sgpmpc {

/// Shortest representation that round-trips a double (17 significant digits).
std::string format_number(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
    void add_row(std::vector<std::string> row);
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Columns: k, x0.., u0.., max_violation, predicted_violation, max_rows,
/// acceptance_rate, clamped, prepare_ms, feedback_ms, total_ms.
CsvTable trace_to_csv(const ClosedLoopTrace& trace);

/// Inverse of trace_to_csv for the per-step scalar fields (predictions are not
/// part of the table).
ClosedLoopTrace trace_from_csv(const CsvTable& table);

/// Drops columns whose name ends in "_ms".
CsvTable without_timing(const CsvTable& table);

class SvgPlot {
public:
    SvgPlot(double x_min, double x_max, double y_min, double y_max, int width = 900, int height = 600);

    void polygon(const Polygon& points, const std::string& fill, const std::string& stroke,
                 double opacity = 0.3);
    void polyline(const std::vector<Point2>& points, const std::string& stroke, double width = 1.0,
                  bool dashed = false, double opacity = 1.0);
    void circle(const Point2& center, double radius_px, const std::string& fill);
    void text(const Point2& at, const std::string& content, int size = 14);
    void axes(const std::string& x_label, const std::string& y_label);

    std::string str() const;

private:
    Point2 map(const Point2& p) const;

    double x_min_, x_max_, y_min_, y_max_;
    int width_, height_;
    std::string body_;
};

}  // namespace sgpmpc
