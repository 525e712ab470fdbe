#include "lodqn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace lodqn {

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table readCsv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open table " + path.string());
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (first) {
            t.header = cells;
            first = false;
        } else {
            t.rows.push_back(cells);
        }
    }
    return t;
}

int columnIndex(const Table& t, const std::string& name)
{
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end())
        throw std::invalid_argument("table has no column '" + name + "'");
    return static_cast<int>(it - t.header.begin());
}

std::string fmtCoord(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

void emitPlot(const std::filesystem::path& table_path, const PlotSpec& spec,
              const std::filesystem::path& out_path)
{
    const Table table = readCsv(table_path);
    const int xi = columnIndex(table, spec.x);
    const int yi = columnIndex(table, spec.y);
    const int si = columnIndex(table, spec.series);
    int status_col = -1;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c] == "status")
            status_col = static_cast<int>(c);

    // Collect positive, finite points per series value; log-log axes.
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& row : table.rows) {
        if (status_col >= 0 && row[static_cast<std::size_t>(status_col)] != "ok")
            continue;
        const double x = std::strtod(row[xi].c_str(), nullptr);
        const double y = std::strtod(row[yi].c_str(), nullptr);
        if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
            continue;
        series[row[si]].emplace_back(x, y);
    }
    std::size_t n_points = 0;
    for (auto& [key, pts] : series) {
        std::sort(pts.begin(), pts.end());
        n_points += pts.size();
    }
    if (n_points == 0)
        throw std::invalid_argument("emitPlot: no plottable rows in " + table_path.string());

    double lx0 = 1e300, lx1 = -1e300, ly0 = 1e300, ly1 = -1e300;
    for (const auto& [key, pts] : series)
        for (const auto& [x, y] : pts) {
            lx0 = std::min(lx0, std::log10(x));
            lx1 = std::max(lx1, std::log10(x));
            ly0 = std::min(ly0, std::log10(y));
            ly1 = std::max(ly1, std::log10(y));
        }
    if (lx1 - lx0 < 1e-12) {
        lx0 -= 0.5;
        lx1 += 0.5;
    }
    if (ly1 - ly0 < 1e-12) {
        ly0 -= 0.5;
        ly1 += 0.5;
    }

    const double width = 640, height = 480;
    const double ml = 70, mr = 150, mt = 30, mb = 50;
    const auto px = [&](double x) {
        return ml + (std::log10(x) - lx0) / (lx1 - lx0) * (width - ml - mr);
    };
    const auto py = [&](double y) {
        return height - mb - (std::log10(y) - ly0) / (ly1 - ly0) * (height - mt - mb);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (width - ml - mr)
        << "\" height=\"" << (height - mt - mb)
        << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";

    // Decade ticks.
    for (int d = static_cast<int>(std::ceil(lx0)); d <= static_cast<int>(std::floor(lx1)); ++d) {
        const double X = ml + (d - lx0) / (lx1 - lx0) * (width - ml - mr);
        svg << "<line x1=\"" << fmtCoord(X) << "\" y1=\"" << (height - mb) << "\" x2=\""
            << fmtCoord(X) << "\" y2=\"" << (height - mb + 5) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << fmtCoord(X) << "\" y=\"" << (height - mb + 20)
            << "\" font-size=\"12\" text-anchor=\"middle\">1e" << d << "</text>\n";
    }
    for (int d = static_cast<int>(std::ceil(ly0)); d <= static_cast<int>(std::floor(ly1)); ++d) {
        const double Y = height - mb - (d - ly0) / (ly1 - ly0) * (height - mt - mb);
        svg << "<line x1=\"" << (ml - 5) << "\" y1=\"" << fmtCoord(Y) << "\" x2=\"" << ml
            << "\" y2=\"" << fmtCoord(Y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << (ml - 8) << "\" y=\"" << fmtCoord(Y + 4)
            << "\" font-size=\"12\" text-anchor=\"end\">1e" << d << "</text>\n";
    }
    svg << "<text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"" << (height - 12)
        << "\" font-size=\"14\" text-anchor=\"middle\">" << spec.x << "</text>\n";
    svg << "<text x=\"18\" y=\"" << (mt + (height - mt - mb) / 2)
        << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << (mt + (height - mt - mb) / 2) << ")\">" << spec.y << "</text>\n";

    // Order-1 reference slope, anchored below the first series; omitted for
    // single-point tables.
    if (n_points > 1) {
        const auto& pts = series.begin()->second;
        const auto& [ax, ay] = pts.back();
        const double c = 0.5 * ay / ax;
        const double x_lo = std::pow(10.0, lx0), x_hi = std::pow(10.0, lx1);
        svg << "<line x1=\"" << fmtCoord(px(x_lo)) << "\" y1=\"" << fmtCoord(py(c * x_lo))
            << "\" x2=\"" << fmtCoord(px(x_hi)) << "\" y2=\"" << fmtCoord(py(c * x_hi))
            << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
        svg << "<text x=\"" << (width - mr + 10) << "\" y=\"" << fmtCoord(py(c * x_hi) + 4)
            << "\" font-size=\"12\" fill=\"gray\">order 1</text>\n";
    }

    int color_idx = 0;
    int legend_row = 0;
    for (const auto& [key, pts] : series) {
        const char* color = kPalette[color_idx % 6];
        ++color_idx;
        if (pts.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (const auto& [x, y] : pts)
                svg << fmtCoord(px(x)) << "," << fmtCoord(py(y)) << " ";
            svg << "\"/>\n";
        }
        for (const auto& [x, y] : pts)
            svg << "<circle cx=\"" << fmtCoord(px(x)) << "\" cy=\"" << fmtCoord(py(y))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << (width - mr + 10) << "\" y=\"" << (mt + 16 + 18 * legend_row)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << spec.series << "=" << key
            << "</text>\n";
        ++legend_row;
    }
    svg << "</svg>\n";

    const std::string text = svg.str();
    atomicWrite(out_path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

} // namespace lodqn
