#pragma once

// Minimal SVG output for shape rows, overlays, scatter plots and line plots.

#include "elastic/contour.hpp"
#include "elastic/core.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace elastic::svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

class Document {
public:
    Document(double width, double height) : width_(width), height_(height) {}

    void polygon(const Field& pts, const std::string& color, double stroke = 1.5) {
        body_ += "<polygon fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke) + "\" points=\"";
        for (Eigen::Index i = 0; i < pts.rows(); ++i) body_ += (i ? " " : "") + num(pts(i, 0)) + "," + num(pts(i, 1));
        body_ += "\"/>\n";
    }

    void polyline(const Field& pts, const std::string& color, double stroke = 1.5) {
        body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke) + "\" points=\"";
        for (Eigen::Index i = 0; i < pts.rows(); ++i) body_ += (i ? " " : "") + num(pts(i, 0)) + "," + num(pts(i, 1));
        body_ += "\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color, double stroke = 1.0) {
        body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                 "\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke) + "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& color) {
        body_ += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"" + num(r) + "\" fill=\"" + color + "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 12.0, const std::string& anchor = "middle") {
        body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" + num(size) +
                 "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
    }

    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" + num(height_) +
               "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
               body_ + "</svg>\n";
    }

private:
    double width_;
    double height_;
    std::string body_;
};

/// Unit-length curve of an SRVF, centred at its centroid.
inline Field curve_of(const Srvf& q) {
    Field p = from_srvf(q).contour.points;
    const Eigen::RowVector2d c = p.colwise().mean();
    return p.rowwise() - c;
}

/// Maps curves (already sharing a frame) into a cell of the given size, with y up.
inline Field fit_cell(const Field& p, double radius, double cx, double cy, double cell) {
    Field out(p.rows(), 2);
    const double s = radius > 0.0 ? 0.42 * cell / radius : 1.0;
    out.col(0) = (p.col(0).array() * s + cx).matrix();
    out.col(1) = (-p.col(1).array() * s + cy).matrix();
    return out;
}

inline double max_radius(const std::vector<Field>& curves) {
    double r = 0.0;
    for (const auto& c : curves) r = std::max(r, c.rowwise().norm().maxCoeff());
    return r;
}

/// One row per entry of `rows`, each a sequence of curves drawn left to right.
inline std::string shape_rows(const std::vector<std::vector<Srvf>>& rows, const std::vector<std::string>& captions,
                              double cell = 120.0) {
    std::size_t cols = 0;
    std::vector<std::vector<Field>> curves;
    for (const auto& r : rows) {
        cols = std::max(cols, r.size());
        std::vector<Field> cs;
        for (const auto& q : r) cs.push_back(curve_of(q));
        curves.push_back(std::move(cs));
    }
    Document doc(cell * static_cast<double>(std::max<std::size_t>(cols, 1)), (cell + 24.0) * static_cast<double>(rows.size()));
    for (std::size_t r = 0; r < curves.size(); ++r) {
        const double radius = max_radius(curves[r]);
        const double top = static_cast<double>(r) * (cell + 24.0);
        for (std::size_t c = 0; c < curves[r].size(); ++c)
            doc.polygon(fit_cell(curves[r][c], radius, (static_cast<double>(c) + 0.5) * cell, top + 0.5 * cell, cell),
                        c == 0 || c + 1 == curves[r].size() ? "#c0392b" : "#2c3e50");
        if (r < captions.size()) doc.text(0.5 * cell * static_cast<double>(cols), top + cell + 16.0, captions[r]);
    }
    return doc.str();
}

/// Overlays of pairs (first in blue, second in red), one panel per pair.
inline std::string overlays(const std::vector<std::pair<Srvf, Srvf>>& pairs, const std::vector<std::string>& captions,
                            double cell = 160.0) {
    Document doc(cell * static_cast<double>(std::max<std::size_t>(pairs.size(), 1)), cell + 24.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Field a = curve_of(pairs[i].first);
        const Field b = curve_of(pairs[i].second);
        const double radius = max_radius({a, b});
        const double cx = (static_cast<double>(i) + 0.5) * cell;
        doc.polygon(fit_cell(a, radius, cx, 0.5 * cell, cell), "#1f5fbf");
        doc.polygon(fit_cell(b, radius, cx, 0.5 * cell, cell), "#d62728");
        if (i < captions.size()) doc.text(cx, cell + 16.0, captions[i], 11.0);
    }
    return doc.str();
}

inline const char* palette(int i) {
    static const char* colors[] = {"#1f5fbf", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    return colors[static_cast<std::size_t>(i) % 7];
}

/// 2-D scatter of the first two coordinate columns, coloured by label (1-based).
inline std::string scatter(const Eigen::MatrixXd& xy, const std::vector<int>& labels, const std::vector<std::string>& ids,
                           double size = 480.0) {
    Document doc(size, size);
    const Eigen::Index n = xy.rows();
    const auto col = [&](Eigen::Index c) { return xy.cols() > c ? Eigen::VectorXd(xy.col(c)) : Eigen::VectorXd::Zero(n); };
    const Eigen::VectorXd x = col(0);
    const Eigen::VectorXd y = col(1);
    const double span = std::max({x.maxCoeff() - x.minCoeff(), y.maxCoeff() - y.minCoeff(), 1e-12});
    const double cx = 0.5 * (x.maxCoeff() + x.minCoeff());
    const double cy = 0.5 * (y.maxCoeff() + y.minCoeff());
    const double s = 0.8 * size / span;
    doc.line(0.05 * size, 0.5 * size, 0.95 * size, 0.5 * size, "#bbbbbb");
    doc.line(0.5 * size, 0.05 * size, 0.5 * size, 0.95 * size, "#bbbbbb");
    for (Eigen::Index i = 0; i < n; ++i) {
        const double px = 0.5 * size + (x[i] - cx) * s;
        const double py = 0.5 * size - (y[i] - cy) * s;
        const int lab = i < static_cast<Eigen::Index>(labels.size()) ? labels[static_cast<std::size_t>(i)] : 1;
        doc.circle(px, py, 4.0, palette(lab - 1));
        if (i < static_cast<Eigen::Index>(ids.size())) doc.text(px + 6.0, py - 4.0, ids[static_cast<std::size_t>(i)], 9.0, "start");
    }
    return doc.str();
}

/// Line plot of values in [0, 1] at evenly spaced categories, with horizontal rule lines.
inline std::string line_plot(const std::vector<double>& values, const std::vector<std::string>& names,
                             const std::vector<double>& rules, double width = 560.0, double height = 320.0) {
    Document doc(width, height);
    const double left = 50.0, right = width - 20.0, top = 20.0, bottom = height - 80.0;
    const auto ypos = [&](double v) { return bottom - v * (bottom - top); };
    doc.line(left, bottom, right, bottom, "#000000");
    doc.line(left, top, left, bottom, "#000000");
    for (double v : {0.0, 0.5, 1.0}) doc.text(left - 6.0, ypos(v) + 4.0, num(v).substr(0, 3), 10.0, "end");
    for (double r : rules) doc.line(left, ypos(r), right, ypos(r), "#d62728", 1.0);
    Field pts(static_cast<Eigen::Index>(values.size()), 2);
    const double dx = values.size() > 1 ? (right - left - 20.0) / static_cast<double>(values.size() - 1) : 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double px = left + 10.0 + dx * static_cast<double>(i);
        pts.row(static_cast<Eigen::Index>(i)) << px, ypos(values[i]);
        doc.circle(px, ypos(values[i]), 3.0, "#1f5fbf");
        if (i < names.size()) doc.text(px, bottom + 16.0 + 12.0 * static_cast<double>(i % 3), names[i], 9.0);
    }
    if (values.size() > 1) doc.polyline(pts, "#1f5fbf");
    return doc.str();
}

} // namespace elastic::svg
