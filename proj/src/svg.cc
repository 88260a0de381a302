/*
 * Copyright 2026 The causal-dp-synth Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cds/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cds::svg {
namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

}  // namespace

std::string Num(double v) {
  char buf[64];
  if (!std::isfinite(v)) v = 0.0;
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Canvas::Canvas(double width, double height) : width_(width), height_(height) {}

void Canvas::Rect(double x, double y, double w, double h, const std::string& fill,
                  double opacity) {
  body_ += "<rect x=\"" + Num(x) + "\" y=\"" + Num(y) + "\" width=\"" + Num(w) + "\" height=\"" +
           Num(h) + "\" fill=\"" + fill + "\" fill-opacity=\"" + Num(opacity) + "\"/>\n";
}

void Canvas::Line(double x1, double y1, double x2, double y2, const std::string& stroke,
                  double width) {
  body_ += "<line x1=\"" + Num(x1) + "\" y1=\"" + Num(y1) + "\" x2=\"" + Num(x2) + "\" y2=\"" +
           Num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + Num(width) + "\"/>\n";
}

void Canvas::Circle(double cx, double cy, double r, const std::string& fill, double opacity) {
  body_ += "<circle cx=\"" + Num(cx) + "\" cy=\"" + Num(cy) + "\" r=\"" + Num(r) + "\" fill=\"" +
           fill + "\" fill-opacity=\"" + Num(opacity) + "\"/>\n";
}

void Canvas::Text(double x, double y, const std::string& text, double size,
                  const std::string& anchor) {
  body_ += "<text x=\"" + Num(x) + "\" y=\"" + Num(y) + "\" font-size=\"" + Num(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + Escape(text) +
           "</text>\n";
}

void Canvas::Polyline(const std::vector<std::pair<double, double>>& points,
                      const std::string& stroke, double width) {
  std::string pts;
  for (const auto& [x, y] : points) pts += Num(x) + "," + Num(y) + " ";
  body_ += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + stroke +
           "\" stroke-width=\"" + Num(width) + "\"/>\n";
}

std::string Canvas::Str() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Num(width_) + "\" height=\"" +
         Num(height_) + "\" viewBox=\"0 0 " + Num(width_) + " " + Num(height_) + "\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

double BarOffset(double value, double max_abs, double half_height) {
  if (!(max_abs > 0)) return 0.0;
  return value / max_abs * half_height;
}

std::string GroupedBarChart(const std::string& title, const std::vector<std::string>& groups,
                            const std::vector<std::string>& series,
                            const std::vector<std::vector<double>>& values) {
  const double group_w = std::max(60.0, 18.0 * static_cast<double>(series.size()) + 20.0);
  const double left = 50, top = 40, plot_h = 240;
  const double width = left + group_w * static_cast<double>(std::max<size_t>(groups.size(), 1)) + 150;
  const double height = top + plot_h + 60;
  Canvas c(width, height);
  c.Text(width / 2, 20, title, 13, "middle");
  double max_abs = 0.0;
  for (const auto& s : values) {
    for (double v : s) max_abs = std::max(max_abs, std::fabs(v));
  }
  if (max_abs == 0) max_abs = 1.0;
  const double zero_y = top + plot_h / 2;
  const double bar_w = (group_w - 20) / static_cast<double>(std::max<size_t>(series.size(), 1));
  for (size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g) + 10;
    for (size_t s = 0; s < series.size(); ++s) {
      const double v = g < values[s].size() ? values[s][g] : 0.0;
      const double off = BarOffset(v, max_abs, plot_h / 2);
      const double y = off >= 0 ? zero_y - off : zero_y;
      c.Rect(gx + bar_w * static_cast<double>(s), y, bar_w * 0.9, std::fabs(off),
             kPalette[s % 6]);
    }
    c.Text(gx + (group_w - 20) / 2, top + plot_h + 18, groups[g], 9, "middle");
  }
  c.Line(left, zero_y, left + group_w * static_cast<double>(groups.size()), zero_y, "#000000");
  c.Line(left, top, left, top + plot_h, "#000000");
  c.Text(left - 4, top + 4, Num(max_abs), 9, "end");
  c.Text(left - 4, zero_y + 4, "0", 9, "end");
  c.Text(left - 4, top + plot_h, Num(-max_abs), 9, "end");
  for (size_t s = 0; s < series.size(); ++s) {
    const double ly = top + 14.0 * static_cast<double>(s);
    const double lx = width - 140;
    c.Rect(lx, ly - 8, 10, 10, kPalette[s % 6]);
    c.Text(lx + 14, ly, series[s], 10);
  }
  return c.Str();
}

std::string LineChart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<LineSeries>& series) {
  const double left = 60, top = 40, plot_w = 400, plot_h = 240;
  Canvas c(left + plot_w + 160, top + plot_h + 60);
  c.Text(left + plot_w / 2, 20, title, 13, "middle");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return top + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };
  c.Line(left, top + plot_h, left + plot_w, top + plot_h, "#000000");
  c.Line(left, top, left, top + plot_h, "#000000");
  c.Text(left + plot_w / 2, top + plot_h + 35, x_label, 10, "middle");
  c.Text(10, top + plot_h / 2, y_label, 10);
  c.Text(left, top + plot_h + 14, Num(xmin), 9, "middle");
  c.Text(left + plot_w, top + plot_h + 14, Num(xmax), 9, "middle");
  c.Text(left - 4, top + plot_h, Num(ymin), 9, "end");
  c.Text(left - 4, top + 4, Num(ymax), 9, "end");
  for (size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [x, y] : series[s].points) {
      pts.emplace_back(px(x), py(y));
      c.Circle(px(x), py(y), 3, kPalette[s % 6]);
    }
    c.Polyline(pts, kPalette[s % 6]);
    c.Rect(left + plot_w + 20, top + 14.0 * static_cast<double>(s) - 8, 10, 10, kPalette[s % 6]);
    c.Text(left + plot_w + 34, top + 14.0 * static_cast<double>(s), series[s].name, 10);
  }
  return c.Str();
}

}  // namespace cds::svg
