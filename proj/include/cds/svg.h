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

// Minimal self-contained SVG writer and the two chart shapes the reports use.

#ifndef CDS_SVG_H_
#define CDS_SVG_H_

#include <string>
#include <utility>
#include <vector>

namespace cds::svg {

std::string Num(double v);  // fixed two decimals
std::string Escape(const std::string& s);

class Canvas {
 public:
  Canvas(double width, double height);

  void Rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0);
  void Line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0);
  void Circle(double cx, double cy, double r, const std::string& fill, double opacity = 1.0);
  void Text(double x, double y, const std::string& text, double size = 10.0,
            const std::string& anchor = "start");
  void Polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke,
                double width = 1.5);

  std::string Str() const;

 private:
  double width_, height_;
  std::string body_;
};

// Bars for each group and series drawn up or down from a zero axis.
// values[series][group].
std::string GroupedBarChart(const std::string& title, const std::vector<std::string>& groups,
                            const std::vector<std::string>& series,
                            const std::vector<std::vector<double>>& values);

struct LineSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
std::string LineChart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<LineSeries>& series);

// Signed pixel length of a bar for `value` when `max_abs` spans
// `half_height`; positive bars rise above the zero axis.
double BarOffset(double value, double max_abs, double half_height);

}  // namespace cds::svg

#endif  // CDS_SVG_H_
