#include "mesim/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mesim {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

Eigen::Index index_at_or_after(Seconds t, Seconds t0, Hertz fs) {
  return static_cast<Eigen::Index>(std::ceil((t - t0) * fs - 1e-6));
}

// Sides of a spectrum on which an offset from `center` is observable.
std::vector<double> sides(const SpectrumReport& spec, Hertz center) {
  if (spec.two_sided || center > 0.0) return {1.0, -1.0};
  return {1.0};
}

bool in_span(const SpectrumReport& spec, Hertz f) {
  const double res = spec.resolution();
  return f >= spec.frequency(0) - 0.5 * res && f <= spec.frequency(spec.frequency.size() - 1) + 0.5 * res;
}

}  // namespace

double noise_density_from_sigma(Volt sigma, double nep, Hertz b_3db) {
  if (!(nep > 0.0) || !(b_3db > 0.0)) throw ConfigError("noise density: nep and b_3db must be > 0");
  return sigma / std::sqrt(nep * b_3db);
}

double lod_from_density(double density, double sensitivity) {
  if (!(sensitivity > 0.0)) throw ConfigError("lod: sensitivity must be > 0");
  return density / sensitivity;
}

LodDcReport lod_dc(const Eigen::VectorXd& signed_trace, Hertz fs, Seconds t0, const std::vector<Plateau>& schedule,
                   double sensitivity, double nep, Hertz b_3db, const LodDcOptions& options) {
  if (!(sensitivity > 0.0)) throw ConfigError("lod_dc: sensitivity must be > 0");
  if (!(fs > 0.0)) throw ConfigError("lod_dc: fs must be > 0");

  LodDcReport report;
  report.sensitivity = sensitivity;
  report.nep = nep;
  report.b_3db = b_3db;
  report.enbw = nep * b_3db;

  const Eigen::Index n = signed_trace.size();
  std::vector<double> lods;
  for (const auto& p : schedule) {
    PlateauRecord rec;
    rec.level = p.level;
    rec.start = p.start;
    rec.end = p.end;
    const Eigen::Index from = std::clamp<Eigen::Index>(index_at_or_after(p.start + options.settle, t0, fs), 0, n);
    const Eigen::Index to = std::clamp<Eigen::Index>(index_at_or_after(p.end, t0, fs), 0, n);
    rec.samples = std::max<Eigen::Index>(0, to - from);
    const double settled = static_cast<double>(rec.samples) / fs;
    if (rec.samples < 2 || settled + 0.5 / fs < options.min_settled) {
      rec.excluded = true;
      rec.note = "settled span " + format_double(settled) + " s shorter than " +
                 format_double(options.min_settled) + " s";
      report.plateaus.push_back(rec);
      continue;
    }
    const auto seg = signed_trace.segment(from, rec.samples);
    rec.mean = seg.mean();
    rec.sigma = std::sqrt((seg.array() - rec.mean).square().sum() / static_cast<double>(rec.samples - 1));
    rec.n_asd = noise_density_from_sigma(rec.sigma, nep, b_3db);
    rec.lod = lod_from_density(rec.n_asd, sensitivity);
    lods.push_back(rec.lod);
    report.plateaus.push_back(rec);
  }

  report.included = static_cast<Eigen::Index>(lods.size());
  if (!lods.empty()) {
    const Eigen::Map<const Eigen::VectorXd> v(lods.data(), static_cast<Eigen::Index>(lods.size()));
    report.lod_mean = v.mean();
    report.lod_std = lods.size() > 1
                         ? std::sqrt((v.array() - report.lod_mean).square().sum() / static_cast<double>(v.size() - 1))
                         : 0.0;
  }
  return report;
}

std::vector<AcLodPoint> lod_ac(const SpectrumReport& spec, double sensitivity, const std::vector<Hertz>& offsets,
                               const AcLodOptions& options) {
  if (!(sensitivity > 0.0)) throw ConfigError("lod_ac: sensitivity must be > 0");
  const double res = spec.resolution();

  std::vector<Hertz> excluded{options.center};
  for (Hertz tone : options.tone_offsets)
    for (double side : sides(spec, options.center)) excluded.push_back(options.center + side * tone);
  auto is_excluded = [&](Hertz f) {
    for (Hertz e : excluded)
      if (std::abs(f - e) <= (static_cast<double>(options.guard_bins) + 0.5) * res) return true;
    return false;
  };

  std::vector<AcLodPoint> out;
  for (Hertz offset : offsets) {
    if (!(offset > 0.0)) throw ConfigError("lod_ac: offsets must be > 0");
    AcLodPoint point;
    point.offset = offset;
    std::vector<double> values;
    const double half_width = std::max(options.neighborhood * offset, 0.5 * res);
    for (double side : sides(spec, options.center)) {
      const Hertz target = options.center + side * offset;
      if (!in_span(spec, target)) continue;
      for (Eigen::Index k = 0; k < spec.frequency.size(); ++k) {
        const Hertz f = spec.frequency(k);
        if (std::abs(f - target) <= half_width && !is_excluded(f)) values.push_back(spec.asd(k));
      }
    }
    point.bins_used = static_cast<Eigen::Index>(values.size());
    if (values.empty()) {
      point.flagged = true;
      point.asd = std::numeric_limits<double>::quiet_NaN();
      point.lod = point.asd;
    } else {
      point.asd = median(values);
      point.lod = point.asd / sensitivity;
    }
    out.push_back(point);
  }
  return out;
}

LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw SizeError("fit_line: x and y differ in length");
  if (x.size() < 3) throw SizeError("fit_line: need at least 3 points, got " + std::to_string(x.size()));
  const double xm = x.mean(), ym = y.mean();
  const Eigen::ArrayXd dx = x.array() - xm, dy = y.array() - ym;
  const double sxx = dx.square().sum();
  if (!(sxx > 0.0)) throw DataError("fit_line: degenerate abscissae (all points share the same x)");
  LineFit fit;
  fit.points = x.size();
  fit.slope = (dx * dy).sum() / sxx;
  fit.intercept = ym - fit.slope * xm;
  const Eigen::ArrayXd residual = y.array() - (fit.slope * x.array() + fit.intercept);
  fit.rss = residual.square().sum();
  const double syy = dy.square().sum();
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - fit.rss / syy, 0.0, 1.0) : 1.0;
  fit.slope_stderr = std::sqrt(fit.rss / static_cast<double>(x.size() - 2) / sxx);
  return fit;
}

LineFit fit_sensitivity(const std::vector<std::pair<Tesla, Volt>>& sweep, std::pair<Tesla, Tesla> window) {
  auto [lo, hi] = window;
  if (lo > hi) std::swap(lo, hi);
  std::vector<double> xs, ys;
  for (const auto& [h, v] : sweep)
    if (h >= lo && h <= hi) {
      xs.push_back(h);
      ys.push_back(v);
    }
  if (xs.size() < 3)
    throw SizeError("fit_sensitivity: " + std::to_string(xs.size()) + " points inside the window, need >= 3");
  return fit_line(Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                  Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));
}

LinearityReport linearity(const std::vector<std::pair<Tesla, Volt>>& points) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(points.size())), y(x.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    x(static_cast<Eigen::Index>(i)) = points[i].first;
    y(static_cast<Eigen::Index>(i)) = points[i].second;
  }
  const LineFit fit = fit_line(x, y);
  return {points, fit.slope, fit.intercept, fit.rss, fit.r_squared};
}

double sideband_amplitude(const SpectrumReport& spec, Hertz center, Hertz offset, Eigen::Index guard) {
  double sum = 0.0;
  int count = 0;
  for (double side : sides(spec, center)) {
    const Hertz f = center + side * offset;
    if (!in_span(spec, f)) continue;
    const double a = spec.peak_amplitude(f, guard);
    sum += a * a;
    ++count;
  }
  if (count == 0) throw RangeError("sideband at offset " + format_double(offset) + " Hz outside the spectrum");
  return std::sqrt(sum / count);
}

double thd(const SpectrumReport& spec, Hertz f_sig, int n_harm, Hertz center) {
  if (n_harm < 2) throw ConfigError("thd: n_harm must be >= 2");
  const double fundamental = sideband_amplitude(spec, center, f_sig);
  if (!(fundamental > 0.0)) throw DataError("thd: fundamental bin is empty");
  double harmonics = 0.0;
  for (int k = 2; k <= n_harm; ++k) {
    const double a = sideband_amplitude(spec, center, k * f_sig);
    harmonics += a * a;
  }
  return std::sqrt(harmonics) / fundamental;
}

CarrierSweepReport carrier_minima(const std::vector<std::pair<Tesla, Volt>>& sweep,
                                  std::optional<Tesla> reference_field) {
  CarrierSweepReport report;
  report.points = sweep;
  report.reference_field = reference_field;
  if (sweep.size() < 5) {
    report.flagged = true;
    report.note = "sweep has " + std::to_string(sweep.size()) + " points, need >= 5";
    return report;
  }

  auto sorted = sweep;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (!(sorted[i].first > sorted[i - 1].first)) throw DataError("carrier_minima: sweep fields must be strictly monotone");
  if (!(sweep.front().first < sweep[1].first) && !(sweep.front().first > sweep[1].first))
    throw DataError("carrier_minima: sweep fields must be strictly monotone");

  const std::size_t n = sorted.size();
  std::vector<double> h(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = sorted[i].first;
    a[i] = std::abs(sorted[i].second);
  }

  if (reference_field && *reference_field >= h.front() && *reference_field <= h.back()) {
    auto it = std::lower_bound(h.begin(), h.end(), *reference_field);
    const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - h.begin()), 1, n - 1);
    const double t = (*reference_field - h[j - 1]) / (h[j] - h[j - 1]);
    report.reference_carrier = a[j - 1] + t * (a[j] - a[j - 1]);
  } else {
    report.reference_carrier = *std::max_element(a.begin(), a.end());
    if (reference_field) report.note = "reference field outside sweep; using max |carrier|";
  }

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(a[i] < a[i - 1] && a[i] < a[i + 1])) continue;
    // Vertex of the parabola through the three neighbors.
    const double x0 = h[i - 1], x1 = h[i], x2 = h[i + 1];
    const double y0 = a[i - 1], y1 = a[i], y2 = a[i + 1];
    const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    double xv = den != 0.0 ? x1 - 0.5 * num / den : x1;
    xv = std::clamp(xv, x0, x2);
    // Lagrange form of the same parabola.
    const double l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2));
    const double l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2));
    const double l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
    const double yv = std::max(0.0, y0 * l0 + y1 * l1 + y2 * l2);
    report.minima.push_back({xv, yv, report.reference_carrier - yv});
  }
  return report;
}

NoiseFit fit_noise_model(const std::vector<std::pair<Hertz, double>>& points, double sensitivity,
                         std::optional<Hertz> fixed_corner) {
  if (!(sensitivity > 0.0)) throw ConfigError("fit_noise_model: sensitivity must be > 0");
  const std::size_t needed = fixed_corner ? 1 : 2;
  if (points.size() < needed)
    throw SizeError("fit_noise_model: need at least " + std::to_string(needed) + " points");
  const auto m = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd f(m), y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    f(i) = points[static_cast<std::size_t>(i)].first;
    y(i) = points[static_cast<std::size_t>(i)].second;
    if (!(f(i) > 0.0)) throw ConfigError("fit_noise_model: frequencies must be > 0");
  }

  // The floor enters linearly: for a given corner the optimal floor is the
  // projection of y onto g = sqrt(1 + fc / f).
  auto shape = [&](double fc) { return (1.0 + fc * f.array().inverse()).sqrt().matrix().eval(); };
  auto best_floor = [&](double fc) {
    const Eigen::VectorXd g = shape(fc);
    return g.dot(y) / g.squaredNorm();
  };
  auto sse = [&](double fc) { return (best_floor(fc) * shape(fc) - y).squaredNorm(); };

  NoiseFit fit;
  double fc = 0.0;
  if (fixed_corner) {
    fc = *fixed_corner;
    fit.converged = true;
  } else {
    // Coarse log scan, then golden-section refinement in log(fc).
    const double fmax = f.maxCoeff();
    const double lo_exp = std::log(1e-4 * fmax), hi_exp = std::log(1e4 * fmax);
    const int grid = 400;
    double best = sse(0.0);
    int best_i = -1;
    for (int i = 0; i <= grid; ++i) {
      const double v = sse(std::exp(lo_exp + (hi_exp - lo_exp) * i / grid));
      if (v < best) {
        best = v;
        best_i = i;
      }
    }
    if (best_i < 0) {
      fc = 0.0;
      fit.converged = true;
    } else {
      double a = lo_exp + (hi_exp - lo_exp) * std::max(0, best_i - 1) / grid;
      double b = lo_exp + (hi_exp - lo_exp) * std::min(grid, best_i + 1) / grid;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = b - phi * (b - a), d = a + phi * (b - a);
      double fcv = sse(std::exp(c)), fdv = sse(std::exp(d));
      int iter = 0;
      for (; iter < 200 && (b - a) > 1e-12; ++iter) {
        if (fcv < fdv) {
          b = d;
          d = c;
          fdv = fcv;
          c = b - phi * (b - a);
          fcv = sse(std::exp(c));
        } else {
          a = c;
          c = d;
          fcv = fdv;
          d = a + phi * (b - a);
          fdv = sse(std::exp(d));
        }
      }
      fc = std::exp(0.5 * (a + b));
      fit.converged = (b - a) <= 1e-12 && best_i < grid;
    }
  }

  const double floor = best_floor(fc);
  const Eigen::VectorXd fitted = floor * shape(fc);
  fit.floor_magnetic = floor;
  fit.model.floor_asd = floor * sensitivity;
  fit.model.flicker_corner = fc;
  fit.residuals = fitted - y;
  fit.relative_residuals = fit.residuals.cwiseQuotient(y);
  fit.rss = fit.residuals.squaredNorm();
  return fit;
}

}  // namespace mesim
