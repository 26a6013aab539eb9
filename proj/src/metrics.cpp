#include "causalgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "causalgen/errors.hpp"

namespace causalgen {

void MetricTrace::append(long step, const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(columns.size()))
    throw ShapeError("trace expects " + std::to_string(columns.size()) +
                     " values, got " + std::to_string(values.size()));
  if (!steps.empty() && step <= steps.back())
    throw DomainError("trace steps must be strictly increasing (" +
                      std::to_string(step) + " after " +
                      std::to_string(steps.back()) + ")");
  steps.push_back(step);
  rows.push_back(values);
}

namespace {

std::size_t column_index(const MetricTrace& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == name) return i;
  throw SchemaError("trace has no column '" + name + "'");
}

}  // namespace

Eigen::VectorXd MetricTrace::column(const std::string& name) const {
  const auto idx = column_index(*this, name);
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    out[static_cast<Eigen::Index>(r)] = rows[r][static_cast<Eigen::Index>(idx)];
  return out;
}

double MetricTrace::last(const std::string& name) const {
  const auto idx = column_index(*this, name);
  if (rows.empty()) throw DomainError("trace is empty");
  return rows.back()[static_cast<Eigen::Index>(idx)];
}

void MetricTrace::write_csv(std::ostream& out) const {
  out << "step";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << steps[r];
    for (Eigen::Index j = 0; j < rows[r].size(); ++j) out << ',' << rows[r][j];
    out << '\n';
  }
}

void MetricTrace::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  write_csv(out);
  if (!out.flush()) throw ParseError("write failed: " + path);
}

MetricTrace MetricTrace::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);

  const auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace file: " + path);
  auto header = split(line);
  if (header.empty() || header[0] != "step")
    throw ParseError("trace header must start with 'step': " + path);

  MetricTrace trace;
  trace.columns.assign(header.begin() + 1, header.end());
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size())
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    try {
      std::size_t used = 0;
      const long step = std::stol(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument(fields[0]);
      Eigen::VectorXd values(static_cast<Eigen::Index>(fields.size() - 1));
      for (std::size_t j = 1; j < fields.size(); ++j) {
        const double v = std::stod(fields[j], &used);
        if (used != fields[j].size()) throw std::invalid_argument(fields[j]);
        values[static_cast<Eigen::Index>(j - 1)] = v;
      }
      trace.append(step, values);
    } catch (const std::invalid_argument&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad number");
    } catch (const std::out_of_range&) {
      throw ParseError("line " + std::to_string(lineno) + ": number overflow");
    }
  }
  return trace;
}

ProbTable empirical_joint(const Eigen::MatrixXd& samples,
                          const std::vector<std::string>& labels) {
  const int d = static_cast<int>(labels.size());
  if (d == 0) return make_prob_table({}, Eigen::VectorXd::Ones(1));
  if (d > 20) throw DomainError("at most 20 labels supported");
  if (samples.cols() != d)
    throw ShapeError("samples have " + std::to_string(samples.cols()) +
                     " columns for " + std::to_string(d) + " labels");
  if (samples.rows() < 1) throw DomainError("need at least one sample");

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(Eigen::Index{1} << d);
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    Eigen::Index idx = 0;
    for (int j = 0; j < d; ++j) {
      const double v = samples(r, j);
      if (v != 0.0 && v != 1.0)
        throw DomainError("non-binary entry " + std::to_string(v) +
                          " at row " + std::to_string(r));
      idx |= static_cast<Eigen::Index>(v) << j;
    }
    counts[idx] += 1.0;
  }
  return make_prob_table(labels, counts / static_cast<double>(samples.rows()));
}

double tvd(const ProbTable& p, const ProbTable& q) {
  if (p.labels != q.labels)
    throw SchemaError("tvd requires matching label orders");
  return 0.5 * (p.p - q.p).array().abs().sum();
}

double tvd(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size())
    throw ShapeError("tvd requires equal-length vectors");
  return 0.5 * (p - q).array().abs().sum();
}

HistogramSpec histogram_spec(const Eigen::MatrixXd& reference, int bins) {
  if (reference.rows() < 1) throw DomainError("empty reference dataset");
  if (bins < 1) throw DomainError("bin count must be positive");
  HistogramSpec spec;
  spec.lo = reference.colwise().minCoeff();
  spec.hi = reference.colwise().maxCoeff();
  spec.bins = bins;
  return spec;
}

Eigen::VectorXd histogram_density(const Eigen::MatrixXd& samples,
                                  const HistogramSpec& spec) {
  const Eigen::Index d = spec.lo.size();
  if (spec.hi.size() != d)
    throw ShapeError("histogram spec lo/hi lengths differ");
  if (samples.cols() != d)
    throw ShapeError("samples have " + std::to_string(samples.cols()) +
                     " columns, spec covers " + std::to_string(d));
  if (samples.rows() < 1) throw DomainError("need at least one sample");
  double cells_check = 1.0;
  for (Eigen::Index j = 0; j < d; ++j) cells_check *= spec.bins;
  if (cells_check > 1e7) throw DomainError("histogram would exceed 1e7 cells");

  Eigen::Index cells = 1;
  for (Eigen::Index j = 0; j < d; ++j) cells *= spec.bins;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(cells);
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    Eigen::Index idx = 0;
    Eigen::Index stride = 1;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double width = spec.hi[j] - spec.lo[j];
      long b = 0;
      if (width > 0.0) {
        b = static_cast<long>(
            std::floor((samples(r, j) - spec.lo[j]) / width * spec.bins));
        b = std::clamp(b, 0L, static_cast<long>(spec.bins - 1));
      }
      idx += stride * b;
      stride *= spec.bins;
    }
    counts[idx] += 1.0;
  }
  return counts / static_cast<double>(samples.rows());
}

double histogram_tvd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const HistogramSpec& spec) {
  return tvd(histogram_density(a, spec), histogram_density(b, spec));
}

RejectionResult rejection_condition(
    const LabelSampler& sampler,
    const std::vector<std::pair<int, double>>& evidence, int n,
    long max_draws) {
  if (n < 1) throw DomainError("need n >= 1 samples");
  if (max_draws < 1) throw DomainError("max_draws must be positive");
  for (const auto& [col, v] : evidence) {
    if (col < 0) throw ShapeError("negative evidence column");
    if (!std::isfinite(v)) throw DomainError("non-finite evidence value");
  }

  constexpr long kProbeDraws = 10'000;
  constexpr double kAcceptanceFloor = 1e-4;

  RejectionResult res;
  bool probe_checked = false;
  int batch = std::max(n, 256);
  while (res.accepted < n) {
    if (res.draws >= max_draws)
      throw ImpossibleEvidence(
          "rejection sampling exhausted " + std::to_string(res.draws) +
          " draws with acceptance estimate " +
          std::to_string(res.acceptance_rate()));
    batch = static_cast<int>(
        std::min<long>(batch, max_draws - res.draws));
    Eigen::MatrixXd rows = sampler(batch);
    if (rows.rows() != batch)
      throw ShapeError("sampler returned " + std::to_string(rows.rows()) +
                       " rows, expected " + std::to_string(batch));
    if (res.samples.size() == 0 && res.accepted == 0)
      res.samples.resize(n, rows.cols());
    for (const auto& [col, v] : evidence)
      if (col >= rows.cols())
        throw ShapeError("evidence column " + std::to_string(col) +
                         " out of range for " + std::to_string(rows.cols()) +
                         " labels");

    for (Eigen::Index r = 0; r < rows.rows() && res.accepted < n; ++r) {
      ++res.draws;
      bool match = true;
      for (const auto& [col, v] : evidence)
        if (rows(r, col) != v) {
          match = false;
          break;
        }
      if (match) res.samples.row(res.accepted++) = rows.row(r);
    }
    // draws counts examined rows only; a batch tail left unread after the
    // nth acceptance does not skew the estimate

    if (!probe_checked && res.draws >= kProbeDraws && res.accepted < n) {
      probe_checked = true;
      if (res.acceptance_rate() < kAcceptanceFloor)
        throw ImpossibleEvidence(
            "acceptance estimate " + std::to_string(res.acceptance_rate()) +
            " below floor 1e-4 after " + std::to_string(res.draws) +
            " draws");
    }
    batch = std::min(batch * 2, 1 << 16);
  }
  return res;
}

std::vector<double> marginal_report(const ProbTable& t) {
  std::vector<double> out;
  out.reserve(t.labels.size());
  for (const auto& l : t.labels) out.push_back(marginal(t, l));
  return out;
}

Eigen::Matrix2d pairwise_report(const ProbTable& t, const std::string& a,
                                const std::string& b) {
  ProbTable pair = marginalize(t, {a, b});
  Eigen::Matrix2d out;
  // pair index: bit 0 = a, bit 1 = b
  out(0, 0) = pair.p[0];
  out(1, 0) = pair.p[1];
  out(0, 1) = pair.p[2];
  out(1, 1) = pair.p[3];
  return out;
}

std::string format_report(
    const std::vector<std::string>& row_names,
    const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
  for (const auto& [header, values] : columns)
    if (values.size() != row_names.size())
      throw ShapeError("column '" + header + "' has " +
                       std::to_string(values.size()) + " values for " +
                       std::to_string(row_names.size()) + " rows");

  std::size_t name_width = 0;
  for (const auto& r : row_names) name_width = std::max(name_width, r.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width)) << "" << std::right;
  for (const auto& [header, values] : columns)
    out << "  " << std::setw(10) << header;
  out << '\n';
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    out << std::left << std::setw(static_cast<int>(name_width)) << row_names[r]
        << std::right << std::fixed << std::setprecision(5);
    for (const auto& [header, values] : columns)
      out << "  " << std::setw(10) << values[r];
    out << '\n';
    out.unsetf(std::ios::fixed);
  }
  return out.str();
}

}  // namespace causalgen
