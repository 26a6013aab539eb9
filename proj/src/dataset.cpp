#include "causalgen/dataset.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "causalgen/errors.hpp"

namespace causalgen {

namespace {

[[noreturn]] void line_error(int lineno, const std::string& what) {
  throw ParseError("line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

LabelDataset ingest_celeba_attrs(const std::string& path,
                                 const std::vector<std::string>& selected) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) line_error(1, "missing row count");
  long declared = 0;
  try {
    std::size_t used = 0;
    declared = std::stol(line, &used);
    while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used])))
      ++used;
    if (used != line.size()) throw std::invalid_argument(line);
  } catch (const std::exception&) {
    line_error(1, "row count expected, got '" + line + "'");
  }
  if (declared < 0) line_error(1, "negative row count");

  if (!std::getline(in, line)) line_error(2, "missing attribute names");
  std::vector<std::string> names;
  {
    std::istringstream s(line);
    std::string tok;
    while (s >> tok) names.push_back(tok);
  }
  if (names.empty()) line_error(2, "no attribute names");

  std::vector<int> keep;
  std::vector<std::string> out_labels;
  if (selected.empty()) {
    for (int i = 0; i < static_cast<int>(names.size()); ++i) keep.push_back(i);
    out_labels = names;
  } else {
    for (const auto& want : selected) {
      int found = -1;
      for (int i = 0; i < static_cast<int>(names.size()); ++i)
        if (names[i] == want) {
          found = i;
          break;
        }
      if (found < 0)
        throw SchemaError("attribute '" + want + "' not in " + path);
      keep.push_back(found);
      out_labels.push_back(want);
    }
  }

  Eigen::MatrixXd rows(declared, static_cast<Eigen::Index>(keep.size()));
  long row = 0;
  int lineno = 2;
  std::vector<int> flags(names.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (row >= declared)
      line_error(lineno, "more rows than the declared " +
                             std::to_string(declared));
    std::istringstream s(line);
    std::string filename;
    s >> filename;  // retained in the file for traceability, unused here
    for (std::size_t j = 0; j < names.size(); ++j) {
      std::string tok;
      if (!(s >> tok))
        line_error(lineno, "expected " + std::to_string(names.size()) +
                               " flags, got " + std::to_string(j));
      if (tok == "1")
        flags[j] = 1;
      else if (tok == "-1")
        flags[j] = 0;
      else
        line_error(lineno, "flag must be 1 or -1, got '" + tok + "'");
    }
    std::string extra;
    if (s >> extra)
      line_error(lineno, "unexpected trailing token '" + extra + "'");
    for (std::size_t j = 0; j < keep.size(); ++j)
      rows(row, static_cast<Eigen::Index>(j)) = flags[keep[j]];
    ++row;
  }
  if (row != declared)
    throw ParseError(path + " declares " + std::to_string(declared) +
                     " rows but has " + std::to_string(row));
  return LabelDataset{std::move(out_labels), std::move(rows)};
}

void write_celeba_attrs(const std::string& path,
                        const std::vector<std::string>& names,
                        const Eigen::MatrixXd& rows) {
  if (rows.cols() != static_cast<Eigen::Index>(names.size()))
    throw ShapeError("row width " + std::to_string(rows.cols()) +
                     " does not match " + std::to_string(names.size()) +
                     " names");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << rows.rows() << '\n';
  for (std::size_t j = 0; j < names.size(); ++j)
    out << (j ? " " : "") << names[j];
  out << '\n';
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out << std::setw(6) << std::setfill('0') << (r + 1) << ".jpg"
        << std::setfill(' ');
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const double v = rows(r, j);
      if (v != 0.0 && v != 1.0)
        throw DomainError("entry " + std::to_string(v) + " is not 0/1");
      out << ' ' << (v == 1.0 ? "1" : "-1");
    }
    out << '\n';
  }
  if (!out.flush()) throw ParseError("write failed: " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows) {
  if (rows.cols() != static_cast<Eigen::Index>(header.size()))
    throw ShapeError("row width does not match header");
  for (const auto& h : header)
    if (h.empty() || h.find(',') != std::string::npos)
      throw ParseError("header fields must be nonempty and comma-free");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      out << (j ? "," : "") << rows(r, j);
    out << '\n';
  }
  if (!out.flush()) throw ParseError("write failed: " + path);
}

LabelDataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);

  const auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream s(line);
    while (std::getline(s, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  if (header.empty()) throw ParseError("empty csv header: " + path);

  std::vector<Eigen::VectorXd> parsed;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size())
      line_error(lineno, "expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
    Eigen::VectorXd row(static_cast<Eigen::Index>(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      try {
        std::size_t used = 0;
        row[static_cast<Eigen::Index>(j)] = std::stod(fields[j], &used);
        if (used != fields[j].size()) throw std::invalid_argument(fields[j]);
      } catch (const std::exception&) {
        line_error(lineno, "bad number '" + fields[j] + "'");
      }
    }
    parsed.push_back(std::move(row));
  }

  LabelDataset out;
  out.labels = std::move(header);
  out.rows.resize(static_cast<Eigen::Index>(parsed.size()),
                  static_cast<Eigen::Index>(out.labels.size()));
  for (std::size_t r = 0; r < parsed.size(); ++r)
    out.rows.row(static_cast<Eigen::Index>(r)) = parsed[r];
  return out;
}

const std::vector<std::string>& celeba_labels() {
  static const std::vector<std::string> labels = {
      "Young",           "Male",
      "Eyeglasses",      "Bald",
      "Mustache",        "Smiling",
      "Wearing_Lipstick", "Mouth_Slightly_Open",
      "Narrow_Eyes"};
  return labels;
}

Scm celeba_standin_scm() {
  const auto& names = celeba_labels();
  CausalGraph g(names, {{"Young", "Male"},
                        {"Young", "Eyeglasses"},
                        {"Young", "Bald"},
                        {"Male", "Bald"},
                        {"Male", "Mustache"},
                        {"Young", "Smiling"},
                        {"Male", "Wearing_Lipstick"},
                        {"Smiling", "Mouth_Slightly_Open"},
                        {"Smiling", "Narrow_Eyes"}});

  const auto table = [](std::initializer_list<double> ps) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(ps.size()));
    Eigen::Index i = 0;
    for (double p : ps) v[i++] = p;
    return DiscreteTable{v};
  };

  Scm scm{std::move(g), {}, {}};
  // conditionals tuned so the exact joint hits the published attribute
  // statistics: every marginal, the (Young, Male) pairwise cells, and
  // P(Male=0, Mustache=1) = 0
  scm.mechanisms = {
      table({0.77362}),               // Young
      table({0.72, 0.3280248}),       // Male | Young
      table({0.1052734, 0.0520}),     // Eyeglasses | Young
      table({0.001, 0.001, 0.10, 0.0219}),  // Bald | (Young, Male)
      table({0.0, 0.0996760}),        // Mustache | Male
      table({0.4208411, 0.50}),       // Smiling | Young
      table({0.8050117, 0.007}),      // Wearing_Lipstick | Male
      table({0.2239509, 0.7622}),     // Mouth_Slightly_Open | Smiling
      table({0.0910888, 0.141}),      // Narrow_Eyes | Smiling
  };
  scm.exogenous.assign(names.size(), Exogenous{});
  validate_scm(scm);
  return scm;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

nlohmann::ordered_json make_manifest(
    const std::string& command, const nlohmann::ordered_json& config,
    const std::vector<std::pair<std::string, std::string>>& inputs) {
  nlohmann::ordered_json m;
  m["format_version"] = 1;
  m["command"] = command;
  m["config"] = config;
  m["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [name, path] : inputs) {
    m["inputs"][name] = {{"path", path}, {"fnv1a64", hex64(fnv1a64_file(path))}};
  }
  return m;
}

}  // namespace causalgen
