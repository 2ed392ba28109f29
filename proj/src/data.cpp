#include "jkiv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace jkiv {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

void IVDataset::validate() const {
  const Index rows = y.size();
  if (rows < 2) throw InputError("dataset needs at least 2 observations");
  if (X.rows() != rows || Z.rows() != rows || (Z1.size() > 0 && Z1.rows() != rows))
    throw InputError("all data blocks must share the same row count");
  if (X.cols() < 1) throw InputError("dataset needs at least one endogenous variable");
  if (Z.cols() < 1) throw InputError("dataset needs at least one instrument");
  if (dc() >= rows) throw InputError("number of controls must be smaller than n");
  if (!y.allFinite() || !all_finite(X) || !all_finite(Z) || !all_finite(Z1))
    throw InputError("dataset contains non-finite values");
}

// Schema --------------------------------------------------------------------

Schema Schema::parse(const std::string& text) {
  Schema schema;
  std::set<std::string> seen_columns;
  bool have_outcome = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("schema line " + std::to_string(line_no) + ": expected 'role = columns'");
    const std::string role = trim(line.substr(0, eq));
    std::vector<std::string> cols;
    for (auto& c : split(line.substr(eq + 1), ','))
      if (!c.empty()) cols.push_back(c);
    if (cols.empty())
      throw InputError("schema line " + std::to_string(line_no) + ": role '" + role +
                       "' lists no columns");
    for (const auto& c : cols) {
      if (!seen_columns.insert(c).second)
        throw InputError("schema: column '" + c + "' is assigned more than one role");
    }
    if (role == "outcome") {
      if (have_outcome || cols.size() != 1)
        throw InputError("schema: duplicate role for outcome (exactly one outcome column allowed)");
      schema.outcome = cols.front();
      have_outcome = true;
    } else if (role == "endogenous") {
      schema.endogenous.insert(schema.endogenous.end(), cols.begin(), cols.end());
    } else if (role == "instrument" || role == "instruments") {
      schema.instruments.insert(schema.instruments.end(), cols.begin(), cols.end());
    } else if (role == "control" || role == "controls") {
      schema.controls.insert(schema.controls.end(), cols.begin(), cols.end());
    } else {
      throw InputError("schema: unknown role '" + role + "'");
    }
  }
  if (!have_outcome) throw InputError("schema: missing outcome column");
  if (schema.endogenous.empty()) throw InputError("schema: missing endogenous column");
  if (schema.instruments.empty()) throw InputError("schema: missing instrument column");
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) { return parse(read_file(path)); }

// CSV -----------------------------------------------------------------------

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("csv: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  table.header = split(trim(line), ',');
  for (const auto& h : table.header)
    if (h.empty()) throw InputError("csv: empty column name in header");

  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    auto cells = split(trim(line), ',');
    if (cells.size() != table.header.size())
      throw InputError("csv row " + std::to_string(row_no) + ": expected " +
                       std::to_string(table.header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string& cell = cells[c];
      const std::string where =
          "csv row " + std::to_string(row_no) + ", column '" + table.header[c] + "'";
      if (cell.empty()) throw InputError(where + ": empty cell");
      double v = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      if (*begin == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end)
        throw InputError(where + ": non-numeric value '" + cell + "'");
      if (!std::isfinite(v)) throw InputError(where + ": non-finite value '" + cell + "'");
      values[c] = v;
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

CsvTable CsvTable::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Index CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<Index>(it - header.begin());
}

IVDataset dataset_from_table(const CsvTable& table, const Schema& schema) {
  const Index n = static_cast<Index>(table.rows.size());
  auto fill = [&](const std::vector<std::string>& names) {
    Matrix m(n, static_cast<Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
      const Index c = table.column(names[k]);
      if (c < 0) throw InputError("csv: missing column '" + names[k] + "'");
      for (Index i = 0; i < n; ++i) m(i, static_cast<Index>(k)) = table.rows[i][c];
    }
    return m;
  };
  IVDataset d;
  d.y = fill({schema.outcome}).col(0);
  d.X = fill(schema.endogenous);
  d.Z = fill(schema.instruments);
  d.Z1 = fill(schema.controls);
  d.y_name = schema.outcome;
  d.x_names = schema.endogenous;
  d.z_names = schema.instruments;
  d.control_names = schema.controls;
  d.validate();
  return d;
}

IVDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  return dataset_from_table(CsvTable::load(path), schema);
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  const CsvTable t = CsvTable::load(path);
  Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = t.rows[i][j];
  return m;
}

// Collinearity --------------------------------------------------------------

CollinearityResult drop_collinear_instruments(const Matrix& Z, double tol) {
  if (!(tol > 0.0)) throw InputError("collinearity tolerance must be positive");
  CollinearityResult out;
  const Index n = Z.rows();
  const double sigma_max =
      Z.size() == 0 ? 0.0 : Eigen::BDCSVD<Matrix>(Z).singularValues()(0);
  const double threshold = tol * sigma_max;

  // Orthonormal basis of retained columns, grown one column at a time with
  // two passes of modified Gram-Schmidt.
  Matrix Q(n, std::min(n, Z.cols()));
  Index rank = 0;
  for (Index j = 0; j < Z.cols(); ++j) {
    Vector v = Z.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (Index k = 0; k < rank; ++k) v -= Q.col(k).dot(v) * Q.col(k);
    const double dist = v.norm();
    if (sigma_max == 0.0 || dist <= threshold || rank == n) {
      out.dropped.push_back(j);
      continue;
    }
    Q.col(rank++) = v / dist;
    out.kept.push_back(j);
  }
  if (out.kept.empty()) throw InputError("all instrument columns are (numerically) zero");
  out.Z.resize(n, static_cast<Index>(out.kept.size()));
  for (std::size_t k = 0; k < out.kept.size(); ++k)
    out.Z.col(static_cast<Index>(k)) = Z.col(out.kept[k]);
  return out;
}

Matrix control_basis(const Matrix& Z1) {
  if (Z1.cols() == 0) return Matrix(Z1.rows(), 0);
  CollinearityResult pruned;
  try {
    pruned = drop_collinear_instruments(Z1);
  } catch (const InputError&) {
    throw InputError("controls are rank deficient (all zero); drop the offending controls");
  }
  if (!pruned.dropped.empty())
    throw InputError("controls are rank deficient (column " +
                     std::to_string(pruned.dropped.front()) +
                     " is collinear with earlier controls); drop the offending controls");
  Eigen::HouseholderQR<Matrix> qr(Z1);
  return qr.householderQ() * Matrix::Identity(Z1.rows(), Z1.cols());
}

PartialledData partial_out_controls(const IVDataset& data) {
  data.validate();
  PartialledData out;
  out.dc = data.dc();
  out.z_names = data.z_names;
  if (data.dc() == 0) {
    out.y = data.y;
    out.X = data.X;
    out.Z = data.Z;
    out.Z1 = Matrix(data.n(), 0);
    return out;
  }
  const Matrix Q = control_basis(data.Z1);
  auto resid = [&Q](const Matrix& m) -> Matrix { return m - Q * (Q.transpose() * m); };
  out.y = resid(data.y);
  out.X = resid(data.X);
  out.Z = resid(data.Z);
  out.Z1 = data.Z1;
  return out;
}

}  // namespace jkiv
