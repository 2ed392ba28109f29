#pragma once

#include "jkiv/common.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace jkiv {

/// Observed sample for a linear IV model: outcome, endogenous regressors,
/// excluded instruments and included exogenous controls.
struct IVDataset {
  Vector y;
  Matrix X;
  Matrix Z;
  Matrix Z1;  // n x d_c, d_c may be zero
  std::string y_name = "y";
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::vector<std::string> control_names;

  Index n() const { return y.size(); }
  Index dx() const { return X.cols(); }
  Index dz() const { return Z.cols(); }
  Index dc() const { return Z1.cols(); }

  /// Throws InputError when shapes or values violate the dataset invariants.
  void validate() const;
};

/// Dataset with the controls projected out of every block.
struct PartialledData {
  Vector y;
  Matrix X;
  Matrix Z;
  Index dc = 0;
  Matrix Z1;  // retained for hat-matrix projection
  std::vector<std::string> z_names;

  Index n() const { return y.size(); }
  Index dx() const { return X.cols(); }
  Index dz() const { return Z.cols(); }
};

enum class ColumnRole { outcome, endogenous, instrument, control };

/// Role -> column names. Parsed from a flat `role = a, b, c` file.
struct Schema {
  std::string outcome;
  std::vector<std::string> endogenous;
  std::vector<std::string> instruments;
  std::vector<std::string> controls;

  static Schema parse(const std::string& text);
  static Schema load(const std::filesystem::path& path);
};

/// Header row followed by numeric rows, comma separated.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  static CsvTable parse(const std::string& text);
  static CsvTable load(const std::filesystem::path& path);
  Index column(const std::string& name) const;  // -1 when absent
};

IVDataset dataset_from_table(const CsvTable& table, const Schema& schema);
IVDataset load_csv(const std::filesystem::path& path, const Schema& schema);

/// Reads a purely numeric CSV (with header) into a matrix.
Matrix load_matrix_csv(const std::filesystem::path& path);

struct CollinearityResult {
  Matrix Z;
  std::vector<Index> kept;
  std::vector<Index> dropped;
};

/// Greedy left-to-right pruning: column j is dropped when its distance to the
/// span of the retained columns on its left is at most tol * sigma_max(Z).
CollinearityResult drop_collinear_instruments(const Matrix& Z, double tol = 1e-10);

/// Residualizes y, X and Z on the controls. Identity when d_c = 0.
PartialledData partial_out_controls(const IVDataset& data);

/// Orthonormal basis of the control space (n x d_c); throws if Z1 is rank deficient.
Matrix control_basis(const Matrix& Z1);

}  // namespace jkiv
