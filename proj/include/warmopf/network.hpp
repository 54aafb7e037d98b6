#pragma once

#include <complex>
#include <filesystem>
#include <string>

#include <Eigen/SparseCore>

#include "warmopf/casefile.hpp"

namespace warmopf {

using Complex = std::complex<double>;
using ComplexSparse = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Bus admittance matrix Y = G + jB in compressed row storage. Iteration over
/// the stored entries is ordered by (row, col).
class AdmittanceMatrix {
 public:
  AdmittanceMatrix() = default;
  explicit AdmittanceMatrix(ComplexSparse y) : y_(std::move(y)) { y_.makeCompressed(); }

  std::size_t size() const { return static_cast<std::size_t>(y_.rows()); }
  std::size_t nonzeros() const { return static_cast<std::size_t>(y_.nonZeros()); }
  const ComplexSparse& matrix() const { return y_; }

  /// Stored entry or 0 when (row, col) is not in the pattern.
  Complex at(std::size_t row, std::size_t col) const;
  Eigen::SparseMatrix<double, Eigen::RowMajor> conductance() const;  // G
  Eigen::SparseMatrix<double, Eigen::RowMajor> susceptance() const;  // B

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (Eigen::Index r = 0; r < y_.outerSize(); ++r) {
      for (ComplexSparse::InnerIterator it(y_, r); it; ++it) {
        fn(static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col()), it.value());
      }
    }
  }

 private:
  ComplexSparse y_;
};

/// Branch-level two-port admittances in the pi model: I_f = yff V_f + yft V_t,
/// I_t = ytf V_f + ytt V_t.
struct BranchAdmittance {
  Complex yff, yft, ytf, ytt;
};

BranchAdmittance branch_admittance(const Branch& br);

/// Assembles Y from in-service branches and bus shunts.
AdmittanceMatrix build_admittance(const CaseData& data, const BusIndex& idx);

struct RowSumReport {
  double max_abs_row_sum = 0.0;
  /// False when the network has shunts, line charging, off-nominal taps or
  /// phase shifts; the row-sum identity does not hold then.
  bool applicable = true;
};

/// Kirchhoff row-sum diagnostic: max over buses of |sum_l Y[m,l]|, which is
/// zero for a pure series network.
RowSumReport row_sum_check(const AdmittanceMatrix& y, const CaseData& data);

/// Matrix Market coordinate dump (complex general, 1-based).
std::string to_matrix_market(const AdmittanceMatrix& y);

}  // namespace warmopf
