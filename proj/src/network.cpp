#include "warmopf/network.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

#include "warmopf/error.hpp"
#include "warmopf/util.hpp"

namespace warmopf {

Complex AdmittanceMatrix::at(std::size_t row, std::size_t col) const {
  return y_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

Eigen::SparseMatrix<double, Eigen::RowMajor> AdmittanceMatrix::conductance() const {
  return y_.real();
}

Eigen::SparseMatrix<double, Eigen::RowMajor> AdmittanceMatrix::susceptance() const {
  return y_.imag();
}

BranchAdmittance branch_admittance(const Branch& br) {
  if (br.r == 0.0 && br.x == 0.0) {
    throw Error(ErrorCode::ZeroImpedanceBranch, "branch " + std::to_string(br.from) + "-" + std::to_string(br.to));
  }
  const Complex ys = 1.0 / Complex(br.r, br.x);
  const Complex ych(0.0, br.b_ch / 2.0);
  const Complex tap = std::polar(br.tap, br.shift);
  BranchAdmittance out;
  out.ytt = ys + ych;
  out.yff = out.ytt / (br.tap * br.tap);
  out.yft = -ys / std::conj(tap);
  out.ytf = -ys / tap;
  return out;
}

AdmittanceMatrix build_admittance(const CaseData& data, const BusIndex& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(4 * data.branches.size() + data.buses.size());
  for (const Branch& br : data.branches) {
    if (!br.in_service) continue;
    const auto f = static_cast<Eigen::Index>(idx.index_of(br.from));
    const auto t = static_cast<Eigen::Index>(idx.index_of(br.to));
    const BranchAdmittance ba = branch_admittance(br);
    trips.emplace_back(f, f, ba.yff);
    trips.emplace_back(t, t, ba.ytt);
    trips.emplace_back(f, t, ba.yft);
    trips.emplace_back(t, f, ba.ytf);
  }
  for (const Bus& b : data.buses) {
    if (b.g_shunt == 0.0 && b.b_shunt == 0.0) continue;
    const auto m = static_cast<Eigen::Index>(idx.index_of(b.id));
    trips.emplace_back(m, m, Complex(b.g_shunt, b.b_shunt));
  }
  ComplexSparse y(n, n);
  y.setFromTriplets(trips.begin(), trips.end());
  return AdmittanceMatrix(std::move(y));
}

RowSumReport row_sum_check(const AdmittanceMatrix& y, const CaseData& data) {
  RowSumReport report;
  for (const Bus& b : data.buses) {
    if (b.g_shunt != 0.0 || b.b_shunt != 0.0) report.applicable = false;
  }
  for (const Branch& br : data.branches) {
    if (br.in_service && (br.b_ch != 0.0 || br.tap != 1.0 || br.shift != 0.0)) report.applicable = false;
  }
  std::vector<Complex> sums(y.size(), Complex{});
  y.for_each([&](std::size_t r, std::size_t, Complex v) { sums[r] += v; });
  for (const Complex& s : sums) report.max_abs_row_sum = std::max(report.max_abs_row_sum, std::abs(s));
  return report;
}

std::string to_matrix_market(const AdmittanceMatrix& y) {
  std::ostringstream out;
  out << "%%MatrixMarket matrix coordinate complex general\n";
  out << y.size() << " " << y.size() << " " << y.nonzeros() << "\n";
  y.for_each([&](std::size_t r, std::size_t c, Complex v) {
    out << (r + 1) << " " << (c + 1) << " " << format_double(v.real()) << " " << format_double(v.imag()) << "\n";
  });
  return out.str();
}

}  // namespace warmopf
