#ifndef OTC_ADMITTANCE_HPP_
#define OTC_ADMITTANCE_HPP_

#include <Eigen/Sparse>
#include <map>

#include "otc/feeder.hpp"

namespace otc {

using SparseComplex = Eigen::SparseMatrix<Complex>;
using ComplexVector = Eigen::VectorXcd;

/// Sparse nodal admittance matrix plus the entry positions each OLTC touches.
struct AdmittanceMatrix {
  SparseComplex y;
  // per OLTC id: the (row,col) pairs whose value depends on that device's tap
  std::map<std::string, std::vector<std::pair<int, int>>> tap_entries;
};

using TapMap = std::map<std::string, int>;  // OLTC id -> tap position

AdmittanceMatrix build_admittance(const FeederModel& model, const TapMap& taps);

int tap_of(const TapMap& taps, const std::string& id);

}  // namespace otc

#endif  // OTC_ADMITTANCE_HPP_
