#pragma once

// Conversions from plain oracle tables to library objects.

#include <string>
#include <vector>

#include "ibfrontier.hpp"
#include "oracle.hpp"

namespace support {

inline std::vector<std::string> labels(std::string const& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline ibf::Matrix to_matrix(oracle::Mat const& rows) { return ibf::Matrix::from_rows(rows); }

inline ibf::MeaningSpace space(oracle::Instance const& inst) {
  auto const n = inst.need.size();
  return ibf::MeaningSpace::create(to_matrix(inst.reps), labels("u", inst.reps[0].size()), labels("m", n),
                                   ibf::Distribution::create(inst.need, labels("m", n)));
}

inline ibf::NamingSystem system(oracle::Mat const& enc) {
  return ibf::NamingSystem::create(to_matrix(enc), labels("w", enc[0].size()), labels("m", enc.size()));
}

inline oracle::Mat to_rows(ibf::Matrix const& m) {
  oracle::Mat out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

}  // namespace support
