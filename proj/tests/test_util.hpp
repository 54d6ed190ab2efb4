#pragma once

#include <complex>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spopf/network_case.hpp"
#include "spopf/types.hpp"

namespace spopf::test {

inline std::string data_dir() { return SPOPF_TEST_DATA_DIR; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Independent complex-arithmetic bus power injections S = V o conj(Y V).
/// Reimplements the admittance algebra directly so it can cross-check the
/// quadratic model.
inline std::vector<std::complex<double>> oracle_injections(const NetworkCase& nc,
                                                           const Vector& x) {
  using C = std::complex<double>;
  const Index n = static_cast<Index>(nc.buses.size());
  std::vector<std::vector<C>> Y(static_cast<size_t>(n), std::vector<C>(static_cast<size_t>(n), C(0, 0)));
  for (const auto& br : nc.branches) {
    const Index i = nc.bus_index(br.from), j = nc.bus_index(br.to);
    const C ys = 1.0 / C(br.r, br.x);
    const C half_b(0.0, br.b_charging / 2.0);
    const C tap = br.tap * std::exp(C(0.0, br.shift));
    Y[i][i] += (ys + half_b) / (br.tap * br.tap);
    Y[i][j] += -ys / std::conj(tap);
    Y[j][i] += -ys / tap;
    Y[j][j] += ys + half_b;
  }
  for (Index i = 0; i < n; ++i)
    Y[i][i] += C(nc.buses[static_cast<size_t>(i)].gs, nc.buses[static_cast<size_t>(i)].bs);

  std::vector<C> S(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    C I(0, 0);
    for (Index j = 0; j < n; ++j) I += Y[i][j] * C(x(j), x(n + j));
    S[static_cast<size_t>(i)] = C(x(i), x(n + i)) * std::conj(I);
  }
  return S;
}

}  // namespace spopf::test
