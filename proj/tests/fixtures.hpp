#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "kstab/palp.hpp"
#include "kstab/pl_function.hpp"

namespace kstab::testing {

inline LatticePolytope interval() { return make_polytope({{-1}, {1}}); }
inline LatticePolytope p2_triangle() { return make_polytope({{2, -1}, {-1, 2}, {-1, -1}}); }
inline LatticePolytope square() { return make_polytope({{-1, -1}, {-1, 1}, {1, -1}, {1, 1}}); }
inline LatticePolytope cross_polytope() { return make_polytope({{1, 0}, {0, 1}, {-1, 0}, {0, -1}}); }
inline LatticePolytope f1_trapezoid() { return make_polytope({{-1, -1}, {0, -1}, {2, 1}, {-1, 1}}); }

inline std::vector<LatticePolytope> load_palp(const std::string& name, std::size_t limit = static_cast<std::size_t>(-1)) {
  GzLineSource src(std::string(KSTAB_TEST_DATA) + "/" + name);
  PalpReader reader(src);
  std::vector<LatticePolytope> out;
  while (out.size() < limit) {
    auto rec = reader.next();
    if (!rec) break;
    out.push_back(rec->polytope());
  }
  return out;
}

inline std::vector<LatticePolytope> reflexive_2d() { return load_palp("reflexive_2d.palp"); }

/// Every 97th entry of the 3-d database plus the first few: spot checks.
inline std::vector<LatticePolytope> reflexive_3d_spot() {
  auto all = load_palp("reflexive_3d.palp");
  std::vector<LatticePolytope> out;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (i < 5 || i % 97 == 0) out.push_back(all[i]);
  return out;
}

inline BigRational random_rational(std::mt19937_64& rng, int num_range, int den_max) {
  std::uniform_int_distribution<int> num(-num_range, num_range);
  std::uniform_int_distribution<int> den(1, den_max);
  return BigRational(num(rng), den(rng));
}

/// max of `pieces` random affine functions with small rational coefficients.
inline PLConvexFn random_pl(std::mt19937_64& rng, std::size_t dim, std::size_t pieces) {
  std::vector<AffineFn> ps;
  for (std::size_t i = 0; i < pieces; ++i) {
    AffineFn a;
    for (std::size_t j = 0; j < dim; ++j) a.gradient.push_back(random_rational(rng, 6, 3));
    a.constant = random_rational(rng, 4, 4);
    ps.push_back(std::move(a));
  }
  return PLConvexFn(std::move(ps));
}

}  // namespace kstab::testing
