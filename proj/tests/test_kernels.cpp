#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <random>

#include "tddp/kernels.hpp"
#include "tddp/rng.hpp"

using namespace tddp;

namespace {

struct Fixture {
  std::vector<Atom> atoms;
  Eigen::MatrixXd omega;
  ThinningSequences ell;
  std::vector<std::vector<double>> data;

  explicit Fixture(std::uint64_t seed) {
    const std::size_t t = 40, g = 3;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 4.0);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (std::size_t k = 0; k < t; ++k) atoms.push_back({n(rng), u(rng)});
    ell = sample_thinning(BernoulliThinning{{0.6}}, t, g, seed);
    std::vector<double> v(t);
    for (auto& x : v) x = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
    omega = thinned_weights(v, ell);
    data.resize(g);
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = 0; j < 200 + 37 * i; ++j) data[i].push_back(n(rng));
  }
  kernels::AllocationModel model() const { return {&atoms, &omega, &ell}; }
};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("parallel allocation matches the serial reference") {
    omp_set_num_threads(4);
    const Fixture f(5);
    std::vector<std::vector<std::size_t>> a, b;
    kernels::allocate(f.data, f.model(), 123, a);
    kernels::allocate_serial(f.data, f.model(), 123, b);
    CHECK(a == b);
    for (std::size_t g = 0; g < a.size(); ++g)
      for (auto k : a[g]) CHECK(f.ell(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(g)) == 1);
  }

  TEST_CASE("allocation law") {
    std::vector<Atom> atoms{{-1.0, 1.0}, {1.0, 1.0}, {0.0, 1.0}};
    Eigen::MatrixXd omega(3, 1);
    omega << 0.3, 0.3, 0.2;
    ThinningSequences ell(3, 1);
    ell << 1, 1, 0;
    const kernels::AllocationModel m{&atoms, &omega, &ell};
    auto p = kernels::allocation_probabilities(0.0, 0, m);
    CHECK(p[2] == 0.0);
    CHECK(std::abs(p[0] - 0.5) < 1e-12);
    CHECK(std::abs(p[1] - 0.5) < 1e-12);

    // scaling all masses leaves the law unchanged
    Eigen::MatrixXd scaled = omega * 1e-200;
    const kernels::AllocationModel ms{&atoms, &scaled, &ell};
    const auto q = kernels::allocation_probabilities(0.7, 0, ms);
    p = kernels::allocation_probabilities(0.7, 0, m);
    for (int k = 0; k < 3; ++k) CHECK(q[k] == doctest::Approx(p[k]).epsilon(1e-12));
    std::vector<std::vector<std::size_t>> za, zb;
    const std::vector<std::vector<double>> y{{0.7, -0.2, 1.5, 3.0}};
    kernels::allocate_serial(y, m, 9, za);
    kernels::allocate_serial(y, ms, 9, zb);
    CHECK(za == zb);

    // far-out observations stay finite in log space
    p = kernels::allocation_probabilities(80.0, 0, m);
    CHECK(p[1] == doctest::Approx(1.0));

    ell << 0, 1, 0;
    std::vector<std::vector<std::size_t>> z;
    kernels::allocate_serial({{-3.0, 0.0, 5.0}}, m, 1, z);
    CHECK(z[0] == std::vector<std::size_t>{1, 1, 1});

    ell << 0, 0, 0;
    CHECK_THROWS(kernels::allocate_serial({{0.0}}, m, 1, z));
  }

  TEST_CASE("mixture grid kernels agree") {
    omp_set_num_threads(4);
    const Fixture f(8);
    std::vector<double> mu, s2;
    for (const auto& a : f.atoms) {
      mu.push_back(a.mu);
      s2.push_back(a.sigma2);
    }
    std::vector<kernels::DrawMixture> mix;
    for (int g = 0; g < 3; ++g)
      mix.push_back({std::span<const double>(f.omega.col(g).data(), 40), mu, s2});
    std::vector<double> grid;
    for (int i = 0; i < 101; ++i) grid.push_back(-10 + 0.2 * i);
    Eigen::MatrixXd a, b;
    kernels::mixture_grid(mix, grid, a);
    kernels::mixture_grid_serial(mix, grid, b);
    CHECK(a == b);
    CHECK((a.array() >= 0).all());
  }

  TEST_CASE("similarity kernels agree") {
    omp_set_num_threads(4);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::uint32_t> lab(0, 4);
    std::vector<std::vector<std::uint32_t>> draws(57, std::vector<std::uint32_t>(90));
    for (auto& d : draws)
      for (auto& x : d) x = lab(rng);
    const auto a = kernels::similarity(draws), b = kernels::similarity_serial(draws);
    CHECK(a == b);
    CHECK(a == a.transpose());
    CHECK((a.diagonal().array() == 1.0).all());
  }
}
