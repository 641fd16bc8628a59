#include <doctest.h>

#include "fem/mesh.hpp"
#include "fem/norms.hpp"

#include <cmath>
#include <random>

using namespace ssc::fem;

namespace {

FeFunction interpolate_x(const MeshPtr& mesh) {
  Eigen::VectorXd c(mesh->n_vertices());
  for (int i = 0; i < mesh->n_vertices(); ++i) c[i] = mesh->vertices(i, 0);
  return FeFunction{mesh, std::move(c)};
}

Eigen::VectorXd random_coeffs(const MeshPtr& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd c(mesh->n_vertices());
  for (int i = 0; i < c.size(); ++i) c[i] = dist(rng);
  return c;
}

}  // namespace

TEST_CASE("interval mesh geometry") {
  auto m1 = build_interval_mesh(1);
  CHECK(m1->n_vertices() == 2);
  CHECK(m1->n_elements() == 1);
  auto m4 = build_interval_mesh(4);
  CHECK(m4->h == doctest::Approx(0.25).epsilon(1e-15));
  double len = 0.0;
  for (double a : m4->areas) len += a;
  CHECK(len == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(build_interval_mesh(0), std::invalid_argument);
}

TEST_CASE("square mesh geometry") {
  auto m1 = build_square_mesh(1);
  CHECK(m1->n_vertices() == 4);
  CHECK(m1->n_elements() == 2);
  auto m2 = build_square_mesh(2);
  CHECK(m2->n_vertices() == 9);
  CHECK(m2->n_elements() == 8);
  auto m4 = build_square_mesh(4);
  double area = 0.0;
  for (double a : m4->areas) area += a;
  CHECK(std::abs(area - 1.0) < 1e-14);
  CHECK(m4->h == doctest::Approx(std::sqrt(2.0) / 4).epsilon(1e-14));
}

TEST_CASE("mass matrix integrates exactly") {
  // total mass is |Omega| = 1 in both dimensions
  for (auto mesh : {build_interval_mesh(8), build_square_mesh(4)}) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh->n_vertices());
    CHECK(std::abs(ones.dot(mesh->mass * ones) - 1.0) < 1e-13);
  }
}

TEST_CASE("W^{1,s} seminorm") {
  auto mesh = build_interval_mesh(8);
  const FeFunction x = interpolate_x(mesh);
  for (double s : {1.5, 2.0, 3.0, 4.0})
    CHECK(seminorm_w1s(x, s) == doctest::Approx(1.0).epsilon(1e-13));

  const FeFunction c{mesh, Eigen::VectorXd::Constant(mesh->n_vertices(), 3.7)};
  CHECK(seminorm_w1s(c, 2.0) == 0.0);
  // shift invariance is exact
  FeFunction shifted{mesh, (x.coeffs.array() + 11.0).matrix()};
  CHECK(seminorm_w1s(shifted, 3.0) == seminorm_w1s(x, 3.0));
  CHECK_THROWS_AS(seminorm_w1s(x, 1.0), std::invalid_argument);

  // hat function on two elements: gradient +-2, each on length 1/2
  auto m2 = build_interval_mesh(2);
  FeFunction hat{m2, Eigen::Vector3d(0.0, 1.0, 0.0)};
  CHECK(seminorm_w1s(hat, 2.0) == doctest::Approx(2.0).epsilon(1e-14));

  auto sq = build_square_mesh(4);
  CHECK(seminorm_w1s(interpolate_x(sq), 2.0) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("seminorm power against an independent per-element sum") {
  auto mesh = build_interval_mesh(5);
  const Eigen::VectorXd v = random_coeffs(mesh, 42);
  const double s = 3.0;
  double expect = 0.0;
  for (int e = 0; e < 5; ++e) {
    const double slope = (v[e + 1] - v[e]) / 0.2;
    expect += std::pow(std::abs(slope), s) * 0.2;
  }
  CHECK(seminorm_w1s_pow(v, *mesh, s) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("L2 norm") {
  auto mesh = build_interval_mesh(16);
  const FeFunction one{mesh, Eigen::VectorXd::Ones(mesh->n_vertices())};
  CHECK(norm_l2(one) == doctest::Approx(1.0).epsilon(1e-13));
  // P1 interpolant of x is x itself, so the norm is exactly sqrt(1/3)
  CHECK(norm_l2(interpolate_x(mesh)) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("eps-q norm") {
  auto mesh = build_interval_mesh(8);
  const FeFunction one{mesh, Eigen::VectorXd::Ones(mesh->n_vertices())};
  CHECK(norm_eps_q(one, 2.0, 0.04, 2.0) == doctest::Approx(0.2).epsilon(1e-13));
  const FeFunction x = interpolate_x(mesh);
  CHECK(norm_eps_q(x, 2.0, 1.0, 2.0) ==
        doctest::Approx(std::sqrt(1.0 + 1.0 / 3.0)).epsilon(1e-12));

  // norm axioms on random samples
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const FeFunction a{mesh, random_coeffs(mesh, rng())};
    const FeFunction b{mesh, random_coeffs(mesh, rng())};
    const FeFunction ab{mesh, a.coeffs + b.coeffs};
    CHECK(norm_eps_q(ab, 2.0, 0.5, 2.0) <=
          norm_eps_q(a, 2.0, 0.5, 2.0) + norm_eps_q(b, 2.0, 0.5, 2.0) + 1e-12);
    const FeFunction scaled{mesh, 3.25 * a.coeffs};
    CHECK(norm_eps_q(scaled, 2.0, 0.5, 2.0) ==
          doctest::Approx(3.25 * norm_eps_q(a, 2.0, 0.5, 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("compatibilization against constants") {
  auto mesh = build_square_mesh(4);
  DualVector raw{mesh, random_coeffs(mesh, 3)};
  const DualVector fixed = make_compatible(raw);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh->n_vertices());
  CHECK(std::abs(fixed.values.dot(ones)) <= 1e-13 * raw.values.norm());

  DualVector load{mesh, load_of_one(*mesh)};
  CHECK(make_compatible(load).values.norm() <= 1e-14);
}

TEST_CASE("coarsening and vertex correspondence") {
  auto fine = build_interval_mesh(8);
  auto coarse = coarsen(fine, 4);
  CHECK(coarse->resolution == 2);
  CHECK(fine->parent == coarse);
  CHECK(coarse_to_fine_vertex(*coarse, *fine, 1) == 4);
  CHECK_THROWS_AS(coarsen(fine, 3), std::invalid_argument);

  auto f2 = build_square_mesh(4);
  auto c2 = coarsen(f2, 2);
  // coarse vertex (1,1) sits at fine (2,2)
  CHECK(coarse_to_fine_vertex(*c2, *f2, 1 * 3 + 1) == 2 * 5 + 2);
}

TEST_CASE("element gradients are the P1 slopes") {
  auto mesh = build_square_mesh(2);
  const FeFunction x = interpolate_x(mesh);
  for (int e = 0; e < mesh->n_elements(); ++e) {
    const Eigen::Vector2d g = element_gradient(*mesh, x.coeffs, e);
    CHECK(g.x() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(g.y()) < 1e-13);
  }
}

TEST_CASE("mesh JSON round trip fields") {
  auto mesh = build_interval_mesh(2);
  const auto j = mesh_to_json(*mesh);
  CHECK(j.at("dim") == 1);
  CHECK(j.at("vertices").size() == 3);
  CHECK(j.at("elements").size() == 2);
}
