#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include <Eigen/Eigenvalues>

#include "cpmetric/encoders.hpp"
#include "cpmetric/error.hpp"
#include "../support/nets.hpp"

using namespace cpmetric;

namespace {

std::vector<double> flat(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

std::vector<CPNet> all_nets(int n) {
  std::vector<CPNet> out;
  enumerate_cpnets(n, [&](const CPNet& net) { out.push_back(net); });
  return out;
}

}  // namespace

TEST_CASE("adjacency") {
  const auto adj = adjacency_matrix(testnets::example());
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(4, 4);
  want(0, 2) = want(1, 2) = want(2, 3) = 1.0;
  CHECK(adj == want);
  using testnets::var;
  const CPNet chain({var("X", "x"), var("Y", "y"), var("Z", "z")}, {{0, {}, {0}}, {1, {0}, {0, 1}}, {2, {1}, {1, 0}}});
  Eigen::MatrixXd chain_want = Eigen::MatrixXd::Zero(3, 3);
  chain_want(0, 1) = chain_want(1, 2) = 1.0;
  CHECK(adjacency_matrix(chain) == chain_want);
}

TEST_CASE("normalized laplacian examples") {
  using testnets::var;
  const CPNet edgeless({var("X", "x"), var("Y", "y"), var("Z", "z")}, {{0, {}, {0}}, {1, {}, {0}}, {2, {}, {1}}});
  CHECK(normalized_laplacian(edgeless) == Eigen::MatrixXd::Zero(3, 3));
  const CPNet edge({var("X", "x"), var("Y", "y")}, {{0, {}, {0}}, {1, {0}, {0, 1}}});
  Eigen::MatrixXd want(2, 2);
  want << 1, -1, -1, 1;
  CHECK((normalized_laplacian(edge) - want).cwiseAbs().maxCoeff() < 1e-15);
  const auto ex = normalized_laplacian(testnets::example());
  CHECK(ex(0, 2) == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(ex(2, 2) == 1.0);
}

TEST_CASE("laplacian is symmetric with spectrum in [0,2]") {
  for (int n = 1; n <= 7; ++n)
    for (const auto& net : testnets::random_nets(n, 10, 60 + n)) {
      const auto L = normalized_laplacian(net);
      CHECK(L == L.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
      CHECK(eig.eigenvalues().maxCoeff() <= 2.0 + 1e-12);
      for (Eigen::Index i = 0; i < L.rows(); ++i) {
        CHECK((L(i, i) == 0.0 || L(i, i) == 1.0));
        for (Eigen::Index j = 0; j < L.cols(); ++j)
          if (i != j) CHECK(L(i, j) <= 0.0);
      }
    }
}

TEST_CASE("cpt matrix rows of the example net") {
  const auto cpt = cpt_matrix(testnets::example());
  REQUIRE(cpt.rows() == 4);
  REQUIRE(cpt.cols() == 8);
  for (int col = 0; col < 8; ++col) {
    CHECK(cpt(0, col) == 0.0);
    // D's columns run over A, B, C with C least significant
    CHECK(cpt(3, col) == static_cast<double>(col & 1));
  }
  CHECK(cpt_matrix(testnets::single(false)) == Eigen::MatrixXd::Zero(1, 1));
  CHECK(cpt_matrix(testnets::example(), CptRowOrder::topological) == cpt);
}

TEST_CASE("cpt rows only depend on parent columns") {
  for (const auto& net : testnets::random_nets(5, 10, 5)) {
    const auto cpt = cpt_matrix(net);
    for (int v = 0; v < 5; ++v) {
      std::vector<int> others;
      for (int i = 0; i < 5; ++i)
        if (i != v) others.push_back(i);
      for (int col = 0; col < 16; ++col) {
        std::vector<std::uint8_t> values(5, 0);
        for (std::size_t k = 0; k < 4; ++k) values[others[k]] = (col >> (3 - k)) & 1;
        CHECK(cpt(v, col) == net.preferred_value(v, Outcome(values)));
      }
    }
  }
}

TEST_CASE("encodings identify every n=3 net") {
  const auto nets = all_nets(3);
  std::set<std::vector<double>> with_adjacency, default_encoding, topological;
  for (const auto& net : nets) {
    auto a = flat(adjacency_matrix(net));
    auto c = flat(cpt_matrix(net));
    a.insert(a.end(), c.begin(), c.end());
    with_adjacency.insert(a);
    const auto e = encode_net(net);
    auto d = e.laplacian;
    d.insert(d.end(), e.cpt.begin(), e.cpt.end());
    default_encoding.insert(d);
    auto t = e.laplacian;
    const auto tc = flat(cpt_matrix(net, CptRowOrder::topological));
    t.insert(t.end(), tc.begin(), tc.end());
    topological.insert(t);
  }
  CHECK(with_adjacency.size() == 488);
  CHECK(default_encoding.size() == 488);
  // rows in topological order lose which variable a row describes
  CHECK(topological.size() < 488);
}

TEST_CASE("bin labels") {
  CHECK(bin_label(0.25, 10) == 2);
  CHECK(bin_label(0.0, 10) == 0);
  CHECK(bin_label(1.0, 10) == 9);
  CHECK(bin_label(0.999, 20) == 19);
  CHECK_THROWS_AS(bin_label(1.01, 10), ValidationError);
  CHECK_THROWS_AS(bin_label(-0.1, 10), ValidationError);
}

TEST_CASE("encode pair") {
  const auto nets = testnets::random_nets(4, 2, 3);
  const auto ab = encode_pair(nets[0], nets[1], 0.25, 10);
  const auto ba = encode_pair(nets[1], nets[0], 0.25, 10);
  CHECK(ab.bin == 2);
  CHECK(ab.a.laplacian.size() == 16);
  CHECK(ab.a.cpt.size() == 32);
  CHECK(ab.a == ba.b);
  CHECK(ab.b == ba.a);
  const auto same = encode_pair(testnets::example(), testnets::example(), 0.0, 10);
  CHECK(same.a == same.b);
  CHECK(same.bin == 0);
  CHECK_THROWS_AS(encode_pair(nets[0], nets[1], 1.5, 10), ValidationError);
}

TEST_CASE("record files") {
  const auto dir = std::filesystem::temp_directory_path() / "cpmetric_records_test";
  std::filesystem::create_directories(dir);
  const auto nets = testnets::random_nets(3, 3, 8);
  const auto e0 = encode_net(nets[0]), e1 = encode_net(nets[1]), e2 = encode_net(nets[2]);
  {
    RecordWriter w(dir / "r.bin", 3, 10);
    w.append(e0, e1, 0.25);
    w.append(e1, e2, 0.5);
    w.close();
  }
  const auto header = read_record_header(dir / "r.bin");
  CHECK(header.n == 3);
  CHECK(header.m == 10);
  CHECK(header.records == 2);
  CHECK(header.encoding == kEncodingVersion);
  CHECK(header.floats_per_record() == 2 * (9 + 12) + 1);
  CHECK(std::filesystem::file_size(dir / "r.bin") == 2 * header.floats_per_record() * 4);
  CHECK(read_record_labels(dir / "r.bin") == std::vector<float>{0.25f, 0.5f});
  const auto rec = read_record(dir / "r.bin", 1);
  REQUIRE(rec.size() == header.floats_per_record());
  CHECK(rec[0] == static_cast<float>(e1.laplacian[0]));
  CHECK(rec[9] == static_cast<float>(e1.cpt[0]));
  CHECK(rec[21] == static_cast<float>(e2.laplacian[0]));
  CHECK(rec.back() == 0.5f);
  std::filesystem::remove_all(dir);
}
