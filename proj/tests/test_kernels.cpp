#include <doctest.h>

#include <cmath>
#include <random>

#include "gdiff/kernels.hpp"

using namespace gdiff::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

struct Graph {
  int nodes = 0;
  std::vector<int> src, dst;
  Csr by_src, by_dst;
};

Csr group(int nodes, const std::vector<int>& key) {
  Csr c;
  c.offsets.assign(nodes + 1, 0);
  for (int v : key) ++c.offsets[v + 1];
  for (int i = 0; i < nodes; ++i) c.offsets[i + 1] += c.offsets[i];
  c.items.resize(key.size());
  std::vector<int> fill(c.offsets.begin(), c.offsets.end() - 1);
  for (std::size_t k = 0; k < key.size(); ++k) c.items[fill[key[k]]++] = static_cast<int>(k);
  return c;
}

Graph random_graph(int nodes, int edges, std::mt19937_64& rng) {
  Graph g;
  g.nodes = nodes;
  std::vector<std::pair<int, int>> pairs;
  for (int e = 0; e < edges; ++e) {
    const int u = static_cast<int>(rng() % nodes);
    int v = static_cast<int>(rng() % nodes);
    if (v == u) v = (v + 1) % nodes;
    pairs.emplace_back(u, v);
  }
  std::sort(pairs.begin(), pairs.end());
  for (auto [u, v] : pairs) {
    g.src.push_back(u);
    g.dst.push_back(v);
  }
  g.by_src = group(nodes, g.src);
  g.by_dst = group(nodes, g.dst);
  return g;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("serial kernels agree with textbook loops") {
    std::mt19937_64 rng(1);
    const int rows = 7, in = 5, out = 3;
    const auto x = random_vec(rows * in, rng);
    const auto w = random_vec(out * in, rng);
    const auto b = random_vec(out, rng);
    std::vector<double> y(rows * out);
    serial::linear_forward(x, w, b, y, rows, in, out);
    for (int r = 0; r < rows; ++r)
      for (int o = 0; o < out; ++o) {
        double acc = b[o];
        for (int i = 0; i < in; ++i) acc += x[r * in + i] * w[o * in + i];
        CHECK(y[r * out + o] == doctest::Approx(acc).epsilon(1e-13));
      }
    serial::linear_forward(x, w, {}, y, rows, in, out);
    CHECK(y[0] == doctest::Approx(x[0] * w[0] + x[1] * w[1] + x[2] * w[2] + x[3] * w[3] + x[4] * w[4]));

    const auto dy = random_vec(rows * out, rng);
    std::vector<double> dx(rows * in, 1.0);
    serial::linear_backward_input(dy, w, dx, rows, in, out, true);
    for (int r = 0; r < rows; ++r)
      for (int i = 0; i < in; ++i) {
        double acc = 1.0;
        for (int o = 0; o < out; ++o) acc += dy[r * out + o] * w[o * in + i];
        CHECK(dx[r * in + i] == doctest::Approx(acc).epsilon(1e-13));
      }
    std::vector<double> dw(out * in, 0.0), db(out, 0.0);
    serial::linear_backward_params(dy, x, dw, db, rows, in, out);
    for (int o = 0; o < out; ++o) {
      double bsum = 0.0;
      for (int r = 0; r < rows; ++r) bsum += dy[r * out + o];
      CHECK(db[o] == doctest::Approx(bsum).epsilon(1e-13));
      for (int i = 0; i < in; ++i) {
        double acc = 0.0;
        for (int r = 0; r < rows; ++r) acc += dy[r * out + o] * x[r * in + i];
        CHECK(dw[o * in + i] == doctest::Approx(acc).epsilon(1e-13));
      }
    }

    std::vector<double> mean(in), var(in);
    serial::column_moments(x, mean, var, rows, in);
    for (int c = 0; c < in; ++c) {
      double m = 0.0, v = 0.0;
      for (int r = 0; r < rows; ++r) m += x[r * in + c];
      m /= rows;
      for (int r = 0; r < rows; ++r) v += (x[r * in + c] - m) * (x[r * in + c] - m);
      CHECK(mean[c] == doctest::Approx(m).epsilon(1e-13));
      CHECK(var[c] == doctest::Approx(v / rows).epsilon(1e-12));
    }
  }

  TEST_CASE("serial graph kernels agree with edge loops") {
    std::mt19937_64 rng(2);
    const int cols = 4;
    const Graph g = random_graph(9, 30, rng);
    const int m = static_cast<int>(g.src.size());
    const auto pe = random_vec(m * cols, rng);
    const auto qh = random_vec(g.nodes * cols, rng);
    const auto rh = random_vec(g.nodes * cols, rng);
    std::vector<double> out(m * cols);
    serial::edge_gather(pe, qh, rh, g.src, g.dst, out, cols);
    for (int k = 0; k < m; ++k)
      for (int c = 0; c < cols; ++c)
        CHECK(out[k * cols + c] == doctest::Approx(pe[k * cols + c] + qh[g.src[k] * cols + c] + rh[g.dst[k] * cols + c]));

    const auto gate = random_vec(m * cols, rng);
    const auto vh = random_vec(g.nodes * cols, rng);
    std::vector<double> agg(g.nodes * cols);
    serial::gated_aggregate(gate, vh, g.by_src, g.dst, agg, cols);
    std::vector<double> expect(g.nodes * cols, 0.0);
    for (int k = 0; k < m; ++k)
      for (int c = 0; c < cols; ++c) expect[g.src[k] * cols + c] += gate[k * cols + c] * vh[g.dst[k] * cols + c];
    for (std::size_t i = 0; i < agg.size(); ++i) CHECK(agg[i] == doctest::Approx(expect[i]).epsilon(1e-13));

    const auto dagg = random_vec(g.nodes * cols, rng);
    std::vector<double> dgate(m * cols), dvh(g.nodes * cols);
    serial::gated_aggregate_backward(dagg, gate, vh, g.src, g.dst, g.by_dst, dgate, dvh, cols);
    std::vector<double> expect_dvh(g.nodes * cols, 0.0);
    for (int k = 0; k < m; ++k)
      for (int c = 0; c < cols; ++c) {
        CHECK(dgate[k * cols + c] == doctest::Approx(dagg[g.src[k] * cols + c] * vh[g.dst[k] * cols + c]));
        expect_dvh[g.dst[k] * cols + c] += dagg[g.src[k] * cols + c] * gate[k * cols + c];
      }
    for (std::size_t i = 0; i < dvh.size(); ++i) CHECK(dvh[i] == doctest::Approx(expect_dvh[i]).epsilon(1e-13));

    std::vector<double> sums(g.nodes * cols, 0.5);
    serial::segment_sum(pe, g.by_src, sums, cols);
    std::vector<double> expect_sums(g.nodes * cols, 0.5);
    for (int k = 0; k < m; ++k)
      for (int c = 0; c < cols; ++c) expect_sums[g.src[k] * cols + c] += pe[k * cols + c];
    for (std::size_t i = 0; i < sums.size(); ++i) CHECK(sums[i] == doctest::Approx(expect_sums[i]).epsilon(1e-13));
  }

  TEST_CASE("OpenMP kernels match the serial reference bit for bit") {
    std::mt19937_64 rng(3);
    // Large enough that every kernel crosses the fork threshold.
    const int rows = 600, in = 64, out = 48, cols = 32;
    const Graph g = random_graph(500, 6000, rng);
    const int m = static_cast<int>(g.src.size());
    const auto x = random_vec(rows * in, rng);
    const auto w = random_vec(out * in, rng);
    const auto b = random_vec(out, rng);
    const auto dy = random_vec(rows * out, rng);
    const auto pe = random_vec(m * cols, rng);
    const auto qh = random_vec(g.nodes * cols, rng);
    const auto rh = random_vec(g.nodes * cols, rng);
    const auto gate = random_vec(m * cols, rng);
    const auto dagg = random_vec(g.nodes * cols, rng);

    for (int threads : {1, 2, 3, 4}) {
      set_num_threads(threads);
      CAPTURE(threads);
      std::vector<double> ys(rows * out), yo(rows * out);
      serial::linear_forward(x, w, b, ys, rows, in, out);
      omp::linear_forward(x, w, b, yo, rows, in, out);
      CHECK(ys == yo);

      std::vector<double> dxs(rows * in, 0.25), dxo(rows * in, 0.25);
      serial::linear_backward_input(dy, w, dxs, rows, in, out, true);
      omp::linear_backward_input(dy, w, dxo, rows, in, out, true);
      CHECK(dxs == dxo);
      serial::linear_backward_input(dy, w, dxs, rows, in, out, false);
      omp::linear_backward_input(dy, w, dxo, rows, in, out, false);
      CHECK(dxs == dxo);

      std::vector<double> dws(out * in, 0.0), dbs(out, 0.0), dwo(out * in, 0.0), dbo(out, 0.0);
      serial::linear_backward_params(dy, x, dws, dbs, rows, in, out);
      omp::linear_backward_params(dy, x, dwo, dbo, rows, in, out);
      CHECK(dws == dwo);
      CHECK(dbs == dbo);

      std::vector<double> ms(in), vs(in), mo(in), vo(in);
      serial::column_moments(x, ms, vs, rows, in);
      omp::column_moments(x, mo, vo, rows, in);
      CHECK(ms == mo);
      CHECK(vs == vo);

      std::vector<double> es(m * cols), eo(m * cols);
      serial::edge_gather(pe, qh, rh, g.src, g.dst, es, cols);
      omp::edge_gather(pe, qh, rh, g.src, g.dst, eo, cols);
      CHECK(es == eo);

      std::vector<double> as(g.nodes * cols), ao(g.nodes * cols);
      serial::gated_aggregate(gate, qh, g.by_src, g.dst, as, cols);
      omp::gated_aggregate(gate, qh, g.by_src, g.dst, ao, cols);
      CHECK(as == ao);

      std::vector<double> dgs(m * cols), dvs(g.nodes * cols), dgo(m * cols), dvo(g.nodes * cols);
      serial::gated_aggregate_backward(dagg, gate, qh, g.src, g.dst, g.by_dst, dgs, dvs, cols);
      omp::gated_aggregate_backward(dagg, gate, qh, g.src, g.dst, g.by_dst, dgo, dvo, cols);
      CHECK(dgs == dgo);
      CHECK(dvs == dvo);

      std::vector<double> ss(g.nodes * cols, 1.0), so(g.nodes * cols, 1.0);
      serial::segment_sum(pe, g.by_src, ss, cols);
      omp::segment_sum(pe, g.by_src, so, cols);
      CHECK(ss == so);
    }
    set_num_threads(max_threads());
  }

  TEST_CASE("kernel sets dispatch to the chosen backend") {
    CHECK(kernel_set(Backend::Serial).linear_forward == &serial::linear_forward);
    CHECK(kernel_set(Backend::Omp).linear_forward == &omp::linear_forward);
  }
}
