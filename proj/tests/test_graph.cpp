#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "helpers.hpp"
#include "promptbias/error.hpp"
#include "promptbias/features.hpp"
#include "promptbias/graph.hpp"
#include "promptbias/random.hpp"

using namespace promptbias;
using testing::doc;

namespace {

// Enumerates every window as an explicit word set.
PairScores pmi_oracle(const std::vector<Document>& docs, const Vocabulary& vocab, std::size_t window) {
  std::vector<std::set<std::size_t>> windows;
  for (const auto& d : docs) {
    std::vector<std::size_t> ids;
    for (const auto& t : d.tokens) {
      if (auto i = vocab.find(t)) ids.push_back(*i);
    }
    if (ids.empty()) continue;
    if (ids.size() <= window) {
      windows.emplace_back(ids.begin(), ids.end());
      continue;
    }
    for (std::size_t s = 0; s + window <= ids.size(); ++s) {
      windows.emplace_back(ids.begin() + s, ids.begin() + s + window);
    }
  }
  const double total = static_cast<double>(windows.size());
  PairScores out;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    for (std::size_t j = i + 1; j < vocab.size(); ++j) {
      double ni = 0, nj = 0, nij = 0;
      for (const auto& w : windows) {
        const bool a = w.count(i) != 0, b = w.count(j) != 0;
        ni += a;
        nj += b;
        nij += a && b;
      }
      if (nij == 0) continue;
      const double pmi = std::log((nij / total) / ((ni / total) * (nj / total)));
      if (pmi > 0) out.push_back({i, j, pmi});
    }
  }
  return out;
}

Eigen::VectorXd pagerank_oracle(std::size_t n, const PairScores& edges, double damping) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : edges) {
    w(e.i, e.j) += e.score;
    w(e.j, e.i) += e.score;
  }
  Eigen::MatrixXd m(n, n);  // column-stochastic
  for (std::size_t c = 0; c < n; ++c) {
    const double out = w.row(c).sum();
    for (std::size_t r = 0; r < n; ++r) m(r, c) = out > 0 ? w(c, r) / out : 1.0 / n;
  }
  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd next = Eigen::VectorXd::Constant(n, (1 - damping) / n) + damping * m * r;
    const double delta = (next - r).lpNorm<1>();
    r = next;
    if (delta < 1e-15) break;
  }
  return r;
}

Vocabulary vocab_of(const std::vector<Document>& docs) { return build_vocabulary(docs); }

double max_asym(const SparseMatrix& a) {
  const Eigen::MatrixXd d = a;
  return (d - d.transpose()).cwiseAbs().maxCoeff();
}

std::vector<Document> random_docs(std::uint64_t seed, std::size_t n_docs, std::size_t max_len, std::size_t vocab) {
  Rng rng(seed);
  std::vector<Document> docs;
  for (std::size_t d = 0; d < n_docs; ++d) {
    Document doc;
    doc.interview_id = std::to_string(d);
    const auto len = static_cast<std::size_t>(rng.between(1, static_cast<long>(max_len)));
    for (std::size_t t = 0; t < len; ++t) doc.tokens.push_back("t" + std::to_string(rng.index(vocab)));
    docs.push_back(doc);
  }
  return docs;
}

}  // namespace

TEST_CASE("pmi boundary examples") {
  const std::vector<Document> one{doc("1", {"a", "b"})};
  CHECK(pmi_scores(one, vocab_of(one), 2).empty());

  const std::vector<Document> two{doc("1", {"a", "b"}), doc("2", {"a", "c"})};
  CHECK(pmi_scores(two, vocab_of(two), 2).empty());
  CHECK_THROWS_AS(pmi_scores(two, vocab_of(two), 1), UsageError);
}

TEST_CASE("pmi positive pair on a constructed corpus") {
  // x and y always together; filler words pad the remaining windows
  std::vector<std::string> tokens;
  for (int i = 0; i < 5; ++i) {
    for (const char* w : {"x", "y", "f1", "f2"}) tokens.push_back(w);
  }
  REQUIRE(tokens.size() == 20);
  const std::vector<Document> docs{doc("1", tokens)};
  const auto v = vocab_of(docs);
  const auto got = pmi_scores(docs, v, 2);
  const auto want = pmi_oracle(docs, v, 2);
  CHECK(got == want);
  const auto x = *v.find("x"), y = *v.find("y");
  bool found = false;
  for (const auto& e : got) {
    if (e.i == std::min(x, y) && e.j == std::max(x, y)) {
      found = true;
      CHECK(e.score > 0.0);
    }
  }
  CHECK(found);
}

TEST_CASE("pmi equals brute-force window enumeration") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto docs = random_docs(seed, 5, 40, 12);
    const auto v = vocab_of(docs);
    for (std::size_t window : {2u, 3u, 5u, 10u, 50u}) CHECK(pmi_scores(docs, v, window) == pmi_oracle(docs, v, window));
  }
}

TEST_CASE("pmi drops out-of-vocabulary tokens before windowing") {
  const std::vector<Document> docs{doc("1", {"a", "gap", "b", "c", "a", "b"})};
  const auto full = vocab_of(docs);
  const std::vector<std::size_t> keep{*full.find("a"), *full.find("b"), *full.find("c")};
  const auto v = full.restrict_to(keep);
  CHECK(pmi_scores(docs, v, 2) == pmi_oracle(docs, v, 2));
}

TEST_CASE("pagerank examples") {
  const PairScores tri{{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}};
  const auto r = pagerank(3, tri);
  CHECK(r.converged);
  for (int i = 0; i < 3; ++i) CHECK(r.scores[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  const auto iso = pagerank(1, {});
  CHECK(iso.scores[0] == doctest::Approx(1.0));

  const PairScores asym{{0, 1, 3.0}, {1, 2, 0.5}};
  const auto a = pagerank(3, asym);
  const auto o = pagerank_oracle(3, asym, 0.85);
  CHECK((a.scores - o).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pagerank matches dense oracle, sums to one, is equivariant") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 8;
    PairScores edges;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.bernoulli(0.3)) edges.push_back({i, j, rng.uniform(0.1, 3.0)});
      }
    }
    const auto r = pagerank(n, edges);
    CHECK((r.scores - pagerank_oracle(n, edges, 0.85)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(r.scores.sum() - 1.0) < 1e-9);

    std::vector<std::size_t> perm{3, 7, 0, 5, 1, 6, 2, 4};
    PairScores relabeled;
    for (const auto& e : edges) {
      const auto a = perm[e.i], b = perm[e.j];
      relabeled.push_back({std::min(a, b), std::max(a, b), e.score});
    }
    const auto p = pagerank(n, relabeled);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p.scores[perm[i]] - r.scores[i]) < 1e-9);
  }
}

TEST_CASE("pagerank flags non-convergence") {
  const PairScores tri{{0, 1, 1.0}, {1, 2, 5.0}};
  const auto r = pagerank(3, tri, 0.85, 1e-30, 2);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
}

TEST_CASE("normalize_adjacency examples") {
  auto sparse = [](const Eigen::MatrixXd& d) { return SparseMat<double>(d.sparseView()); };
  const auto id = normalize_adjacency<double>(sparse(Eigen::MatrixXd::Identity(3, 3)));
  CHECK(Eigen::MatrixXd(id.first) == Eigen::MatrixXd::Identity(3, 3));

  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  const auto unit = normalize_adjacency<double>(sparse(a));
  CHECK(Eigen::MatrixXd(unit.first) == a);
  CHECK(unit.second == Eigen::Vector2d(1, 1));

  Eigen::MatrixXd b(2, 2);
  b << 0, 2, 2, 0;
  const auto two = normalize_adjacency<double>(sparse(b));
  CHECK(Eigen::MatrixXd(two.first) == a);
  CHECK(two.second == Eigen::Vector2d(2, 2));

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);
  z(0, 0) = 1;
  CHECK_THROWS_AS(normalize_adjacency<double>(sparse(z)), NumericError);

  Eigen::MatrixXf f(2, 2);
  f << 0, 2, 2, 0;
  const SparseMat<float> fs = f.sparseView();
  CHECK(Eigen::MatrixXf(normalize_adjacency<float>(fs).first)(0, 1) == 1.0f);
}

TEST_CASE("normalize_adjacency is D^-1/2 A D^-1/2 elementwise") {
  Eigen::MatrixXd a(4, 4);
  a << 1, 2, 0, 0.5,
       2, 0, 3, 0,
       0, 3, 0.2, 1,
       0.5, 0, 1, 4;
  const auto [n, deg] = normalize_adjacency<double>(SparseMat<double>(a.sparseView()));
  const Eigen::MatrixXd got = n;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double want = a(i, j) / std::sqrt(a.row(i).sum() * a.row(j).sum());
      CHECK(got(i, j) == doctest::Approx(want).epsilon(1e-14));
    }
  }
  CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("assemble_adjacency with only tf-idf edges") {
  const std::vector<Document> docs{doc("d1", {"a", "b"}), doc("d2", {"c"})};
  const auto full = vocab_of(docs);
  const std::vector<std::size_t> keep{0, 1};
  const auto v = full.restrict_to(keep);  // a, b with N = 2
  const auto g = build_text_graph(std::span(docs).first(1), v, {.window = 2});
  // one window containing both: pmi = 0, so no word-word edge
  const Eigen::MatrixXd a = g.adjacency;
  REQUIRE(a.rows() == 3);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(0, 0) > 0.0);
  CHECK(a(2, 0) == a(0, 2));
  CHECK(a(2, 2) == 0.0);
}

TEST_CASE("assemble_adjacency matches a hand-built 5x5 oracle") {
  const PairScores pmi{{0, 2, 0.7}};
  Eigen::VectorXd pr(3);
  pr << 0.5, 0.2, 0.3;
  Eigen::MatrixXd tf(2, 3);
  tf << 1.5, 0, 0.4,
        0,   2, 0;
  const auto g = assemble_adjacency(pmi, pr, tf.sparseView(), {"a", "b", "c"}, {"d1", "d2"});
  Eigen::MatrixXd want(5, 5);
  want << 0.5, 0,   0.7, 1.5, 0,
          0,   0.2, 0,   0,   2,
          0.7, 0,   0.3, 0.4, 0,
          1.5, 0,   0.4, 0,   0,
          0,   2,   0,   0,   0;
  CHECK(Eigen::MatrixXd(g.adjacency) == want);
  CHECK(max_asym(g.adjacency) == 0.0);

  CHECK_THROWS_AS(assemble_adjacency(pmi, pr.head(2), tf.sparseView(), {"a", "b"}, {"d1", "d2"}), DataError);
}

TEST_CASE("empty document keeps only its self-loop") {
  const std::vector<Document> docs{doc("d1", {"a", "b"}), doc("d2", {})};
  const auto g = build_text_graph(docs, vocab_of(docs));
  const Eigen::MatrixXd a = g.adjacency;
  const auto row = 3;
  CHECK(a(row, row) == 1e-6);
  CHECK(a.row(row).sum() == 1e-6);
  CHECK(g.normalized.coeff(row, row) == doctest::Approx(1.0));
}

TEST_CASE("extend_for_inference") {
  const std::vector<Document> docs{doc("d1", {"a", "b", "b"}), doc("d2", {"c", "a"}), doc("d3", {"c"})};
  const auto v = vocab_of(docs);
  const auto g = build_text_graph(docs, v);

  const std::vector<Document> eval{doc("e1", {"a", "b", "b"}), doc("e2", {"zzz"}), doc("e3", {"b"})};
  const auto ext = extend_for_inference(g, eval, v);
  const Eigen::MatrixXd a = ext.adjacency;
  const Eigen::MatrixXd base = g.adjacency;
  const auto n = static_cast<Eigen::Index>(g.n());
  CHECK(a.topLeftCorner(n, n) == base);
  CHECK(max_asym(ext.adjacency) == 0.0);

  // duplicate of d1: same word-edge row
  CHECK(a.row(n).head(3) == base.row(3).head(3));
  // all OOV: self-loop only
  CHECK(a.row(n + 1).sum() == 1e-6);
  CHECK(a(n + 1, n + 1) == 1e-6);
  // single word
  const Eigen::MatrixXd e3 = tfidf_matrix(std::span(eval).subspan(2, 1), v);
  CHECK(a(n + 2, *v.find("b")) == e3(0, *v.find("b")));
  CHECK(a(n + 2, *v.find("b")) == doctest::Approx(std::log(3.0)));
  // eval rows touch only word columns (plus the epsilon loop)
  CHECK(a.block(n, 3, 3, a.cols() - 3).cwiseAbs().sum() == 1e-6);
}

TEST_CASE("graph export round-trip and fingerprint") {
  const std::vector<Document> docs{doc("d1", {"a", "b", "c", "a"}), doc("d2", {"c", "a", "b"}), doc("d3", {})};
  const auto g = build_text_graph(docs, vocab_of(docs), {.window = 2});
  const auto back = parse_triplets(format_triplets(g.adjacency), static_cast<Eigen::Index>(g.n()));
  CHECK(Eigen::MatrixXd(back) == Eigen::MatrixXd(g.adjacency));

  const auto dir = std::filesystem::temp_directory_path() / "promptbias_test_graph";
  std::filesystem::remove_all(dir);
  write_graph(g, dir);
  const auto r = read_graph(dir);
  CHECK(r.words == g.words);
  CHECK(r.doc_ids == g.doc_ids);
  CHECK(Eigen::MatrixXd(r.adjacency) == Eigen::MatrixXd(g.adjacency));
  CHECK(graph_fingerprint(r) == graph_fingerprint(g));
  std::filesystem::remove_all(dir);

  CHECK(fnv1a("") == 14695981039346656037ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("every edge endpoint is a live node after selection") {
  const auto docs = random_docs(3, 6, 30, 20);
  const auto full = vocab_of(docs);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < full.size(); i += 2) keep.push_back(i);
  const auto v = full.restrict_to(keep);
  const auto g = build_text_graph(docs, v);
  CHECK(g.adjacency.rows() == static_cast<Eigen::Index>(v.size() + docs.size()));
  for (const auto& e : pmi_scores(docs, v, 10)) CHECK(e.j < v.size());
}
