#include "promptbias/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <unordered_map>

#include "promptbias/corpus.hpp"

namespace promptbias {

PairScores pmi_scores(std::span<const Document> docs, const Vocabulary& vocab, std::size_t window) {
  if (window < 2) throw UsageError("pmi_scores: window must be >= 2");
  const std::uint64_t v = vocab.size();
  std::vector<double> word_windows(vocab.size(), 0.0);
  std::unordered_map<std::uint64_t, double> pair_windows;
  double total_windows = 0.0;

  std::vector<std::size_t> ids;
  std::vector<std::size_t> distinct;
  for (const auto& doc : docs) {
    ids.clear();
    for (const auto& token : doc.tokens) {
      if (const auto idx = vocab.find(token)) ids.push_back(*idx);
    }
    if (ids.empty()) continue;
    const std::size_t n_windows = ids.size() <= window ? 1 : ids.size() - window + 1;
    const std::size_t width = std::min(window, ids.size());
    for (std::size_t start = 0; start < n_windows; ++start) {
      distinct.assign(ids.begin() + static_cast<std::ptrdiff_t>(start),
                      ids.begin() + static_cast<std::ptrdiff_t>(start + width));
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      total_windows += 1.0;
      for (std::size_t a = 0; a < distinct.size(); ++a) {
        word_windows[distinct[a]] += 1.0;
        for (std::size_t b = a + 1; b < distinct.size(); ++b) {
          pair_windows[distinct[a] * v + distinct[b]] += 1.0;
        }
      }
    }
  }

  PairScores out;
  for (const auto& [key, joint] : pair_windows) {
    const std::size_t i = key / v;
    const std::size_t j = key % v;
    const double pmi = std::log((joint / total_windows) /
                                ((word_windows[i] / total_windows) * (word_windows[j] / total_windows)));
    if (pmi > 0.0) out.push_back({i, j, pmi});
  }
  std::sort(out.begin(), out.end(), [](const WordPair& a, const WordPair& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return out;
}

PageRankResult pagerank(std::size_t n, const PairScores& edges, double damping, double tol,
                        int max_iter) {
  if (!(damping > 0.0 && damping < 1.0)) throw UsageError("pagerank: damping must lie in (0,1)");
  PageRankResult result;
  if (n == 0) {
    result.converged = true;
    return result;
  }
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::VectorXd out_degree = Eigen::VectorXd::Zero(nn);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    if (e.i >= n || e.j >= n) throw UsageError("pagerank: edge endpoint out of range");
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    triplets.emplace_back(i, j, e.score);
    triplets.emplace_back(j, i, e.score);
    out_degree[i] += e.score;
    out_degree[j] += e.score;
  }
  // transition(j, i) = w(i, j) / deg(i): row j gathers mass flowing into j.
  SparseMatrix inflow(nn, nn);
  for (auto& t : triplets) {
    t = Eigen::Triplet<double>(t.col(), t.row(), t.value() / out_degree[t.row()]);
  }
  inflow.setFromTriplets(triplets.begin(), triplets.end());

  const double uniform = 1.0 / static_cast<double>(n);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(nn, uniform);
  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    for (Eigen::Index i = 0; i < nn; ++i) {
      if (out_degree[i] == 0.0) dangling += x[i];
    }
    Eigen::VectorXd next = damping * (inflow * x);
    next.array() += damping * dangling * uniform + (1.0 - damping) * uniform;
    next /= next.sum();
    const double delta = (next - x).lpNorm<1>();
    x = std::move(next);
    result.iterations = it + 1;
    if (delta < tol) {
      result.converged = true;
      break;
    }
  }
  result.scores = std::move(x);
  return result;
}

TextGraph assemble_adjacency(const PairScores& pmi, const Eigen::VectorXd& pagerank,
                             const DocTermMatrix& tfidf, std::vector<std::string> words,
                             std::vector<std::string> doc_ids, double self_loop) {
  const std::size_t nw = words.size();
  if (static_cast<std::size_t>(pagerank.size()) != nw ||
      static_cast<std::size_t>(tfidf.cols()) != nw) {
    throw DataError("assemble_adjacency: vocabulary mismatch between pmi, pagerank and tf-idf");
  }
  if (static_cast<std::size_t>(tfidf.rows()) != doc_ids.size()) {
    throw DataError("assemble_adjacency: tf-idf rows do not match document ids");
  }
  const auto n = static_cast<Eigen::Index>(nw + doc_ids.size());

  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& e : pmi) {
    if (e.i >= nw || e.j >= nw || e.i == e.j) {
      throw DataError("assemble_adjacency: pmi pair references a word outside the vocabulary");
    }
    triplets.emplace_back(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j), e.score);
    triplets.emplace_back(static_cast<Eigen::Index>(e.j), static_cast<Eigen::Index>(e.i), e.score);
  }
  for (std::size_t w = 0; w < nw; ++w) {
    const auto i = static_cast<Eigen::Index>(w);
    triplets.emplace_back(i, i, pagerank[i]);
  }
  for (Eigen::Index d = 0; d < tfidf.outerSize(); ++d) {
    const Eigen::Index node = static_cast<Eigen::Index>(nw) + d;
    double degree = 0.0;
    for (DocTermMatrix::InnerIterator it(tfidf, d); it; ++it) {
      if (it.value() == 0.0) continue;
      triplets.emplace_back(node, it.col(), it.value());
      triplets.emplace_back(it.col(), node, it.value());
      degree += it.value();
    }
    if (degree == 0.0) triplets.emplace_back(node, node, self_loop);
  }

  TextGraph g;
  g.words = std::move(words);
  g.doc_ids = std::move(doc_ids);
  g.adjacency.resize(n, n);
  g.adjacency.setFromTriplets(triplets.begin(), triplets.end());
  std::tie(g.normalized, g.degree) = normalize_adjacency<double>(g.adjacency);
  return g;
}

TextGraph build_text_graph(std::span<const Document> train_docs, const Vocabulary& vocab,
                           const GraphParams& params) {
  const auto pmi = pmi_scores(train_docs, vocab, params.window);
  const auto pr = pagerank(vocab.size(), pmi, params.damping, params.pagerank_tol,
                           params.pagerank_max_iter);
  std::vector<std::string> ids;
  ids.reserve(train_docs.size());
  for (const auto& d : train_docs) ids.push_back(d.interview_id);
  return assemble_adjacency(pmi, pr.scores, tfidf_matrix(train_docs, vocab), vocab.words(),
                            std::move(ids), params.self_loop);
}

ExtendedGraph extend_for_inference(const TextGraph& g, std::span<const Document> eval_docs,
                                   const Vocabulary& vocab, double self_loop) {
  if (vocab.words() != g.words) {
    throw DataError("extend_for_inference: vocabulary does not match the graph's word nodes");
  }
  ExtendedGraph ext;
  ext.base_n = g.n();
  ext.n_words = g.n_words();
  for (const auto& d : eval_docs) ext.eval_ids.push_back(d.interview_id);
  ext.eval_features = tfidf_matrix(eval_docs, vocab);

  const auto n = static_cast<Eigen::Index>(ext.n());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(g.adjacency.nonZeros()) +
                   2 * static_cast<std::size_t>(ext.eval_features.nonZeros()) + eval_docs.size());
  for (Eigen::Index r = 0; r < g.adjacency.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(g.adjacency, r); it; ++it) {
      triplets.emplace_back(r, it.col(), it.value());
    }
  }
  for (Eigen::Index e = 0; e < ext.eval_features.outerSize(); ++e) {
    const Eigen::Index node = static_cast<Eigen::Index>(ext.base_n) + e;
    double degree = 0.0;
    for (DocTermMatrix::InnerIterator it(ext.eval_features, e); it; ++it) {
      triplets.emplace_back(node, it.col(), it.value());
      triplets.emplace_back(it.col(), node, it.value());
      degree += it.value();
    }
    if (degree == 0.0) triplets.emplace_back(node, node, self_loop);
  }
  ext.adjacency.resize(n, n);
  ext.adjacency.setFromTriplets(triplets.begin(), triplets.end());
  std::tie(ext.normalized, ext.degree) = normalize_adjacency<double>(ext.adjacency);
  return ext;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::string format_triplets(const SparseMatrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      out += std::to_string(r);
      out += '\t';
      out += std::to_string(it.col());
      out += '\t';
      append_double(out, it.value());
      out += '\n';
    }
  }
  return out;
}

SparseMatrix parse_triplets(std::string_view raw, Eigen::Index n) {
  std::vector<Eigen::Triplet<double>> triplets;
  std::size_t line_no = 0;
  while (!raw.empty()) {
    ++line_no;
    const auto eol = raw.find('\n');
    auto line = raw.substr(0, eol);
    raw = eol == std::string_view::npos ? std::string_view{} : raw.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    long i = -1, j = -1;
    double w = 0.0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, i);
    bool ok = r1.ec == std::errc{} && r1.ptr < end && *r1.ptr == '\t';
    if (ok) {
      auto r2 = std::from_chars(r1.ptr + 1, end, j);
      ok = r2.ec == std::errc{} && r2.ptr < end && *r2.ptr == '\t';
      if (ok) {
        auto r3 = std::from_chars(r2.ptr + 1, end, w);
        ok = r3.ec == std::errc{} && r3.ptr == end;
      }
    }
    if (!ok || i < 0 || j < 0 || i >= n || j >= n) {
      throw DataError("graph triplets line " + std::to_string(line_no) + ": malformed entry");
    }
    triplets.emplace_back(i, j, w);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

std::string format_node_manifest(const TextGraph& g) {
  std::string out;
  for (std::size_t i = 0; i < g.words.size(); ++i) {
    out += std::to_string(i) + "\tword\t" + g.words[i] + "\n";
  }
  for (std::size_t d = 0; d < g.doc_ids.size(); ++d) {
    out += std::to_string(g.words.size() + d) + "\tdoc\t" + g.doc_ids[d] + "\n";
  }
  return out;
}

void write_graph(const TextGraph& g, const std::filesystem::path& dir) {
  write_file(dir / "graph.tsv", format_triplets(g.adjacency));
  write_file(dir / "nodes.tsv", format_node_manifest(g));
}

TextGraph read_graph(const std::filesystem::path& dir) {
  TextGraph g;
  const auto nodes = read_file(dir / "nodes.tsv");
  std::string_view rest = nodes;
  std::size_t expected = 0;
  while (!rest.empty()) {
    const auto eol = rest.find('\n');
    auto line = rest.substr(0, eol);
    rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 1);
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.substr(0, t1) != std::to_string(expected)) {
      throw DataError("node manifest line " + std::to_string(expected + 1) + ": malformed entry");
    }
    const auto kind = line.substr(t1 + 1, t2 - t1 - 1);
    std::string name(line.substr(t2 + 1));
    if (kind == "word" && g.doc_ids.empty()) {
      g.words.push_back(std::move(name));
    } else if (kind == "doc") {
      g.doc_ids.push_back(std::move(name));
    } else {
      throw DataError("node manifest: word nodes must precede document nodes");
    }
    ++expected;
  }
  g.adjacency = parse_triplets(read_file(dir / "graph.tsv"), static_cast<Eigen::Index>(g.n()));
  std::tie(g.normalized, g.degree) = normalize_adjacency<double>(g.adjacency);
  return g;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t graph_fingerprint(const TextGraph& g) {
  return fnv1a(format_triplets(g.adjacency), fnv1a(format_node_manifest(g)));
}

}  // namespace promptbias
