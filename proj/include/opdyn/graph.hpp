#pragma once

// Influence networks: the interpersonal influence matrix W together with the
// conformity weights M that define each agent's local public opinion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "opdyn/random.hpp"
#include "opdyn/types.hpp"

namespace opdyn {

/// m_ij = 1/|N_i| on every neighbour of i (every j with w_ij > 0).
struct UniformConformity {};
/// m_ij = w_ij.
struct MirrorConformity {};
/// Caller-supplied M; must share W's sparsity pattern.
struct ExplicitConformity {
  Matrix weights;
};

using ConformityWeights =
    std::variant<UniformConformity, MirrorConformity, ExplicitConformity>;

/// One positive entry of a row: column index with its W and M weights.
struct Link {
  Eigen::Index to;
  double w;
  double m;
};

class InfluenceNetwork;
InfluenceNetwork build_network(const Matrix& weights,
                               const ConformityWeights& conformity);

/// Immutable after construction; safe to share between threads.
class InfluenceNetwork {
 public:
  std::size_t n() const { return static_cast<std::size_t>(w_.rows()); }
  const Matrix& influence() const { return w_; }
  const Matrix& conformity() const { return m_; }

  /// Positive entries of row i, ascending by column.
  const std::vector<Link>& links(std::size_t i) const { return links_[i]; }

  double self_weight(std::size_t i) const {
    const auto k = static_cast<Eigen::Index>(i);
    return w_(k, k);
  }

 private:
  friend InfluenceNetwork build_network(const Matrix&, const ConformityWeights&);

  InfluenceNetwork(Matrix w, Matrix m) : w_(std::move(w)), m_(std::move(m)) {
    links_.resize(static_cast<std::size_t>(w_.rows()));
    for (Eigen::Index i = 0; i < w_.rows(); ++i) {
      for (Eigen::Index j = 0; j < w_.cols(); ++j) {
        if (w_(i, j) > 0.0) links_[static_cast<std::size_t>(i)].push_back({j, w_(i, j), m_(i, j)});
      }
    }
  }

  Matrix w_;
  Matrix m_;
  std::vector<std::vector<Link>> links_;
};

namespace detail {

inline void require_square_nonnegative(const Matrix& a, const char* what) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw InvalidInput(std::string(what) + " must be a non-empty square matrix, got " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw InvalidInput(std::string(what) + " entry (" + std::to_string(i) + "," +
                           std::to_string(j) + ") is negative or not finite");
      }
    }
  }
}

/// Row-normalizes `a` in place; throws on a zero row.
inline void normalize_rows(Matrix& a, const char* what) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double s = a.row(i).sum();
    if (!(s > 0.0)) {
      throw InvalidInput(std::string(what) + " row " + std::to_string(i) +
                         " has no positive entry");
    }
    a.row(i) /= s;
  }
}

}  // namespace detail

/// Rows of W are always normalized. An explicit M must already be
/// row-stochastic to within 1e-9 (it is then renormalized) and must have
/// exactly the positive pattern of W.
inline InfluenceNetwork build_network(const Matrix& weights,
                                      const ConformityWeights& conformity) {
  detail::require_square_nonnegative(weights, "influence matrix");
  Matrix w = weights;
  detail::normalize_rows(w, "influence matrix");
  const Eigen::Index n = w.rows();

  Matrix m = Matrix::Zero(n, n);
  if (std::holds_alternative<UniformConformity>(conformity)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto degree = (w.row(i).array() > 0.0).count();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (w(i, j) > 0.0) m(i, j) = 1.0 / static_cast<double>(degree);
      }
    }
  } else if (std::holds_alternative<MirrorConformity>(conformity)) {
    m = w;
  } else {
    m = std::get<ExplicitConformity>(conformity).weights;
    detail::require_square_nonnegative(m, "conformity matrix");
    if (m.rows() != n) {
      throw InvalidInput("conformity matrix is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + " but the influence matrix is " +
                         std::to_string(n) + "x" + std::to_string(n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if ((w(i, j) > 0.0) != (m(i, j) > 0.0)) {
          throw InvalidInput("conformity matrix violates sparsity match at (" +
                             std::to_string(i) + "," + std::to_string(j) + ")");
        }
      }
      const double s = m.row(i).sum();
      if (std::abs(s - 1.0) > 1e-9) {
        throw InvalidInput("conformity matrix row " + std::to_string(i) + " sums to " +
                           std::to_string(s) + ", not 1");
      }
      m.row(i) /= s;
    }
  }
  return InfluenceNetwork(std::move(w), std::move(m));
}

/// Component id per node for the digraph with an edge i -> j whenever
/// a(i, j) > 0. Iterative Tarjan.
inline std::vector<int> strongly_connected_components(const Matrix& a) {
  const auto n = static_cast<int>(a.rows());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(i, j) > 0.0) adj[static_cast<std::size_t>(i)].push_back(j);

  std::vector<int> index(static_cast<std::size_t>(n), -1);
  std::vector<int> low(static_cast<std::size_t>(n), 0);
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  std::vector<std::pair<int, std::size_t>> call;  // (node, next edge)
  int counter = 0;
  int components = 0;

  for (int root = 0; root < n; ++root) {
    if (index[static_cast<std::size_t>(root)] != -1) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, edge] = call.back();
      const auto vs = static_cast<std::size_t>(v);
      if (edge == 0 && index[vs] == -1) {
        index[vs] = low[vs] = counter++;
        stack.push_back(v);
        on_stack[vs] = 1;
      }
      if (edge < adj[vs].size()) {
        const int w = adj[vs][edge++];
        const auto ws = static_cast<std::size_t>(w);
        if (index[ws] == -1) {
          call.emplace_back(w, 0);
        } else if (on_stack[ws]) {
          low[vs] = std::min(low[vs], index[ws]);
        }
        continue;
      }
      if (low[vs] == index[vs]) {
        int w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          comp[static_cast<std::size_t>(w)] = components;
        } while (w != v);
        ++components;
      }
      const int finished = v;
      call.pop_back();
      if (!call.empty()) {
        const auto parent = static_cast<std::size_t>(call.back().first);
        low[parent] = std::min(low[parent], low[static_cast<std::size_t>(finished)]);
      }
    }
  }
  return comp;
}

inline bool is_strongly_connected(const Matrix& a) {
  if (a.rows() == 0) return false;
  const auto comp = strongly_connected_components(a);
  return std::all_of(comp.begin(), comp.end(), [](int c) { return c == 0; });
}

inline bool is_strongly_connected(const InfluenceNetwork& net) {
  return is_strongly_connected(net.influence());
}

namespace detail {

/// Square boolean matrix with rows packed into 64-bit words.
class BitMatrix {
 public:
  explicit BitMatrix(std::size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  void set(std::size_t i, std::size_t j) { bits_[i * words_ + j / 64] |= 1ULL << (j % 64); }
  bool get(std::size_t i, std::size_t j) const {
    return (bits_[i * words_ + j / 64] >> (j % 64)) & 1ULL;
  }

  BitMatrix operator*(const BitMatrix& rhs) const {
    BitMatrix out(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      std::uint64_t* dst = &out.bits_[i * words_];
      for (std::size_t k = 0; k < n_; ++k) {
        if (!get(i, k)) continue;
        const std::uint64_t* src = &rhs.bits_[k * words_];
        for (std::size_t w = 0; w < words_; ++w) dst[w] |= src[w];
      }
    }
    return out;
  }

  bool all() const {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (!get(i, j)) return false;
    return true;
  }

 private:
  std::size_t n_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

}  // namespace detail

/// True iff some power of `a` is entrywise positive (irreducible and
/// aperiodic). Only the sparsity pattern is used: a primitive matrix has
/// A^k > 0 for every k >= (n-1)^2 + 1, so squaring until the exponent passes
/// that bound decides the question in O(log n) boolean products.
inline bool is_primitive(const Matrix& a) {
  if (a.rows() == 0 || a.rows() != a.cols()) return false;
  const auto n = static_cast<std::size_t>(a.rows());
  detail::BitMatrix power(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) power.set(i, j);

  const std::size_t bound = (n - 1) * (n - 1) + 1;
  std::size_t exponent = 1;
  while (exponent < bound) {
    power = power * power;
    exponent *= 2;
  }
  return power.all();
}

/// Random network on an undirected k-regular topology with a self-loop at
/// every node. Each present w_ij is drawn from U(0,1) independently of w_ji,
/// then rows are normalized, so w_ij > 0 iff w_ji > 0.
///
/// Topology comes from the pairing (configuration) model, rejecting pairings
/// that produce self-pairs or parallel edges; for k > (n-1)/2 the complement
/// of an (n-1-k)-regular graph is used instead. Disconnected topologies are
/// regenerated up to 100 times.
///
/// Streams: topology draws come from derive_seed(seed, Stream::topology),
/// weights from derive_seed(seed, Stream::weights) in row-major order over
/// the positive pattern.
inline InfluenceNetwork generate_k_regular(std::size_t n, std::size_t k, std::uint64_t seed,
                                           const ConformityWeights& conformity =
                                               UniformConformity{}) {
  if (k < 1 || n <= k) {
    throw InvalidInput("k-regular graph needs n > k >= 1 (n=" + std::to_string(n) +
                       ", k=" + std::to_string(k) + ")");
  }
  if ((n * k) % 2 != 0) {
    throw InvalidInput("k-regular graph needs n*k even (n=" + std::to_string(n) +
                       ", k=" + std::to_string(k) + ")");
  }
  if (std::holds_alternative<ExplicitConformity>(conformity)) {
    throw InvalidInput("explicit conformity weights cannot accompany a generated topology");
  }

  constexpr int kConnectivityBudget = 100;
  constexpr int kPairingBudget = 100000;

  const bool complement = 2 * k > n - 1;
  const std::size_t degree = complement ? n - 1 - k : k;

  Rng topo(derive_seed(seed, Stream::topology));
  const auto ni = static_cast<Eigen::Index>(n);

  auto pair_once = [&](Matrix& adj) -> bool {
    adj.setZero();
    if (degree == 0) return true;
    std::vector<std::size_t> stubs;
    stubs.reserve(n * degree);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t d = 0; d < degree; ++d) stubs.push_back(v);
    std::shuffle(stubs.begin(), stubs.end(), topo.engine());
    for (std::size_t s = 0; s < stubs.size(); s += 2) {
      const auto a = static_cast<Eigen::Index>(stubs[s]);
      const auto b = static_cast<Eigen::Index>(stubs[s + 1]);
      if (a == b || adj(a, b) > 0.0) return false;
      adj(a, b) = adj(b, a) = 1.0;
    }
    return true;
  };

  Matrix adj(ni, ni);
  for (int attempt = 0; attempt < kConnectivityBudget; ++attempt) {
    bool simple = false;
    for (int p = 0; p < kPairingBudget && !simple; ++p) simple = pair_once(adj);
    if (!simple) {
      throw InvalidInput("pairing model failed to produce a simple " + std::to_string(k) +
                         "-regular graph on " + std::to_string(n) + " nodes");
    }
    if (complement) {
      for (Eigen::Index i = 0; i < ni; ++i)
        for (Eigen::Index j = 0; j < ni; ++j) adj(i, j) = (i != j && adj(i, j) == 0.0) ? 1.0 : 0.0;
    }
    adj.diagonal().setOnes();
    if (!is_strongly_connected(adj)) continue;

    Rng weights_rng(derive_seed(seed, Stream::weights));
    Matrix w = Matrix::Zero(ni, ni);
    for (Eigen::Index i = 0; i < ni; ++i)
      for (Eigen::Index j = 0; j < ni; ++j)
        if (adj(i, j) > 0.0) w(i, j) = weights_rng.uniform_open();
    return build_network(w, conformity);
  }
  throw InvalidInput("no strongly connected " + std::to_string(k) + "-regular graph on " +
                     std::to_string(n) + " nodes after " +
                     std::to_string(kConnectivityBudget) + " attempts");
}

}  // namespace opdyn
