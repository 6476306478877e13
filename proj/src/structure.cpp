#include "hmx/structure.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hmx {

constexpr std::uint64_t kNoSlot = std::numeric_limits<std::uint64_t>::max();

std::size_t BlockSet::pair_count() const {
  std::size_t c = 0;
  for (const auto& g : groups)
    for (const auto& b : g.blocks) c += b.pairs.size();
  return c;
}

std::vector<InteractionPair> BlockSet::flat_pairs() const {
  std::vector<InteractionPair> out;
  out.reserve(pair_count());
  for (const auto& g : groups)
    for (const auto& b : g.blocks) out.insert(out.end(), b.pairs.begin(), b.pairs.end());
  return out;
}

BlockSet blocking(const HTree& htree, index_t blocksize, BlockKind kind) {
  if (blocksize < 1) throw std::invalid_argument("blocking: blocksize must be >= 1");
  const auto& lists = kind == BlockKind::Near ? htree.near : htree.far;
  const index_t num_nodes = htree.tree.num_nodes;
  const index_t block_dim = (num_nodes - 1 + blocksize) / blocksize;

  if (!lists.empty() && !lists[0].empty())
    throw std::runtime_error("blocking: root node appears in an interaction");

  // sparse grid of cells, row-group-major gather below
  std::vector<std::map<index_t, InteractionBlock>> rows(block_dim);
  for (index_t i = 1; i < num_nodes; ++i) {
    if (lists[i].empty()) continue;
    const index_t iid = (i - 1) / blocksize;
    for (index_t j : lists[i]) {
      if (j == 0) throw std::runtime_error("blocking: root node appears in an interaction");
      const index_t jid = (j - 1) / blocksize;
      rows[iid][jid].pairs.emplace_back(i, j);
    }
  }

  BlockSet out;
  out.kind = kind;
  out.blocksize = blocksize;
  for (index_t iid = 0; iid < block_dim; ++iid) {
    if (rows[iid].empty()) continue;
    BlockRowGroup g;
    g.row_group = iid;
    for (auto& [jid, block] : rows[iid]) g.blocks.push_back(std::move(block));
    out.groups.push_back(std::move(g));
  }
  return out;
}

double node_cost(const ClusterTree& tree, index_t node, std::span<const index_t> sranks,
                 double q) {
  const double own = sranks[node];
  if (tree.is_leaf(node)) return static_cast<double>(tree.node_size(node)) * own * q;
  const double child = sranks[tree.lchild[node]] + sranks[tree.rchild[node]];
  return child * own * q;
}

namespace {

void post_order_collect(const ClusterTree& tree, const std::vector<bool>& participating,
                        const std::vector<index_t>& heights, index_t node, index_t lo, index_t hi,
                        std::vector<index_t>& out) {
  if (heights[node] < lo || heights[node] >= hi) return;
  if (!tree.is_leaf(node)) {
    post_order_collect(tree, participating, heights, tree.lchild[node], lo, hi, out);
    post_order_collect(tree, participating, heights, tree.rchild[node], lo, hi, out);
  }
  if (participating[node]) out.push_back(node);
}

}  // namespace

std::vector<SubTree> disjoint_subtrees(const ClusterTree& tree,
                                       const std::vector<bool>& participating, index_t lo,
                                       index_t hi) {
  const auto heights = tree.subtree_heights();
  std::vector<SubTree> out;
  for (index_t i = 0; i < tree.num_nodes; ++i) {
    if (heights[i] < lo || heights[i] >= hi) continue;
    const index_t par = tree.parent[i];
    const bool is_root = par == kNoNode || heights[par] >= hi;
    if (!is_root) continue;
    SubTree st;
    post_order_collect(tree, participating, heights, i, lo, hi, st.nodes);
    if (!st.nodes.empty()) out.push_back(std::move(st));
  }
  return out;
}

std::vector<index_t> bin_pack(std::span<const double> costs, index_t n_bins) {
  if (n_bins < 1) throw std::invalid_argument("bin_pack: need at least one bin");
  const std::size_t n = costs.size();
  std::vector<index_t> assign(n, 0);
  if (n == 0) return assign;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return costs[a] > costs[b] || (costs[a] == costs[b] && a < b);
  });

  double total = 0.0, largest = 0.0;
  for (double c : costs) {
    total += c;
    largest = std::max(largest, c);
  }
  if (total == 0.0) {
    // degenerate: round-robin over the sorted order
    for (std::size_t r = 0; r < n; ++r) assign[order[r]] = static_cast<index_t>(r % n_bins);
    return assign;
  }

  const double capacity = std::max(largest, std::ceil(total / n_bins));
  std::vector<double> load(n_bins, 0.0);
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t item = order[oi];
    index_t chosen = kNoNode;
    for (index_t b = 0; b < n_bins; ++b)
      if (load[b] + costs[item] <= capacity) {
        chosen = b;
        break;
      }
    if (chosen == kNoNode) {
      chosen = 0;
      for (index_t b = 1; b < n_bins; ++b)
        if (load[b] < load[chosen]) chosen = b;
    }
    load[chosen] += costs[item];
    assign[item] = chosen;
  }
  return assign;
}

CoarsenSet coarsening(const ClusterTree& tree, std::span<const index_t> sranks,
                      const std::vector<bool>& participating, index_t p, index_t agg, double q) {
  if (p < 1 || agg < 1) throw std::invalid_argument("coarsening: p and agg must be >= 1");
  CoarsenSet cs;
  cs.agg = agg;
  cs.p = p;
  if (tree.height == 0) {
    // single-node tree never participates in up/down passes
    return cs;
  }
  const index_t num_levels = (tree.height + agg - 1) / agg;

  for (index_t i = 0; i < num_levels; ++i) {
    const index_t lo = i * agg;
    const index_t hi = i + 1 == num_levels ? tree.height + 1 : (i + 1) * agg;
    auto subtrees = disjoint_subtrees(tree, participating, lo, hi);
    for (auto& st : subtrees) {
      st.cost = 0.0;
      for (index_t node : st.nodes) st.cost += node_cost(tree, node, sranks, q);
    }
    if (subtrees.empty()) continue;

    const auto count = static_cast<index_t>(subtrees.size());
    const index_t n_part = count > p ? p : std::max<index_t>(1, count / 2);
    std::vector<double> costs(subtrees.size());
    for (std::size_t s = 0; s < subtrees.size(); ++s) costs[s] = subtrees[s].cost;
    const auto assign = bin_pack(costs, n_part);

    CoarsenLevel level;
    level.subtrees.resize(n_part);
    for (std::size_t s = 0; s < subtrees.size(); ++s) {
      auto& merged = level.subtrees[assign[s]];
      merged.nodes.insert(merged.nodes.end(), subtrees[s].nodes.begin(), subtrees[s].nodes.end());
      merged.cost += subtrees[s].cost;
    }
    std::erase_if(level.subtrees, [](const SubTree& st) { return st.nodes.empty(); });
    cs.levels.push_back(std::move(level));
  }
  return cs;
}

void CDS::rebuild_order() {
  near_order = near_bs.flat_pairs();
  far_order = far_bs.flat_pairs();
  near_index.clear();
  far_index.clear();
  for (std::size_t s = 0; s < near_order.size(); ++s) near_index[near_order[s]] = s;
  for (std::size_t s = 0; s < far_order.size(); ++s) far_index[far_order[s]] = s;
  v_order.clear();
  v_index.assign(tree.num_nodes, kNoSlot);
  for (const auto& level : coarsenset.levels)
    for (const auto& st : level.subtrees)
      for (index_t node : st.nodes) {
        v_index[node] = v_order.size();
        v_order.push_back(node);
      }
}

std::uint64_t CDS::d_slot(index_t i, index_t j) const {
  const auto it = near_index.find({i, j});
  if (it == near_index.end()) throw std::invalid_argument("CDS: no such near block");
  return it->second;
}

std::uint64_t CDS::b_slot(index_t i, index_t j) const {
  const auto it = far_index.find({i, j});
  if (it == far_index.end()) throw std::invalid_argument("CDS: no such far block");
  return it->second;
}

std::uint64_t CDS::v_slot(index_t node) const {
  if (node >= v_index.size() || v_index[node] == kNoSlot)
    throw std::invalid_argument("CDS: node has no basis generator");
  return v_index[node];
}

DenseMatrix CDS::extract_d(index_t i, index_t j) const {
  const auto s = d_slot(i, j);
  DenseMatrix m(tree.node_size(i), tree.node_size(j));
  std::memcpy(m.data.data(), dgen.data() + dptr[s], m.data.size() * sizeof(double));
  return m;
}

DenseMatrix CDS::extract_b(index_t i, index_t j) const {
  const auto s = b_slot(i, j);
  DenseMatrix m(sranks[i], sranks[j]);
  std::memcpy(m.data.data(), bgen.data() + bptr[s], m.data.size() * sizeof(double));
  return m;
}

DenseMatrix CDS::extract_v(index_t node) const {
  const auto s = v_slot(node);
  DenseMatrix m(v_width(node), sranks[node]);
  std::memcpy(m.data.data(), vgen.data() + vptr[s], m.data.size() * sizeof(double));
  return m;
}

CDS build_cds(const CompressedMatrix& cm, const BlockSet& near_bs, const BlockSet& far_bs,
              const CoarsenSet& coarsenset) {
  CDS cds;
  cds.tree = cm.htree.tree;
  cds.sranks = srank_vector(cm);
  cds.participating.assign(cm.participating.begin(), cm.participating.end());
  cds.bacc = cm.bacc;
  cds.max_rank = cm.max_rank;
  cds.near_bs = near_bs;
  cds.far_bs = far_bs;
  cds.coarsenset = coarsenset;
  cds.rebuild_order();

  std::map<InteractionPair, const DenseMatrix*> near_src, far_src;
  for (const auto& nb : cm.near_blocks) near_src[{nb.i, nb.j}] = &nb.d;
  for (const auto& fb : cm.far_blocks) far_src[{fb.i, fb.j}] = &fb.b;

  const auto pack = [](const std::vector<const DenseMatrix*>& blocks,
                       std::vector<std::uint64_t>& ptr, std::vector<double>& gen) {
    ptr.clear();
    gen.clear();
    std::uint64_t off = 0;
    for (const auto* b : blocks) {
      ptr.push_back(off);
      gen.insert(gen.end(), b->data.begin(), b->data.end());
      off += b->data.size();
    }
    ptr.push_back(off);
  };

  std::vector<const DenseMatrix*> order;
  order.reserve(cds.near_order.size());
  for (const auto& pr : cds.near_order) {
    const auto it = near_src.find(pr);
    if (it == near_src.end()) throw std::logic_error("build_cds: near blockset pair missing from compression");
    order.push_back(it->second);
  }
  pack(order, cds.dptr, cds.dgen);

  order.clear();
  for (const auto& pr : cds.far_order) {
    const auto it = far_src.find(pr);
    if (it == far_src.end()) throw std::logic_error("build_cds: far blockset pair missing from compression");
    order.push_back(it->second);
  }
  pack(order, cds.bptr, cds.bgen);

  order.clear();
  for (index_t node : cds.v_order) order.push_back(&cm.bases[node].v);
  pack(order, cds.vptr, cds.vgen);

  if (cds.near_order.size() != cm.near_blocks.size() ||
      cds.far_order.size() != cm.far_blocks.size())
    throw std::logic_error("build_cds: blockset does not partition the interaction set");
  return cds;
}

}  // namespace hmx
