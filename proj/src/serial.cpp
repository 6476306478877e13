#include "hmx/serial.hpp"

namespace hmx {

namespace {

constexpr char kTreeMagic[8] = {'H', 'M', 'X', 'C', 'T', '0', '0', '1'};
constexpr char kHtreeMagic[8] = {'H', 'M', 'X', 'H', 'T', '0', '0', '1'};
constexpr char kSampleMagic[8] = {'H', 'M', 'X', 'S', 'I', '0', '0', '1'};
constexpr char kBlockMagic[8] = {'H', 'M', 'X', 'B', 'S', '0', '0', '1'};
constexpr char kCoarsenMagic[8] = {'H', 'M', 'X', 'C', 'S', '0', '0', '1'};
constexpr char kCdsTag[4] = {'C', 'D', 'S', '1'};
constexpr std::uint32_t kCdsVersion = 1;

void save_with_magic(const std::string& path, const char magic[8], const ByteWriter& payload) {
  ByteWriter w;
  w.magic(magic);
  w.raw(payload.bytes().data(), payload.bytes().size());
  // no-op on identical content so artifact reuse keeps modification times
  write_file_if_changed(path, w);
}

ByteReader open_with_magic(const std::string& path, const char magic[8]) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic(magic);
  return r;
}

}  // namespace

void write_tree(ByteWriter& w, const ClusterTree& t) {
  w.u32(t.num_nodes);
  w.u32s(t.parent);
  w.u32s(t.lchild);
  w.u32s(t.rchild);
  w.u32s(t.start);
  w.u32s(t.end);
  w.u32s(t.level);
  w.u32s(t.perm);
  w.u32(t.height);
  w.u32(t.leaf_size);
}

ClusterTree read_tree(ByteReader& r) {
  ClusterTree t;
  t.num_nodes = r.u32();
  t.parent = r.u32s();
  t.lchild = r.u32s();
  t.rchild = r.u32s();
  t.start = r.u32s();
  t.end = r.u32s();
  t.level = r.u32s();
  t.perm = r.u32s();
  t.height = r.u32();
  t.leaf_size = r.u32();
  t.validate();
  return t;
}

void write_htree(ByteWriter& w, const HTree& ht) {
  write_tree(w, ht.tree);
  w.u8(ht.mode == InteractionMode::Hss ? 1 : 0);
  w.f64(ht.tau);
  for (const auto& lst : ht.near) w.u32s(lst);
  for (const auto& lst : ht.far) w.u32s(lst);
}

HTree read_htree(ByteReader& r) {
  HTree ht;
  ht.tree = read_tree(r);
  ht.mode = r.u8() ? InteractionMode::Hss : InteractionMode::Tau;
  ht.tau = r.f64();
  ht.near.resize(ht.tree.num_nodes);
  ht.far.resize(ht.tree.num_nodes);
  for (auto& lst : ht.near) lst = r.u32s();
  for (auto& lst : ht.far) lst = r.u32s();
  return ht;
}

void write_samples(ByteWriter& w, const SampleInfo& s) {
  w.u8(s.mode == SampleMode::Exact ? 1 : 0);
  w.u32(s.budget);
  w.u64(s.rows.size());
  for (const auto& row : s.rows) w.u32s(row);
}

SampleInfo read_samples(ByteReader& r) {
  SampleInfo s;
  s.mode = r.u8() ? SampleMode::Exact : SampleMode::Neighbor;
  s.budget = r.u32();
  s.rows.resize(r.u64());
  for (auto& row : s.rows) row = r.u32s();
  return s;
}

void write_blockset(ByteWriter& w, const BlockSet& bs) {
  w.u8(bs.kind == BlockKind::Far ? 1 : 0);
  w.u32(bs.blocksize);
  w.u64(bs.groups.size());
  for (const auto& g : bs.groups) {
    w.u32(g.row_group);
    w.u64(g.blocks.size());
    for (const auto& b : g.blocks) {
      w.u64(b.pairs.size());
      for (const auto& [i, j] : b.pairs) {
        w.u32(i);
        w.u32(j);
      }
    }
  }
}

BlockSet read_blockset(ByteReader& r) {
  BlockSet bs;
  bs.kind = r.u8() ? BlockKind::Far : BlockKind::Near;
  bs.blocksize = r.u32();
  bs.groups.resize(r.u64());
  for (auto& g : bs.groups) {
    g.row_group = r.u32();
    g.blocks.resize(r.u64());
    for (auto& b : g.blocks) {
      b.pairs.resize(r.u64());
      for (auto& [i, j] : b.pairs) {
        i = r.u32();
        j = r.u32();
      }
    }
  }
  return bs;
}

void write_coarsenset(ByteWriter& w, const CoarsenSet& cs) {
  w.u32(cs.agg);
  w.u32(cs.p);
  w.u64(cs.levels.size());
  for (const auto& level : cs.levels) {
    w.u64(level.subtrees.size());
    for (const auto& st : level.subtrees) {
      w.f64(st.cost);
      w.u32s(st.nodes);
    }
  }
}

CoarsenSet read_coarsenset(ByteReader& r) {
  CoarsenSet cs;
  cs.agg = r.u32();
  cs.p = r.u32();
  cs.levels.resize(r.u64());
  for (auto& level : cs.levels) {
    level.subtrees.resize(r.u64());
    for (auto& st : level.subtrees) {
      st.cost = r.f64();
      st.nodes = r.u32s();
    }
  }
  return cs;
}

void write_cds(ByteWriter& w, const CDS& cds) {
  w.u64(cds.tree.num_points());
  w.u32(cds.dim);
  w.u32(cds.tree.num_nodes);
  w.f64(cds.bacc);
  w.u32(cds.max_rank);
  write_tree(w, cds.tree);
  w.u32s(cds.sranks);
  w.u64(cds.participating.size());
  w.raw(cds.participating.data(), cds.participating.size());
  write_blockset(w, cds.near_bs);
  write_blockset(w, cds.far_bs);
  write_coarsenset(w, cds.coarsenset);
  w.u64s(cds.dptr);
  w.f64s(cds.dgen);
  w.u64s(cds.bptr);
  w.f64s(cds.bgen);
  w.u64s(cds.vptr);
  w.f64s(cds.vgen);
}

CDS read_cds(ByteReader& r) {
  CDS cds;
  const std::uint64_t n = r.u64();
  cds.dim = r.u32();
  const std::uint32_t num_nodes = r.u32();
  cds.bacc = r.f64();
  cds.max_rank = r.u32();
  cds.tree = read_tree(r);
  if (cds.tree.num_points() != n || cds.tree.num_nodes != num_nodes)
    throw io_error("CDS header disagrees with embedded tree");
  cds.sranks = r.u32s();
  cds.participating.resize(r.u64());
  r.raw(cds.participating.data(), cds.participating.size());
  if (cds.sranks.size() != num_nodes || cds.participating.size() != num_nodes)
    throw io_error("CDS per-node arrays have the wrong length");
  cds.near_bs = read_blockset(r);
  cds.far_bs = read_blockset(r);
  cds.coarsenset = read_coarsenset(r);
  cds.dptr = r.u64s();
  cds.dgen = r.f64s();
  cds.bptr = r.u64s();
  cds.bgen = r.f64s();
  cds.vptr = r.u64s();
  cds.vgen = r.f64s();
  cds.rebuild_order();
  if (cds.dptr.size() != cds.near_order.size() + 1 || cds.dptr.back() != cds.dgen.size() ||
      cds.bptr.size() != cds.far_order.size() + 1 || cds.bptr.back() != cds.bgen.size() ||
      cds.vptr.size() != cds.v_order.size() + 1 || cds.vptr.back() != cds.vgen.size())
    throw io_error("CDS offset arrays are inconsistent");
  return cds;
}

void save_tree(const std::string& path, const ClusterTree& t) {
  ByteWriter w;
  write_tree(w, t);
  save_with_magic(path, kTreeMagic, w);
}

ClusterTree load_tree(const std::string& path) {
  auto r = open_with_magic(path, kTreeMagic);
  return read_tree(r);
}

void save_htree(const std::string& path, const HTree& ht) {
  ByteWriter w;
  write_htree(w, ht);
  save_with_magic(path, kHtreeMagic, w);
}

HTree load_htree(const std::string& path) {
  auto r = open_with_magic(path, kHtreeMagic);
  return read_htree(r);
}

void save_samples(const std::string& path, const SampleInfo& s) {
  ByteWriter w;
  write_samples(w, s);
  save_with_magic(path, kSampleMagic, w);
}

SampleInfo load_samples(const std::string& path) {
  auto r = open_with_magic(path, kSampleMagic);
  return read_samples(r);
}

void save_blocksets(const std::string& path, const BlockSet& near_bs, const BlockSet& far_bs) {
  ByteWriter w;
  write_blockset(w, near_bs);
  write_blockset(w, far_bs);
  save_with_magic(path, kBlockMagic, w);
}

std::pair<BlockSet, BlockSet> load_blocksets(const std::string& path) {
  auto r = open_with_magic(path, kBlockMagic);
  BlockSet near_bs = read_blockset(r);
  BlockSet far_bs = read_blockset(r);
  return {std::move(near_bs), std::move(far_bs)};
}

void save_coarsenset(const std::string& path, const CoarsenSet& cs) {
  ByteWriter w;
  write_coarsenset(w, cs);
  save_with_magic(path, kCoarsenMagic, w);
}

CoarsenSet load_coarsenset(const std::string& path) {
  auto r = open_with_magic(path, kCoarsenMagic);
  return read_coarsenset(r);
}

void save_cds(const std::string& path, const CDS& cds) {
  ByteWriter w;
  w.raw(kCdsTag, 4);
  w.u32(kCdsVersion);
  write_cds(w, cds);
  write_file_if_changed(path, w);
}

void save_matrix(const std::string& path, const DenseMatrix& m) {
  ByteWriter w;
  w.u64(m.rows);
  w.u64(m.cols);
  w.raw(m.data.data(), m.data.size() * sizeof(double));
  w.write_file(path);
}

DenseMatrix load_matrix(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (cols != 0 && rows > (std::size_t(1) << 40) / cols)
    throw io_error("implausible matrix dimensions in " + path);
  DenseMatrix m(rows, cols);
  r.raw(m.data.data(), m.data.size() * sizeof(double));
  if (!r.at_end()) throw io_error("trailing bytes in matrix file " + path);
  return m;
}

CDS load_cds(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  char tag[4];
  r.raw(tag, 4);
  if (std::memcmp(tag, kCdsTag, 4) != 0) throw io_error("not a CDS file: " + path);
  const auto version = r.u32();
  if (version != kCdsVersion)
    throw io_error("unsupported CDS version " + std::to_string(version) + " in " + path);
  return read_cds(r);
}

}  // namespace hmx
