#pragma once

#include <string>

#include "hmx/interaction.hpp"
#include "hmx/io.hpp"
#include "hmx/sampling.hpp"
#include "hmx/structure.hpp"

namespace hmx {

/// Payload serializers append to / consume from a byte stream without any
/// header, so larger formats can embed them and the pipeline can hash them.
void write_tree(ByteWriter& w, const ClusterTree& t);
ClusterTree read_tree(ByteReader& r);

void write_htree(ByteWriter& w, const HTree& ht);
HTree read_htree(ByteReader& r);

void write_samples(ByteWriter& w, const SampleInfo& s);
SampleInfo read_samples(ByteReader& r);

void write_blockset(ByteWriter& w, const BlockSet& bs);
BlockSet read_blockset(ByteReader& r);

void write_coarsenset(ByteWriter& w, const CoarsenSet& cs);
CoarsenSet read_coarsenset(ByteReader& r);

void write_cds(ByteWriter& w, const CDS& cds);
CDS read_cds(ByteReader& r);

/// File-level wrappers add a versioned magic header and refuse mismatches.
void save_tree(const std::string& path, const ClusterTree& t);
ClusterTree load_tree(const std::string& path);

void save_htree(const std::string& path, const HTree& ht);
HTree load_htree(const std::string& path);

void save_samples(const std::string& path, const SampleInfo& s);
SampleInfo load_samples(const std::string& path);

void save_blocksets(const std::string& path, const BlockSet& near_bs, const BlockSet& far_bs);
std::pair<BlockSet, BlockSet> load_blocksets(const std::string& path);

void save_coarsenset(const std::string& path, const CoarsenSet& cs);
CoarsenSet load_coarsenset(const std::string& path);

/// CDS file: 4-byte "CDS1" tag + 32-bit version, little-endian payload.
void save_cds(const std::string& path, const CDS& cds);
CDS load_cds(const std::string& path);

/// Dense matrix file: u64 rows, u64 cols, column-major doubles (the same
/// real-payload layout the binary point format uses).
void save_matrix(const std::string& path, const DenseMatrix& m);
DenseMatrix load_matrix(const std::string& path);

}  // namespace hmx
