#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace swt {

using Vector = std::vector<float>;

struct EmbeddingRecord {
  std::string instance_id;
  std::string lemma;
  std::string pos;
  std::optional<std::string> sense_id;  // empty for unlabeled test tokens
  std::int32_t layer_id = 0;
  Vector vector;

  bool labeled() const { return sense_id.has_value(); }
};

struct EmbeddingSet {
  std::size_t dim = 0;
  std::string model_id;
  std::vector<EmbeddingRecord> records;
};

// Members point into the EmbeddingSet the group was built from; the set must
// outlive the group.
struct SenseGroup {
  std::string sense_id;
  std::vector<const EmbeddingRecord*> members;
  std::size_t dim = 0;

  std::size_t size() const { return members.size(); }
  std::vector<Vector> vectors() const;
};

enum class EmbeddingFormat { Auto, Jsonl, Packed };

EmbeddingFormat parse_format(const std::string& name);

// Checks dim > 0, non-empty, uniform length, finite and nonzero vectors and
// unique instance ids. Throws swt::Error naming the offending record.
void validate(const EmbeddingSet& set);

/// Auto sniffs the packed magic bytes and otherwise reads jsonl.
EmbeddingSet load_embeddings(const std::filesystem::path& path,
                             EmbeddingFormat format = EmbeddingFormat::Auto);
EmbeddingSet read_jsonl(std::istream& in);
EmbeddingSet read_packed(std::istream& in);

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set,
                      EmbeddingFormat format = EmbeddingFormat::Jsonl);
void write_jsonl(std::ostream& out, const EmbeddingSet& set);
void write_packed(std::ostream& out, const EmbeddingSet& set);

/// Labeled records partitioned by sense, sorted by sense_id.
std::vector<SenseGroup> group_by_sense(const EmbeddingSet& set);

using LemmaKey = std::pair<std::string, std::string>;  // (lemma, pos)

struct SenseInventory {
  std::map<LemmaKey, std::vector<std::string>> entries;

  const std::vector<std::string>* find(const std::string& lemma, const std::string& pos) const;
};

SenseInventory load_inventory(const std::filesystem::path& path);
SenseInventory read_inventory(std::istream& in);
void write_inventory(std::ostream& out, const SenseInventory& inventory);

// Undirected graph over sense ids. Nodes come from edges plus single-column
// lines in the TSV.
class Taxonomy {
 public:
  void add_node(const std::string& node);
  void add_edge(const std::string& a, const std::string& b);

  bool has_node(const std::string& node) const { return adjacency_.count(node) > 0; }
  const std::set<std::string>& neighbors(const std::string& node) const;
  std::size_t node_count() const { return adjacency_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::vector<std::string> nodes() const;
  std::vector<std::pair<std::string, std::string>> edges() const;

 private:
  std::map<std::string, std::set<std::string>> adjacency_;
  std::size_t edge_count_ = 0;
};

Taxonomy load_taxonomy(const std::filesystem::path& path);
Taxonomy read_taxonomy(std::istream& in);
void write_taxonomy(std::ostream& out, const Taxonomy& taxonomy);

using GoldKey = std::map<std::string, std::string>;  // instance_id -> sense_id

GoldKey load_gold(const std::filesystem::path& path);
GoldKey read_gold(std::istream& in);
void write_gold(std::ostream& out, const GoldKey& gold);

}  // namespace swt
