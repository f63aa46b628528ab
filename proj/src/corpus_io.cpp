#include "swt/corpus_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "swt/error.hpp"
#include "swt/file_util.hpp"

namespace swt {

using json = nlohmann::json;

namespace {

constexpr std::array<char, 4> kPackedMagic = {'S', 'W', 'T', 'E'};
constexpr std::uint32_t kPackedVersion = 1;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

void check_dimension(const EmbeddingRecord& r, std::size_t dim) {
  if (r.vector.size() != dim) {
    throw Error("dimension mismatch for instance '" + r.instance_id + "': expected " +
                std::to_string(dim) + ", got " + std::to_string(r.vector.size()));
  }
}

// Little-endian primitives for the packed format.
template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(bits & 0xFF);
    if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits >> 8);
  }
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw Error(std::string("truncated packed file while reading ") + what);
  std::make_unsigned_t<T> bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = static_cast<decltype(bits)>((bits << 8) | buf[i]);
  return static_cast<T>(bits);
}

void put_string(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw Error("string too long for packed format: " + s.substr(0, 32));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what) {
  const auto len = get_le<std::uint16_t>(in, what);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw Error(std::string("truncated packed file while reading ") + what);
  return s;
}

void append_float(std::string& out, float f) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), f);
  out.append(buf.data(), res.ptr);
}

}  // namespace

std::vector<Vector> SenseGroup::vectors() const {
  std::vector<Vector> out;
  out.reserve(members.size());
  for (const auto* m : members) out.push_back(m->vector);
  return out;
}

EmbeddingFormat parse_format(const std::string& name) {
  if (name == "auto") return EmbeddingFormat::Auto;
  if (name == "jsonl") return EmbeddingFormat::Jsonl;
  if (name == "packed") return EmbeddingFormat::Packed;
  throw Error("unknown embedding format: " + name);
}

void validate(const EmbeddingSet& set) {
  if (set.records.empty()) throw Error("embedding set is empty");
  if (set.dim == 0) throw Error("embedding dimension must be positive");
  std::unordered_set<std::string> ids;
  for (const auto& r : set.records) {
    check_dimension(r, set.dim);
    bool nonzero = false;
    for (float x : r.vector) {
      if (!std::isfinite(x)) throw Error("non-finite component in instance '" + r.instance_id + "'");
      nonzero = nonzero || x != 0.0f;
    }
    if (!nonzero) throw Error("zero vector in instance '" + r.instance_id + "'");
    if (!ids.insert(r.instance_id).second) throw Error("duplicate instance id '" + r.instance_id + "'");
  }
}

EmbeddingSet read_jsonl(std::istream& in) {
  EmbeddingSet set;
  std::optional<std::size_t> declared_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("malformed json at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) throw Error("line " + std::to_string(line_no) + ": expected a json object");
    try {
      if (!j.contains("id")) {
        if (!set.records.empty() || declared_dim || !j.contains("dim")) {
          throw Error("line " + std::to_string(line_no) + ": record without \"id\"");
        }
        declared_dim = j.at("dim").get<std::size_t>();
        if (j.contains("model")) set.model_id = j.at("model").get<std::string>();
        continue;
      }
      EmbeddingRecord r;
      r.instance_id = j.at("id").get<std::string>();
      r.lemma = j.value("lemma", std::string{});
      r.pos = j.value("pos", std::string{});
      if (j.contains("sense") && !j.at("sense").is_null()) r.sense_id = j.at("sense").get<std::string>();
      r.layer_id = j.value("layer", 0);
      const auto& vec = j.at("vec");
      if (!vec.is_array()) throw Error("line " + std::to_string(line_no) + ": \"vec\" must be an array");
      r.vector.reserve(vec.size());
      for (const auto& x : vec) {
        if (!x.is_number()) throw Error("line " + std::to_string(line_no) + ": non-numeric vector component");
        r.vector.push_back(static_cast<float>(x.get<double>()));
      }
      if (set.records.empty() && !declared_dim) declared_dim = r.vector.size();
      check_dimension(r, *declared_dim);
      set.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error("malformed record at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  set.dim = declared_dim.value_or(0);
  validate(set);
  return set;
}

EmbeddingSet read_packed(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kPackedMagic) throw Error("not a packed embedding file (bad magic)");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kPackedVersion) throw Error("unsupported packed version " + std::to_string(version));
  EmbeddingSet set;
  set.dim = get_le<std::uint32_t>(in, "dim");
  const auto count = get_le<std::uint64_t>(in, "count");
  set.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.instance_id = get_string(in, "id");
    r.lemma = get_string(in, "lemma");
    r.pos = get_string(in, "pos");
    auto sense = get_string(in, "sense");
    if (!sense.empty()) r.sense_id = std::move(sense);
    r.layer_id = get_le<std::int32_t>(in, "layer");
    r.vector.resize(set.dim);
    for (auto& x : r.vector) x = std::bit_cast<float>(get_le<std::uint32_t>(in, "vector"));
    set.records.push_back(std::move(r));
  }
  validate(set);
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  auto in = open_input(path, true);
  if (format == EmbeddingFormat::Auto) {
    std::array<char, 4> head{};
    in.read(head.data(), head.size());
    format = (in.gcount() == 4 && head == kPackedMagic) ? EmbeddingFormat::Packed : EmbeddingFormat::Jsonl;
    in.clear();
    in.seekg(0);
  }
  try {
    return format == EmbeddingFormat::Packed ? read_packed(in) : read_jsonl(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_jsonl(std::ostream& out, const EmbeddingSet& set) {
  out << json{{"dim", set.dim}, {"model", set.model_id}}.dump() << '\n';
  std::string line;
  for (const auto& r : set.records) {
    line.clear();
    line += "{\"id\":" + json(r.instance_id).dump();
    line += ",\"lemma\":" + json(r.lemma).dump();
    line += ",\"pos\":" + json(r.pos).dump();
    line += ",\"sense\":" + (r.sense_id ? json(*r.sense_id).dump() : std::string("null"));
    line += ",\"layer\":" + std::to_string(r.layer_id);
    line += ",\"vec\":[";
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      if (i) line += ',';
      append_float(line, r.vector[i]);
    }
    line += "]}\n";
    out << line;
  }
}

void write_packed(std::ostream& out, const EmbeddingSet& set) {
  out.write(kPackedMagic.data(), kPackedMagic.size());
  put_le<std::uint32_t>(out, kPackedVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim));
  put_le<std::uint64_t>(out, set.records.size());
  for (const auto& r : set.records) {
    check_dimension(r, set.dim);
    put_string(out, r.instance_id);
    put_string(out, r.lemma);
    put_string(out, r.pos);
    put_string(out, r.sense_id.value_or(std::string{}));
    put_le<std::int32_t>(out, r.layer_id);
    for (float x : r.vector) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  }
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set,
                      EmbeddingFormat format) {
  const bool packed = format == EmbeddingFormat::Packed;
  write_atomically(
      path, [&](std::ostream& out) { packed ? write_packed(out, set) : write_jsonl(out, set); }, packed);
}

std::vector<SenseGroup> group_by_sense(const EmbeddingSet& set) {
  std::map<std::string, SenseGroup> by_sense;
  for (const auto& r : set.records) {
    if (!r.sense_id) continue;
    auto& g = by_sense[*r.sense_id];
    g.sense_id = *r.sense_id;
    g.dim = set.dim;
    g.members.push_back(&r);
  }
  std::vector<SenseGroup> out;
  out.reserve(by_sense.size());
  for (auto& [_, g] : by_sense) out.push_back(std::move(g));
  return out;
}

const std::vector<std::string>* SenseInventory::find(const std::string& lemma,
                                                     const std::string& pos) const {
  const auto it = entries.find({lemma, pos});
  return it == entries.end() ? nullptr : &it->second;
}

SenseInventory read_inventory(std::istream& in) {
  SenseInventory inv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    const auto fields = split(line, '\t');
    const auto where = "inventory line " + std::to_string(line_no);
    if (fields.size() != 3) throw Error(where + ": expected lemma<TAB>pos<TAB>senses");
    std::vector<std::string> senses;
    if (!fields[2].empty()) senses = split(fields[2], ',');
    if (senses.empty() || std::any_of(senses.begin(), senses.end(), [](const auto& s) { return s.empty(); })) {
      throw Error(where + ": empty sense list");
    }
    std::set<std::string> seen;
    for (const auto& s : senses) {
      if (!seen.insert(s).second) throw Error(where + ": duplicate sense '" + s + "'");
    }
    if (!inv.entries.emplace(LemmaKey{fields[0], fields[1]}, std::move(senses)).second) {
      throw Error(where + ": duplicate entry for (" + fields[0] + ", " + fields[1] + ")");
    }
  }
  return inv;
}

SenseInventory load_inventory(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_inventory(in);
}

void write_inventory(std::ostream& out, const SenseInventory& inventory) {
  for (const auto& [key, senses] : inventory.entries) {
    out << key.first << '\t' << key.second << '\t';
    for (std::size_t i = 0; i < senses.size(); ++i) out << (i ? "," : "") << senses[i];
    out << '\n';
  }
}

void Taxonomy::add_node(const std::string& node) { adjacency_[node]; }

void Taxonomy::add_edge(const std::string& a, const std::string& b) {
  if (a == b) throw Error("taxonomy self-loop on '" + a + "'");
  if (adjacency_[a].insert(b).second) ++edge_count_;
  adjacency_[b].insert(a);
}

const std::set<std::string>& Taxonomy::neighbors(const std::string& node) const {
  const auto it = adjacency_.find(node);
  if (it == adjacency_.end()) throw Error("unknown taxonomy node '" + node + "'");
  return it->second;
}

std::vector<std::string> Taxonomy::nodes() const {
  std::vector<std::string> out;
  out.reserve(adjacency_.size());
  for (const auto& [n, _] : adjacency_) out.push_back(n);
  return out;
}

std::vector<std::pair<std::string, std::string>> Taxonomy::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [a, adj] : adjacency_) {
    for (const auto& b : adj) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

Taxonomy read_taxonomy(std::istream& in) {
  Taxonomy t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    const auto fields = split(line, '\t');
    if (fields.size() == 1 && !fields[0].empty()) {
      t.add_node(fields[0]);
    } else if (fields.size() == 2 && !fields[0].empty() && !fields[1].empty()) {
      t.add_edge(fields[0], fields[1]);
    } else {
      throw Error("taxonomy line " + std::to_string(line_no) + ": expected sense_a<TAB>sense_b");
    }
  }
  return t;
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_taxonomy(in);
}

void write_taxonomy(std::ostream& out, const Taxonomy& taxonomy) {
  std::set<std::string> linked;
  for (const auto& [a, b] : taxonomy.edges()) {
    out << a << '\t' << b << '\n';
    linked.insert(a);
    linked.insert(b);
  }
  for (const auto& n : taxonomy.nodes()) {
    if (!linked.count(n)) out << n << '\n';
  }
}

GoldKey read_gold(std::istream& in) {
  GoldKey gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    std::istringstream fields(line);
    std::string id, sense;
    if (!(fields >> id >> sense)) throw Error("gold line " + std::to_string(line_no) + ": expected id and sense");
    if (!gold.emplace(id, sense).second) throw Error("gold line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
  }
  return gold;
}

GoldKey load_gold(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_gold(in);
}

void write_gold(std::ostream& out, const GoldKey& gold) {
  for (const auto& [id, sense] : gold) out << id << ' ' << sense << '\n';
}

}  // namespace swt
