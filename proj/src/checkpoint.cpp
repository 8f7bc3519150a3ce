#include "contpat/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <json.hpp>

namespace contpat {
namespace {

using nlohmann::json;

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <class T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(v);
}

json patterns_json(const std::vector<PatternSpec>& patterns) {
  json out = json::array();
  for (const auto& p : patterns) {
    out.push_back({{"family", std::string(to_string(p.family))}, {"tokens", p.tokens}});
  }
  return out;
}

json encoder_json(const EncoderConfig& c) {
  return {{"d_model", c.d_model},   {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},   {"d_ff", c.d_ff},
          {"max_len", c.max_len},   {"internal_dropout", c.internal_dropout},
          {"vocab_size", c.vocab_size}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.internal_dropout = j.at("internal_dropout").get<double>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  return c;
}

// Allocates every tensor of a model with the given configuration.
Model skeleton(const EncoderConfig& config, std::size_t base_vocab,
               std::vector<PatternSpec> patterns) {
  return make_model(config, base_vocab, std::move(patterns), 0);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  json header;
  header["config"] = json::parse(ck.config_json);
  header["encoder"] = encoder_json(ck.model.config);
  header["base_vocab"] = ck.model.base_vocab;
  header["vocab"] = ck.tokenizer.tokens();
  header["lowercase"] = ck.tokenizer.lowercase();
  header["patterns"] = patterns_json(ck.model.patterns);
  header["theta"] = ck.theta ? json(*ck.theta) : json(nullptr);
  json tensors = json::array();
  std::size_t offset = 0;
  ck.model.visit([&](const std::string& name, const ad::Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  });
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::string out(kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 8);
  ck.model.visit([&](const std::string&, const ad::Tensor& t) {
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  });
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  std::size_t pos = kCheckpointMagic.size();
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos < header_len) throw FormatError("checkpoint header truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;

  Checkpoint ck;
  try {
    ck.config_json = header.at("config").dump();
    ck.tokenizer = Tokenizer::from_tokens(header.at("vocab").get<std::vector<std::string>>(),
                                          header.at("lowercase").get<bool>());
    std::vector<PatternSpec> patterns;
    for (const auto& p : header.at("patterns")) {
      patterns.push_back({parse_family(p.at("family").get<std::string>()),
                          p.at("tokens").get<std::vector<TokenId>>()});
    }
    ck.model = skeleton(encoder_from_json(header.at("encoder")),
                        header.at("base_vocab").get<std::size_t>(), std::move(patterns));
    if (!header.at("theta").is_null()) ck.theta = header.at("theta").get<double>();

    std::map<std::string, const json*> entries;
    for (const auto& t : header.at("tensors")) entries[t.at("name").get<std::string>()] = &t;
    const std::size_t data_start = pos;
    std::size_t seen = 0;
    ck.model.visit([&](const std::string& name, ad::Tensor& t) {
      auto it = entries.find(name);
      if (it == entries.end()) throw FormatError("checkpoint lacks tensor " + name);
      const json& e = *it->second;
      if (e.at("shape").get<ad::Shape>() != t.shape()) {
        throw FormatError("tensor " + name + " has shape " + ad::shape_str(e.at("shape").get<ad::Shape>()) +
                          ", expected " + ad::shape_str(t.shape()));
      }
      std::size_t at = data_start + 8 * e.at("offset").get<std::size_t>();
      for (double& v : t.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, at));
      ++seen;
    });
    if (seen != entries.size()) throw FormatError("checkpoint holds unknown tensors");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return content_hash(read_file(path)); }

}  // namespace contpat
