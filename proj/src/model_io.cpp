#include "ote/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ote/error.hpp"

namespace ote {

namespace {

constexpr char kMagic[4] = {'O', 'T', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("model file truncated reading " + what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::uint64_t lo = get_u32(in, what);
  std::uint64_t hi = get_u32(in, what);
  return lo | (hi << 32);
}

float get_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(get_u32(in, what));
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string metadata_text(const ModelParams<float>& m, const Vocab& words,
                          const Vocab& chars) {
  std::ostringstream os;
  const ModelConfig& c = m.config;
  os << "variant=" << variant_name(c.variant) << "\n";
  os << "word_vocab=" << c.word_vocab << "\n";
  os << "char_vocab=" << c.char_vocab << "\n";
  os << "word_dim=" << c.word_dim << "\n";
  os << "hidden=" << c.hidden << "\n";
  os << "char_dim=" << c.char_dim << "\n";
  os << "dropout_input=" << format_double(c.dropout_input) << "\n";
  os << "dropout_output=" << format_double(c.dropout_output) << "\n";
  os << "seed=" << c.seed << "\n";
  os << "word_table_trainable=" << (m.word_table.trainable ? 1 : 0) << "\n";
  for (const std::string& s : words.symbols()) os << "wv=" << s << "\n";
  for (const std::string& s : chars.symbols()) os << "cv=" << s << "\n";
  return os.str();
}

}  // namespace

void save_model(const std::string& path, const ModelParams<float>& m,
                const Vocab& words, const Vocab& chars) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  std::string meta = metadata_text(m, words, chars);
  put_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  std::uint32_t count = 0;
  m.for_each_param([&](const std::string&, const Tensor<float>&) { ++count; });
  put_u32(out, count);
  m.for_each_param([&](const std::string& name, const Tensor<float>& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (std::size_t i = 0; i < t.size(); ++i) put_f32(out, t[i]);
  });
  if (!out) throw ValidationError("failed writing model file " + path);
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + " is not an OTEM model file");
  std::uint32_t version = get_u32(in, "version");
  if (version != kVersion)
    throw FormatError(path + ": unsupported format version " +
                      std::to_string(version));
  std::uint64_t meta_len = get_u64(in, "metadata length");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len)))
    throw FormatError(path + ": truncated metadata block");

  ModelConfig cfg;
  bool table_trainable = true;
  std::vector<std::string> word_symbols, char_symbols;
  std::istringstream ms(meta);
  std::string line;
  while (std::getline(ms, line)) {
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path + ": bad metadata line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "variant") {
      cfg.variant = variant_from_name(value);
    } else if (key == "word_vocab") {
      cfg.word_vocab = std::stoul(value);
    } else if (key == "char_vocab") {
      cfg.char_vocab = std::stoul(value);
    } else if (key == "word_dim") {
      cfg.word_dim = std::stoul(value);
    } else if (key == "hidden") {
      cfg.hidden = std::stoul(value);
    } else if (key == "char_dim") {
      cfg.char_dim = std::stoul(value);
    } else if (key == "dropout_input") {
      cfg.dropout_input = std::stod(value);
    } else if (key == "dropout_output") {
      cfg.dropout_output = std::stod(value);
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "word_table_trainable") {
      table_trainable = value != "0";
    } else if (key == "wv") {
      word_symbols.push_back(value);
    } else if (key == "cv") {
      char_symbols.push_back(value);
    } else {
      throw FormatError(path + ": unknown metadata key '" + key + "'");
    }
  }
  if (word_symbols.size() + Vocab::kReserved != cfg.word_vocab)
    throw FormatError(path + ": word vocabulary size mismatch");
  if (char_symbols.size() + Vocab::kReserved != cfg.char_vocab)
    throw FormatError(path + ": char vocabulary size mismatch");

  SavedModel out;
  out.words = Vocab::from_symbols(VocabKind::kWord, std::move(word_symbols));
  out.chars = Vocab::from_symbols(VocabKind::kChar, std::move(char_symbols));
  Rng rng(cfg.seed);
  out.params = init_model<float>(cfg, rng);  // shapes; data replaced below
  out.params.word_table.trainable = table_trainable;

  std::uint32_t count = get_u32(in, "parameter count");
  std::uint32_t expected = 0;
  out.params.for_each_param(
      [&](const std::string&, const Tensor<float>&) { ++expected; });
  if (count != expected)
    throw FormatError(path + ": expected " + std::to_string(expected) +
                      " parameters, file has " + std::to_string(count));

  out.params.for_each_param([&](const std::string& name, Tensor<float>& t) {
    std::uint32_t name_len = get_u32(in, "name length");
    std::string got(name_len, '\0');
    if (!in.read(got.data(), name_len))
      throw FormatError(path + ": truncated parameter name");
    if (got != name)
      throw FormatError(path + ": expected parameter '" + name + "', found '" +
                        got + "'");
    std::uint32_t rank = get_u32(in, name + " rank");
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i)
      shape[i] = static_cast<std::size_t>(get_u64(in, name + " dims"));
    if (shape != t.shape())
      throw FormatError(path + ": parameter " + name + " has shape " +
                        shape_str(shape) + ", model config needs " +
                        shape_str(t.shape()));
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = get_f32(in, name + " data");
  });
  return out;
}

}  // namespace ote
