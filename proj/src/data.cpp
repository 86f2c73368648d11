#include "ote/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "ote/error.hpp"

namespace ote {

namespace {

bool is_space_byte(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct_byte(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::size_t parse_offset(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    throw ValidationError("bad " + what + " offset '" + s + "'");
  }
  if (pos != s.size()) throw ValidationError("bad " + what + " offset '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

Vocab Vocab::from_symbols(VocabKind kind, std::vector<std::string> symbols) {
  Vocab v(kind);
  v.symbols_ = std::move(symbols);
  v.index_.reserve(v.symbols_.size());
  for (std::size_t i = 0; i < v.symbols_.size(); ++i) {
    if (!v.index_.emplace(v.symbols_[i], i + kReserved).second) {
      throw ValidationError("duplicate vocabulary symbol '" + v.symbols_[i] +
                            "'");
    }
  }
  return v;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto push = [&](std::size_t b, std::size_t e) {
    tokens.push_back(Token{std::string(text.substr(b, e - b)), b, e});
  };
  while (i < n) {
    while (i < n && is_space_byte(text[i])) ++i;
    if (i >= n) break;
    std::size_t b = i;
    while (i < n && !is_space_byte(text[i])) ++i;
    std::size_t e = i;
    // peel leading punctuation characters
    while (b < e && is_punct_byte(text[b]) && e - b > 1) {
      push(b, b + 1);
      ++b;
    }
    // peel trailing punctuation characters, preserving order
    std::size_t tail = e;
    while (tail > b + 1 && is_punct_byte(text[tail - 1])) --tail;
    push(b, tail);
    for (std::size_t p = tail; p < e; ++p) push(p, p + 1);
  }
  return tokens;
}

std::vector<TokenSpan> align_spans(const std::vector<Token>& tokens,
                                   const std::vector<CharSpan>& spans,
                                   IngestStats* stats) {
  std::vector<TokenSpan> aligned;
  for (const CharSpan& cs : spans) {
    bool found = false;
    std::size_t first = 0, last = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (tokens[t].begin < cs.to && tokens[t].end > cs.from) {
        if (!found) first = t;
        last = t;
        found = true;
      }
    }
    if (!found) {
      if (stats) ++stats->dropped_unaligned;
      continue;
    }
    aligned.push_back(TokenSpan{first, last});
  }
  std::sort(aligned.begin(), aligned.end());
  aligned.erase(std::unique(aligned.begin(), aligned.end()), aligned.end());
  // merge any remaining overlap into a union span
  std::vector<TokenSpan> merged;
  for (const TokenSpan& s : aligned) {
    if (!merged.empty() && s.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
      if (stats) ++stats->merged_overlaps;
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

Corpus parse_semeval_xml(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(path, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("XML parse error in " + path + " line " +
                     std::to_string(e.line()) + ": " + e.message());
  }

  Corpus corpus;
  std::set<std::string> seen_ids;
  auto reviews = tree.get_child_optional("Reviews");
  if (!reviews) throw ParseError(path + ": missing Reviews root element");
  for (const auto& [review_name, review] : *reviews) {
    if (review_name != "Review") continue;
    auto sentences = review.get_child_optional("sentences");
    if (!sentences) continue;
    for (const auto& [sent_name, sent] : *sentences) {
      if (sent_name != "sentence") continue;
      Sentence s;
      s.id = sent.get<std::string>("<xmlattr>.id", "");
      s.text = sent.get<std::string>("text", "");
      if (!s.id.empty() && !seen_ids.insert(s.id).second) {
        throw ValidationError("duplicate sentence id '" + s.id + "' in " +
                              path);
      }
      std::vector<CharSpan> char_spans;
      if (auto opinions = sent.get_child_optional("Opinions")) {
        for (const auto& [op_name, op] : *opinions) {
          if (op_name != "Opinion") continue;
          std::string target = op.get<std::string>("<xmlattr>.target", "NULL");
          if (target == "NULL") continue;
          CharSpan cs;
          cs.from = parse_offset(op.get<std::string>("<xmlattr>.from", "0"), "from");
          cs.to = parse_offset(op.get<std::string>("<xmlattr>.to", "0"), "to");
          if (cs.from >= cs.to || cs.to > s.text.size()) {
            throw ValidationError("opinion span [" + std::to_string(cs.from) +
                                  "," + std::to_string(cs.to) +
                                  ") outside sentence '" + s.id + "'");
          }
          if (std::find(char_spans.begin(), char_spans.end(), cs) !=
              char_spans.end()) {
            ++corpus.stats.duplicate_opinions;
            continue;
          }
          char_spans.push_back(cs);
        }
      }
      s.tokens = tokenize(s.text);
      s.gold = align_spans(s.tokens, char_spans, &corpus.stats);
      corpus.sentences.push_back(std::move(s));
    }
  }
  return corpus;
}

Corpus read_conll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  Corpus corpus;
  std::vector<std::string> words;
  TagSequence tags;
  std::size_t line_no = 0;
  auto flush = [&]() {
    if (words.empty()) return;
    Sentence s;
    s.id = "s" + std::to_string(corpus.sentences.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) {
        s.text += ' ';
        ++off;
      }
      s.tokens.push_back(Token{words[i], off, off + words[i].size()});
      s.text += words[i];
      off += words[i].size();
    }
    s.gold = decode_tags(tags);
    corpus.sentences.push_back(std::move(s));
    words.clear();
    tags.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 2 != line.size()) {
      throw FormatError(path + " line " + std::to_string(line_no) +
                        ": expected 'token<TAB>tag'");
    }
    words.push_back(line.substr(0, tab));
    tags.push_back(tag_from_char(line[tab + 1]));
  }
  flush();
  return corpus;
}

Corpus read_plain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Sentence s;
    s.id = "s" + std::to_string(corpus.sentences.size());
    s.text = line;
    s.tokens = tokenize(s.text);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

namespace {

std::map<std::string, std::size_t> symbol_counts(const Corpus& corpus,
                                                 VocabKind kind) {
  std::map<std::string, std::size_t> counts;
  for (const Sentence& s : corpus.sentences) {
    for (const Token& t : s.tokens) {
      if (kind == VocabKind::kWord) {
        ++counts[lowercase(t.text)];
      } else {
        for (char c : t.text) ++counts[std::string(1, c)];
      }
    }
  }
  return counts;
}

std::vector<std::string> ranked_symbols(
    const std::map<std::string, std::size_t>& counts) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(),
                                                         counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [sym, cnt] : items) {
    (void)cnt;
    out.push_back(sym);
  }
  return out;
}

}  // namespace

Vocab build_vocab(const Corpus& corpus, VocabKind kind, std::size_t max_size) {
  if (max_size == 0) throw ValidationError("vocabulary max_size must be >= 1");
  if (corpus.sentences.empty())
    throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::vector<std::string> ranked = ranked_symbols(symbol_counts(corpus, kind));
  if (ranked.size() > max_size) ranked.resize(max_size);
  return Vocab::from_symbols(kind, std::move(ranked));
}

std::vector<std::string> ranked_words(const Corpus& corpus) {
  return ranked_symbols(symbol_counts(corpus, VocabKind::kWord));
}

LoadedEmbeddings load_embeddings(const std::string& path, const Vocab& vocab,
                                 std::size_t dim, Rng& rng) {
  if (dim == 0) throw ValidationError("embedding dimension must be >= 1");
  LoadedEmbeddings out;
  double bound = 0.5 / static_cast<double>(dim);
  out.matrix = Tensor<float>(Shape{dim, vocab.size()});
  for (std::size_t i = 0; i < out.matrix.size(); ++i)
    out.matrix[i] = static_cast<float>(rng.uniform(-bound, bound));

  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<bool> filled(vocab.size(), false);
  std::size_t found = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (first) {
      first = false;
      // optional "count dim" header
      std::string second, extra;
      std::istringstream probe(line);
      std::string a, b;
      if ((probe >> a >> b) && !(probe >> extra) &&
          a.find_first_not_of("0123456789") == std::string::npos &&
          b.find_first_not_of("0123456789") == std::string::npos) {
        if (std::stoul(b) != dim) {
          throw FormatError(path + " line 1: header dimension " + b +
                            " does not match requested " +
                            std::to_string(dim));
        }
        continue;
      }
    }
    std::vector<float> values;
    values.reserve(dim);
    double v;
    while (ss >> v) values.push_back(static_cast<float>(v));
    if (values.size() != dim) {
      throw FormatError(path + " line " + std::to_string(line_no) +
                        ": expected " + std::to_string(dim) +
                        " values, got " + std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    std::size_t idx = vocab.lookup(token);
    if (filled[idx]) {
      ++out.duplicates;
      continue;
    }
    filled[idx] = true;
    ++found;
    for (std::size_t r = 0; r < dim; ++r) out.matrix.at(r, idx) = values[r];
  }
  std::size_t non_reserved = vocab.size() - Vocab::kReserved;
  out.coverage = non_reserved == 0
                     ? 0.0
                     : static_cast<double>(found) /
                           static_cast<double>(non_reserved);
  return out;
}

std::vector<std::pair<std::string, std::vector<float>>> read_embedding_entries(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<float> values;
    double v;
    while (ss >> v) values.push_back(static_cast<float>(v));
    if (first) {
      first = false;
      if (values.size() == 1 &&
          token.find_first_not_of("0123456789") == std::string::npos) {
        continue;  // "count dim" header
      }
      dim = values.size();
      if (dim == 0)
        throw FormatError(path + " line " + std::to_string(line_no) +
                          ": no embedding values");
    }
    if (values.empty()) continue;
    if (dim == 0) dim = values.size();
    if (values.size() != dim) {
      throw FormatError(path + " line " + std::to_string(line_no) +
                        ": expected " + std::to_string(dim) +
                        " values, got " + std::to_string(values.size()));
    }
    entries.emplace_back(std::move(token), std::move(values));
  }
  return entries;
}

EncodedSentence encode_sentence(const Sentence& s, const Vocab& words,
                                const Vocab& chars) {
  EncodedSentence enc;
  enc.word_ids.reserve(s.tokens.size());
  enc.char_ids.reserve(s.tokens.size());
  for (const Token& t : s.tokens) {
    enc.word_ids.push_back(words.lookup(lowercase(t.text)));
    std::vector<std::size_t> cs;
    cs.reserve(t.text.size());
    for (char c : t.text) cs.push_back(chars.lookup(std::string(1, c)));
    enc.char_ids.push_back(std::move(cs));
  }
  enc.gold = encode_tags(s.tokens.size(), s.gold);
  return enc;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size == 0) throw ValidationError("batch size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(Rng::seed_mix(seed, epoch));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < count; i += batch_size) {
    std::size_t e = std::min(count, i + batch_size);
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                        order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return groups;
}

}  // namespace ote
