// src/text/vocab.cpp
#include "fpg/text/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "fpg/error.hpp"

namespace fpg::text {

namespace {

constexpr std::string_view kReservedNames[kNumReserved] = {"<pad>", "<bos>", "<eos>", "<unk>"};

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      if (c == '<' && text.substr(i, 5).size() == 5 && to_lower(text.substr(i, 5)) == "<unk>") {
        flush();
        words.emplace_back("<unk>");
        i += 4;
        continue;
      }
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c));
    }
  }
  flush();
  return words;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words = split_words(text);
  for (std::string& w : words) {
    w = to_lower(w);
  }
  return words;
}

Vocab::Vocab() {
  for (std::string_view name : kReservedNames) {
    append(std::string(name));
  }
}

void Vocab::append(std::string surface) {
  std::string token = to_lower(surface);
  if (token.empty()) {
    throw Error("vocabulary tokens must be non-empty");
  }
  if (!index_.emplace(token, static_cast<TokenId>(tokens_.size())).second) {
    throw Error("duplicate vocabulary token '" + token + "'");
  }
  tokens_.push_back(std::move(token));
  surfaces_.push_back(std::move(surface));
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t min_freq, std::size_t max_size) {
  if (max_size <= kNumReserved) {
    throw Error("vocabulary max_size must exceed the 4 reserved tokens");
  }
  std::map<std::string, std::size_t> freq;
  std::map<std::string, std::map<std::string, std::size_t>> surface_freq;
  for (const std::string& text : texts) {
    for (std::string& word : split_words(text)) {
      std::string token = to_lower(word);
      if (token == "<unk>") {
        continue;
      }
      ++freq[token];
      ++surface_freq[token][std::move(word)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [token, count] : freq) {
    if (count >= min_freq) {
      ranked.emplace_back(token, count);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - kNumReserved) {
    ranked.resize(max_size - kNumReserved);
  }
  Vocab vocab;
  for (const auto& [token, count] : ranked) {
    // most frequent casing, lexicographically smallest on ties
    const auto& forms = surface_freq[token];
    auto best = forms.begin();
    for (auto it = forms.begin(); it != forms.end(); ++it) {
      if (it->second > best->second) {
        best = it;
      }
    }
    vocab.append(best->first);
  }
  return vocab;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open vocabulary file " + path.string());
  }
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    try {
      vocab.append(line);
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return vocab;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write vocabulary file " + path.string());
  }
  for (std::size_t i = kNumReserved; i < surfaces_.size(); ++i) {
    out << surfaces_[i] << '\n';
  }
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

TokenId Vocab::id(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

const std::string& Vocab::surface(TokenId id) const {
  token(id);
  return surfaces_[static_cast<std::size_t>(id)];
}

TokenSeq encode(std::string_view text, const Vocab& vocab, std::size_t max_len, bool add_eos) {
  if (max_len < 2) {
    throw Error("encode: max_len must be at least 2");
  }
  const std::vector<std::string> words = tokenize(text);
  const std::size_t room = add_eos ? max_len - 1 : max_len;
  TokenSeq seq;
  seq.ids.reserve(max_len);
  for (std::size_t i = 0; i < words.size() && i < room; ++i) {
    seq.ids.push_back(vocab.id(words[i]));
  }
  if (add_eos) {
    seq.ids.push_back(kEos);
  }
  seq.true_length = seq.ids.size();
  seq.ids.resize(max_len, kPad);
  return seq;
}

namespace {

std::string join_tokens(std::span<const TokenId> ids, const Vocab& vocab, bool display) {
  std::string out;
  for (TokenId id : ids) {
    const std::string& tok = display ? vocab.surface(id) : vocab.token(id);
    if (id == kPad || id == kBos || id == kEos) {
      continue;
    }
    if (!out.empty()) {
      out.push_back(' ');
    }
    out += tok;
  }
  return out;
}

}  // namespace

std::string decode(std::span<const TokenId> ids, const Vocab& vocab) {
  return join_tokens(ids, vocab, false);
}

std::string decode(const TokenSeq& seq, const Vocab& vocab) { return decode(std::span(seq.ids), vocab); }

std::string decode_display(std::span<const TokenId> ids, const Vocab& vocab) {
  return join_tokens(ids, vocab, true);
}

}  // namespace fpg::text
