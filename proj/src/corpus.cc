// Apache License, Version 2.0, refer to LICENSE.txt

#include "topika/corpus.hh"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

#include "topika/seeding.hh"

namespace topika {

CorpusError::CorpusError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

Corpus::Corpus(std::size_t num_docs, std::size_t vocab_size, std::vector<Entry> entries,
               std::vector<std::string> vocab, EmptyDocs empty_docs)
    : num_docs_(num_docs), vocab_size_(vocab_size), entries_(std::move(entries)),
      vocab_(std::move(vocab)) {
  if (!vocab_.empty() && vocab_.size() != vocab_size_) {
    throw CorpusError("vocabulary has " + std::to_string(vocab_.size()) + " words, expected " +
                      std::to_string(vocab_size_));
  }
  for (const Entry& e : entries_) {
    if (e.doc >= num_docs_) throw CorpusError("doc id " + std::to_string(e.doc) + " out of range");
    if (e.word >= vocab_size_) {
      throw CorpusError("word id " + std::to_string(e.word) + " out of range");
    }
    if (e.count < 1) throw CorpusError("entry count must be >= 1");
  }
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const Entry& a, const Entry& b) { return a.doc < b.doc; });

  doc_offsets_.assign(num_docs_ + 1, 0);
  doc_lengths_.assign(num_docs_, 0);
  for (const Entry& e : entries_) {
    ++doc_offsets_[e.doc + 1];
    doc_lengths_[e.doc] += e.count;
    total_tokens_ += e.count;
  }
  std::partial_sum(doc_offsets_.begin(), doc_offsets_.end(), doc_offsets_.begin());

  std::vector<std::size_t> seen(vocab_size_, num_docs_);
  for (const Entry& e : entries_) {
    if (seen[e.word] == e.doc) {
      throw CorpusError("duplicate entry for doc " + std::to_string(e.doc) + ", word " +
                        std::to_string(e.word));
    }
    seen[e.word] = e.doc;
  }
  if (empty_docs == EmptyDocs::kReject) {
    for (std::size_t j = 0; j < num_docs_; ++j) {
      if (doc_lengths_[j] == 0) throw CorpusError("document " + std::to_string(j) + " is empty");
    }
  }
}

TokenStream Corpus::tokens() const {
  TokenStream ts;
  ts.word.reserve(total_tokens_);
  ts.doc.reserve(total_tokens_);
  ts.doc_begin.reserve(num_docs_ + 1);
  for (std::size_t j = 0; j < num_docs_; ++j) {
    ts.doc_begin.push_back(ts.word.size());
    for (const Entry& e : doc_entries(j)) {
      ts.word.insert(ts.word.end(), e.count, e.word);
      ts.doc.insert(ts.doc.end(), e.count, e.doc);
    }
  }
  ts.doc_begin.push_back(ts.word.size());
  return ts;
}

Corpus Corpus::subset(std::span<const std::size_t> ids) const {
  std::vector<Entry> out;
  for (std::size_t n = 0; n < ids.size(); ++n) {
    for (const Entry& e : doc_entries(ids[n])) {
      out.push_back({static_cast<std::uint32_t>(n), e.word, e.count});
    }
  }
  return Corpus(ids.size(), vocab_size_, std::move(out), vocab_, EmptyDocs::kAllow);
}

namespace {

bool parse_uint(std::string_view s, std::uint64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

}  // namespace

Corpus load_uci_bow(std::istream& docword, std::istream* vocab_stream) {
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t header[3];
  const char* names[3] = {"D", "W", "NNZ"};
  for (int h = 0; h < 3; ++h) {
    if (!std::getline(docword, line)) {
      throw CorpusError(line_no + 1, std::string("malformed header: missing ") + names[h]);
    }
    ++line_no;
    auto fields = split_ws(line);
    if (fields.size() != 1 || !parse_uint(fields[0], header[h])) {
      throw CorpusError(line_no, std::string("malformed header: expected integer ") + names[h]);
    }
  }
  const std::uint64_t D = header[0], W = header[1], nnz = header[2];

  std::vector<Entry> entries;
  entries.reserve(nnz);
  while (std::getline(docword, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    std::uint64_t doc, word, count;
    if (fields.size() != 3 || !parse_uint(fields[0], doc) || !parse_uint(fields[1], word) ||
        !parse_uint(fields[2], count)) {
      throw CorpusError(line_no, "malformed entry, expected \"docID wordID count\"");
    }
    if (doc < 1 || doc > D) throw CorpusError(line_no, "doc id out of range");
    if (word < 1 || word > W) throw CorpusError(line_no, "word id out of range");
    if (count < 1) throw CorpusError(line_no, "count must be >= 1");
    if (entries.size() == nnz) {
      throw CorpusError(line_no, "entry count mismatch: more than NNZ=" + std::to_string(nnz) +
                                     " entries");
    }
    entries.push_back({static_cast<std::uint32_t>(doc - 1), static_cast<std::uint32_t>(word - 1),
                       static_cast<std::uint32_t>(count)});
  }
  if (entries.size() != nnz) {
    throw CorpusError(line_no, "entry count mismatch: header declares NNZ=" + std::to_string(nnz) +
                                   " but found " + std::to_string(entries.size()));
  }

  std::vector<std::string> vocab;
  if (vocab_stream != nullptr) {
    while (std::getline(*vocab_stream, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      vocab.push_back(line);
    }
    while (vocab.size() > W && vocab.back().empty()) vocab.pop_back();
    if (vocab.size() != W) {
      throw CorpusError("vocabulary has " + std::to_string(vocab.size()) + " lines, expected W=" +
                        std::to_string(W));
    }
  }

  try {
    return Corpus(D, W, std::move(entries), std::move(vocab));
  } catch (const CorpusError& e) {
    throw CorpusError(line_no, e.what());
  }
}

Corpus load_uci_bow(const std::filesystem::path& docword, const std::filesystem::path& vocab) {
  std::ifstream in(docword);
  if (!in) throw CorpusError("cannot open " + docword.string());
  if (vocab.empty()) return load_uci_bow(in);
  std::ifstream vin(vocab);
  if (!vin) throw CorpusError("cannot open " + vocab.string());
  return load_uci_bow(in, &vin);
}

void write_uci_bow(std::ostream& out, const Corpus& corpus) {
  out << corpus.num_docs() << '\n' << corpus.vocab_size() << '\n' << corpus.num_entries() << '\n';
  for (const Entry& e : corpus.entries()) {
    out << e.doc + 1 << ' ' << e.word + 1 << ' ' << e.count << '\n';
  }
}

void write_uci_bow(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  write_uci_bow(out, corpus);
}

SplitCorpus split_corpus(const Corpus& corpus, std::size_t test_docs, std::size_t validation_docs,
                         std::uint64_t seed) {
  if (test_docs + validation_docs >= corpus.num_docs()) {
    throw CorpusError("split sizes test=" + std::to_string(test_docs) + " validation=" +
                      std::to_string(validation_docs) + " leave no training documents (D=" +
                      std::to_string(corpus.num_docs()) + ")");
  }
  std::vector<std::size_t> order(corpus.num_docs());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> ids(order.begin() + begin, order.begin() + end);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  SplitCorpus split;
  split.test_ids = take(0, test_docs);
  split.validation_ids = take(test_docs, test_docs + validation_docs);
  split.train_ids = take(test_docs + validation_docs, order.size());
  split.train = corpus.subset(split.train_ids);
  split.validation = corpus.subset(split.validation_ids);
  split.test = corpus.subset(split.test_ids);
  return split;
}

FoldInSplit fold_in_split(const Corpus& corpus, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "fold-in"));
  std::vector<Entry> observed, heldout;
  std::vector<std::uint32_t> tokens;
  std::vector<std::uint32_t> obs_count(corpus.vocab_size(), 0), held_count(corpus.vocab_size(), 0);
  for (std::size_t j = 0; j < corpus.num_docs(); ++j) {
    auto doc = corpus.doc_entries(j);
    tokens.clear();
    for (const Entry& e : doc) tokens.insert(tokens.end(), e.count, e.word);
    std::shuffle(tokens.begin(), tokens.end(), rng);
    const std::size_t half = (tokens.size() + 1) / 2;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      ++(i < half ? obs_count : held_count)[tokens[i]];
    }
    for (const Entry& e : doc) {
      if (obs_count[e.word] > 0) observed.push_back({e.doc, e.word, obs_count[e.word]});
      if (held_count[e.word] > 0) heldout.push_back({e.doc, e.word, held_count[e.word]});
      obs_count[e.word] = held_count[e.word] = 0;
    }
  }
  return {Corpus(corpus.num_docs(), corpus.vocab_size(), std::move(observed), corpus.vocab(),
                 Corpus::EmptyDocs::kAllow),
          Corpus(corpus.num_docs(), corpus.vocab_size(), std::move(heldout), corpus.vocab(),
                 Corpus::EmptyDocs::kAllow)};
}

}  // namespace topika
