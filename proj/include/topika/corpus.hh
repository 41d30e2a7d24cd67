// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace topika {

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& what) : std::runtime_error(what) {}
  CorpusError(std::size_t line, const std::string& what);

  // 1-based input line the error refers to, 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

// One non-zero cell of the document-word count matrix.
struct Entry {
  std::uint32_t doc;
  std::uint32_t word;
  std::uint32_t count;

  bool operator==(const Entry&) const = default;
};

// Tokens expanded document-major; within a document, entry order with repeats
// of the same word consecutive.
struct TokenStream {
  std::vector<std::uint32_t> word;
  std::vector<std::uint32_t> doc;
  // token range of document j is [doc_begin[j], doc_begin[j + 1])
  std::vector<std::size_t> doc_begin;

  std::size_t size() const { return word.size(); }
};

// Immutable bag-of-words corpus with 0-based ids. Entries are stored grouped by
// document (stable with respect to input order within a document).
class Corpus {
 public:
  enum class EmptyDocs { kReject, kAllow };

  Corpus() = default;
  Corpus(std::size_t num_docs, std::size_t vocab_size, std::vector<Entry> entries,
         std::vector<std::string> vocab = {}, EmptyDocs empty_docs = EmptyDocs::kReject);

  std::size_t num_docs() const { return num_docs_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t total_tokens() const { return total_tokens_; }
  std::size_t num_entries() const { return entries_.size(); }

  std::span<const Entry> entries() const { return entries_; }
  std::span<const Entry> doc_entries(std::size_t j) const {
    return std::span<const Entry>(entries_).subspan(doc_offsets_[j],
                                                     doc_offsets_[j + 1] - doc_offsets_[j]);
  }
  std::size_t doc_length(std::size_t j) const { return doc_lengths_[j]; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  TokenStream tokens() const;

  // Documents `ids` (in the given order) renumbered 0..ids.size()-1.
  Corpus subset(std::span<const std::size_t> ids) const;

  bool operator==(const Corpus& other) const {
    return num_docs_ == other.num_docs_ && vocab_size_ == other.vocab_size_ &&
           entries_ == other.entries_ && vocab_ == other.vocab_;
  }

 private:
  std::size_t num_docs_ = 0;
  std::size_t vocab_size_ = 0;
  std::size_t total_tokens_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::size_t> doc_offsets_{0};
  std::vector<std::size_t> doc_lengths_;
  std::vector<std::string> vocab_;
};

struct SplitCorpus {
  Corpus train;
  Corpus validation;
  Corpus test;
  // Original document id of every document in each part.
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> validation_ids;
  std::vector<std::size_t> test_ids;
};

struct FoldInSplit {
  Corpus observed_half;
  Corpus heldout_half;
};

// UCI bag-of-words: header lines D, W, NNZ then NNZ "docID wordID count"
// triples with 1-based ids. The vocabulary stream, if given, has one word per
// line with line i naming word id i.
Corpus load_uci_bow(std::istream& docword, std::istream* vocab = nullptr);
Corpus load_uci_bow(const std::filesystem::path& docword,
                    const std::filesystem::path& vocab = {});

void write_uci_bow(std::ostream& out, const Corpus& corpus);
void write_uci_bow(const std::filesystem::path& path, const Corpus& corpus);

SplitCorpus split_corpus(const Corpus& corpus, std::size_t test_docs,
                         std::size_t validation_docs, std::uint64_t seed);

// Per document, tokens are shuffled and the first ceil(N_j / 2) go to the
// observed half. Single-token documents leave the held-out side empty.
FoldInSplit fold_in_split(const Corpus& corpus, std::uint64_t seed);

}  // namespace topika
