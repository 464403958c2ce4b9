#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lasr {

// One playback/interaction event. Timestamps are seconds since epoch, UTC.
struct Event {
  std::string user;
  int64_t timestamp = 0;
  std::string item;
};

struct SplitRule {
  uint32_t test_day_modulus = 5;
};

using TokenPair = std::pair<std::string, std::string>;

// Dense token <-> index map; indices assigned in first-occurrence order.
class Vocab {
 public:
  uint32_t add(const std::string& token);
  std::optional<uint32_t> lookup(const std::string& token) const;
  const std::string& token(uint32_t index) const { return tokens_[index]; }
  uint32_t size() const { return static_cast<uint32_t>(tokens_.size()); }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::unordered_map<std::string, uint32_t> index_;
  std::vector<std::string> tokens_;
};

// Index-level training/evaluation pairs plus the vocabularies they refer to.
struct PairSet {
  std::vector<std::pair<uint32_t, uint32_t>> pairs;  // (query index, item index)
  Vocab query_vocab;
  Vocab item_vocab;

  uint32_t D_q() const { return query_vocab.size(); }
  uint32_t D_items() const { return item_vocab.size(); }
};

// Events file: `user<TAB>timestamp<TAB>item` per line, UTF-8. The timestamp
// column is ISO-8601 (UTC) or integer epoch seconds, detected once per file.
std::vector<Event> read_events(const std::string& path);

// Adjacent same-user event pairs, earlier item -> later item. Input must be
// sorted by (user, timestamp); unsorted input is an error, not a re-sort.
std::vector<TokenPair> extract_pairs(const std::vector<Event>& events);

// Stable (user, timestamp) ordering for raw logs before extraction.
void sort_events(std::vector<Event>& events);

// Calendar-day split: counting UTC days from the earliest one, every day
// with ordinal % modulus == modulus-1 goes to test. Pair extraction then
// runs per split so no pair crosses the boundary.
std::pair<std::vector<Event>, std::vector<Event>> split_by_day(
    const std::vector<Event>& events, const SplitRule& rule);

// First-occurrence vocabularies over the query and item columns.
std::pair<Vocab, Vocab> build_vocab(const std::vector<TokenPair>& pairs);

// Uniform random disjoint holdout of `count` pairs, seed-deterministic.
std::pair<std::vector<TokenPair>, std::vector<TokenPair>> hold_out_validation(
    const std::vector<TokenPair>& pairs, size_t count, uint64_t seed);

// Pairs file: `query_token<TAB>item_token` per line.
void save_pairs(const std::vector<TokenPair>& pairs, const std::string& path);
std::vector<TokenPair> load_token_pairs(const std::string& path);

// Maps token pairs onto vocab indices. Pairs with an out-of-vocabulary query
// or item are skipped and counted.
PairSet map_pairs(const std::vector<TokenPair>& pairs, const Vocab& query_vocab,
                  const Vocab& item_vocab, size_t* skipped_oov = nullptr);

int64_t parse_timestamp(const std::string& field, bool iso_format);
bool looks_like_iso_timestamp(const std::string& field);

}  // namespace lasr
