#include "lasr/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lasr/error.hpp"
#include "lasr/rng.hpp"

namespace lasr {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// days_from_civil), so day arithmetic never touches the C locale or tzdata.
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

bool looks_like_iso_timestamp(const std::string& field) {
  return field.size() >= 10 && field[4] == '-' && field[7] == '-';
}

int64_t parse_timestamp(const std::string& field, bool iso_format) {
  if (!iso_format) {
    size_t consumed = 0;
    int64_t seconds = 0;
    try {
      seconds = std::stoll(field, &consumed);
    } catch (const std::exception&) {
      throw DataError("bad epoch timestamp: '" + field + "'");
    }
    if (consumed != field.size()) {
      throw DataError("bad epoch timestamp: '" + field + "'");
    }
    return seconds;
  }
  int year, month, day, hour = 0, minute = 0, second = 0;
  const int matched = std::sscanf(field.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d", &year,
                                  &month, &day, &hour, &minute, &second);
  if (matched < 3 || month < 1 || month > 12 || day < 1 || day > 31) {
    throw DataError("bad ISO-8601 timestamp: '" + field + "'");
  }
  return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

std::vector<Event> read_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open events file: " + path);
  std::vector<Event> events;
  std::string line;
  size_t line_no = 0;
  bool format_known = false;
  bool iso_format = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 3) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[2].empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty user or item token");
    }
    if (!format_known) {
      iso_format = looks_like_iso_timestamp(fields[1]);
      format_known = true;
    }
    int64_t ts;
    try {
      ts = parse_timestamp(fields[1], iso_format);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad timestamp '" + fields[1] + "'");
    }
    events.push_back(Event{fields[0], ts, fields[2]});
  }
  return events;
}

void sort_events(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.timestamp < b.timestamp;
  });
}

std::vector<TokenPair> extract_pairs(const std::vector<Event>& events) {
  std::vector<TokenPair> pairs;
  for (size_t i = 0; i + 1 < events.size(); ++i) {
    const Event& a = events[i];
    const Event& b = events[i + 1];
    if (a.user > b.user || (a.user == b.user && a.timestamp > b.timestamp)) {
      throw DataError("events not sorted by (user, timestamp) at record " +
                      std::to_string(i + 2));
    }
    if (a.user == b.user) pairs.emplace_back(a.item, b.item);
  }
  return pairs;
}

std::pair<std::vector<Event>, std::vector<Event>> split_by_day(
    const std::vector<Event>& events, const SplitRule& rule) {
  if (rule.test_day_modulus < 2) throw ConfigError("test day modulus must be >= 2");
  std::pair<std::vector<Event>, std::vector<Event>> out;
  if (events.empty()) return out;
  int64_t first_day = floor_div(events.front().timestamp, 86400);
  for (const Event& e : events) {
    first_day = std::min(first_day, floor_div(e.timestamp, 86400));
  }
  for (const Event& e : events) {
    const int64_t ordinal = floor_div(e.timestamp, 86400) - first_day;
    if (ordinal % rule.test_day_modulus ==
        static_cast<int64_t>(rule.test_day_modulus) - 1) {
      out.second.push_back(e);
    } else {
      out.first.push_back(e);
    }
  }
  return out;
}

uint32_t Vocab::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::optional<uint32_t> Vocab::lookup(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open vocab file for writing: " + path);
  for (uint32_t i = 0; i < size(); ++i) {
    out << tokens_[i] << '\t' << i << '\n';
  }
  if (!out) throw IoError("write failed for vocab file: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file: " + path);
  Vocab v;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 2) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected `token<TAB>index`");
    }
    const uint32_t idx = v.add(fields[0]);
    if (idx != static_cast<uint32_t>(std::stoul(fields[1]))) {
      throw DataError(path + ":" + std::to_string(line_no) + ": non-dense vocab index");
    }
  }
  return v;
}

std::pair<Vocab, Vocab> build_vocab(const std::vector<TokenPair>& pairs) {
  if (pairs.empty()) throw DataError("cannot build vocabularies from zero pairs");
  Vocab query_vocab, item_vocab;
  for (const TokenPair& p : pairs) {
    query_vocab.add(p.first);
    item_vocab.add(p.second);
  }
  return {std::move(query_vocab), std::move(item_vocab)};
}

std::pair<std::vector<TokenPair>, std::vector<TokenPair>> hold_out_validation(
    const std::vector<TokenPair>& pairs, size_t count, uint64_t seed) {
  if (count >= pairs.size() && count != 0) {
    throw ConfigError("validation holdout of " + std::to_string(count) +
                      " needs more than " + std::to_string(pairs.size()) + " pairs");
  }
  std::vector<char> held(pairs.size(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates over the index range.
  std::vector<uint32_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + rng.uniform_u32(static_cast<uint32_t>(order.size() - i));
    std::swap(order[i], order[j]);
    held[order[i]] = 1;
  }
  std::pair<std::vector<TokenPair>, std::vector<TokenPair>> out;
  for (size_t i = 0; i < pairs.size(); ++i) {
    (held[i] ? out.second : out.first).push_back(pairs[i]);
  }
  return out;
}

void save_pairs(const std::vector<TokenPair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open pairs file for writing: " + path);
  for (const TokenPair& p : pairs) {
    out << p.first << '\t' << p.second << '\n';
  }
  if (!out) throw IoError("write failed for pairs file: " + path);
}

std::vector<TokenPair> load_token_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pairs file: " + path);
  std::vector<TokenPair> pairs;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 2) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected `query<TAB>item`");
    }
    pairs.emplace_back(fields[0], fields[1]);
  }
  return pairs;
}

PairSet map_pairs(const std::vector<TokenPair>& pairs, const Vocab& query_vocab,
                  const Vocab& item_vocab, size_t* skipped_oov) {
  PairSet set;
  set.query_vocab = query_vocab;
  set.item_vocab = item_vocab;
  size_t skipped = 0;
  for (const TokenPair& p : pairs) {
    const auto q = query_vocab.lookup(p.first);
    const auto d = item_vocab.lookup(p.second);
    if (!q || !d) {
      ++skipped;
      continue;
    }
    set.pairs.emplace_back(*q, *d);
  }
  if (skipped_oov) *skipped_oov = skipped;
  return set;
}

}  // namespace lasr
