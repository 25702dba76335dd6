#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "brushsim/calendar.hpp"

namespace brushsim {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SessionRecord {
  std::string user_id;
  int day = 1;          // 1-based day in study
  int time_of_day = 0;  // 0 = morning, 1 = evening
  int duration = 0;     // seconds, >= 0
};

// One user's sessions, stored as durations indexed by decision time t = 1..T.
struct UserSessions {
  std::string user_id;
  std::vector<int> durations;  // durations[t-1] is the duration at decision time t

  int num_decisions() const { return static_cast<int>(durations.size()); }
  int num_days() const { return num_decisions() / kSessionsPerDay; }
};

struct Corpus {
  std::vector<UserSessions> users;  // ordered by user id

  const UserSessions* find(const std::string& id) const {
    for (const auto& u : users)
      if (u.user_id == id) return &u;
    return nullptr;
  }
};

struct ColumnMap {
  std::string user = "user_id";
  std::string day = "day";
  std::string session = "session";   // 0 = morning, 1 = evening
  std::string duration = "duration"; // integer seconds
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    // Accept "123" and "123.0"-style values that are exactly integral.
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw ParseError("trailing characters in " + what + ": '" + s + "'");
    int iv = static_cast<int>(v);
    if (static_cast<double>(iv) != v)
      throw ParseError("non-integer " + what + ": '" + s + "'");
    return iv;
  } catch (const std::invalid_argument&) {
    throw ParseError("cannot parse " + what + ": '" + s + "'");
  } catch (const std::out_of_range&) {
    throw ParseError("out-of-range " + what + ": '" + s + "'");
  }
}

}  // namespace detail

// Reads a delimited text corpus with a header row. Each user must have
// exactly two sessions (morning, evening) per day for contiguous days 1..D.
inline Corpus load_corpus(const std::string& path, const ColumnMap& cols, char delim = ',') {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open corpus file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw SchemaError("empty corpus file: " + path);
  const auto names = detail::split_line(header, delim);
  auto col_index = [&](const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw SchemaError("missing column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t ci_user = col_index(cols.user);
  const std::size_t ci_day = col_index(cols.day);
  const std::size_t ci_session = col_index(cols.session);
  const std::size_t ci_duration = col_index(cols.duration);

  std::vector<SessionRecord> records;
  std::set<std::tuple<std::string, int, int>> seen;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = detail::split_line(line, delim);
    const std::size_t needed = std::max({ci_user, ci_day, ci_session, ci_duration}) + 1;
    if (fields.size() < needed)
      throw ParseError("line " + std::to_string(lineno) + ": too few fields");
    SessionRecord r;
    r.user_id = fields[ci_user];
    r.day = detail::parse_int(fields[ci_day], "day");
    r.time_of_day = detail::parse_int(fields[ci_session], "session");
    r.duration = detail::parse_int(fields[ci_duration], "duration");
    if (r.day < 1) throw ParseError("line " + std::to_string(lineno) + ": day < 1");
    if (r.time_of_day != 0 && r.time_of_day != 1)
      throw ParseError("line " + std::to_string(lineno) + ": session must be 0 or 1");
    if (r.duration < 0)
      throw ParseError("line " + std::to_string(lineno) + ": negative duration");
    if (!seen.insert({r.user_id, r.day, r.time_of_day}).second)
      throw IntegrityError("duplicate (user, day, session) at line " + std::to_string(lineno));
    records.push_back(std::move(r));
  }

  std::map<std::string, std::vector<SessionRecord>> by_user;
  for (auto& r : records) by_user[r.user_id].push_back(r);

  Corpus corpus;
  for (auto& [id, recs] : by_user) {
    int max_day = 0;
    for (const auto& r : recs) max_day = std::max(max_day, r.day);
    if (static_cast<int>(recs.size()) != max_day * kSessionsPerDay)
      throw IntegrityError("user " + id + ": expected " +
                           std::to_string(max_day * kSessionsPerDay) +
                           " sessions for days 1.." + std::to_string(max_day) +
                           ", got " + std::to_string(recs.size()));
    UserSessions u;
    u.user_id = id;
    u.durations.assign(static_cast<std::size_t>(max_day) * kSessionsPerDay, -1);
    for (const auto& r : recs) {
      const int t = (r.day - 1) * kSessionsPerDay + r.time_of_day + 1;
      u.durations[t - 1] = r.duration;
    }
    for (std::size_t i = 0; i < u.durations.size(); ++i)
      if (u.durations[i] < 0)
        throw IntegrityError("user " + id + ": missing session at decision time " +
                             std::to_string(i + 1));
    corpus.users.push_back(std::move(u));
  }
  return corpus;
}

enum class BaseVariant { Stationary, NonStationary };

inline int env_baseline_dim(BaseVariant v) { return v == BaseVariant::Stationary ? 5 : 6; }
inline int env_advantage_dim(BaseVariant v) { return v == BaseVariant::Stationary ? 4 : 5; }

// Raw total brushing duration on the day before day_of_decision(t);
// 0 before any completed prior day (cold start).
inline int prior_day_total(std::span<const int> history, int t) {
  const int day = day_of_decision(t);
  if (day <= 1) return 0;
  int total = 0;
  for (int tod = 0; tod < kSessionsPerDay; ++tod) {
    const int s = (day - 2) * kSessionsPerDay + tod + 1;
    if (s <= static_cast<int>(history.size())) total += history[s - 1];
  }
  return total;
}

// Fraction of non-zero sessions among the sessions that exist within the
// trailing 7-day window before day_of_decision(t); 0 if no sessions exist.
inline double past7_nonzero_proportion(std::span<const int> history, int t) {
  const int day = day_of_decision(t);
  const int first_day = std::max(1, day - 7);
  int count = 0, nonzero = 0;
  for (int d = first_day; d < day; ++d) {
    for (int tod = 0; tod < kSessionsPerDay; ++tod) {
      const int s = (d - 1) * kSessionsPerDay + tod + 1;
      if (s <= static_cast<int>(history.size())) {
        ++count;
        if (history[s - 1] > 0) ++nonzero;
      }
    }
  }
  return count == 0 ? 0.0 : static_cast<double>(nonzero) / count;
}

// g(S): environment baseline features.
inline Eigen::VectorXd env_baseline_features(std::span<const int> history, int t,
                                             BaseVariant variant, DayNorm mode,
                                             int weekday_offset = 0) {
  const int day = day_of_decision(t);
  Eigen::VectorXd g(env_baseline_dim(variant));
  g(0) = 1.0;
  g(1) = time_of_day(t);
  g(2) = normalize_duration(prior_day_total(history, t));
  g(3) = is_weekend(day, weekday_offset) ? 1.0 : 0.0;
  g(4) = past7_nonzero_proportion(history, t);
  if (variant == BaseVariant::NonStationary) g(5) = normalize_day(day, mode);
  return g;
}

// h(S): environment treatment-effect features.
inline Eigen::VectorXd env_advantage_features(std::span<const int> history, int t,
                                              BaseVariant variant, DayNorm mode,
                                              int weekday_offset = 0) {
  const int day = day_of_decision(t);
  Eigen::VectorXd h(env_advantage_dim(variant));
  h(0) = 1.0;
  h(1) = time_of_day(t);
  h(2) = normalize_duration(prior_day_total(history, t));
  h(3) = is_weekend(day, weekday_offset) ? 1.0 : 0.0;
  if (variant == BaseVariant::NonStationary) h(4) = normalize_day(day, mode);
  return h;
}

// Features seen by the decision-making algorithm. The advantage vector f
// is a prefix of the baseline vector m.
struct AlgFeatures {
  Eigen::Vector3d f;
  Eigen::Vector4d m;
};

inline AlgFeatures alg_features(std::span<const int> history, int t, int weekday_offset = 0) {
  const int day = day_of_decision(t);
  AlgFeatures out;
  out.f << 1.0, time_of_day(t), normalize_duration(prior_day_total(history, t));
  out.m << out.f(0), out.f(1), out.f(2), (is_weekend(day, weekday_offset) ? 1.0 : 0.0);
  return out;
}

}  // namespace brushsim
