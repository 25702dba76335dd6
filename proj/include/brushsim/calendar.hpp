#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace brushsim {

inline constexpr int kSessionsPerDay = 2;
inline constexpr int kFittingDays = 28;    // length of the observational study
inline constexpr int kGenerationDays = 70; // length of a simulated study

// Decision-index convention: t >= 1, odd = morning, even = evening.
inline int day_of_decision(int t) { return (t + 1) / 2; }
inline bool is_morning(int t) { return t % 2 == 1; }
inline int time_of_day(int t) { return is_morning(t) ? 0 : 1; }

// Day 1 is anchored to a Monday unless an offset shifts the calendar.
inline bool is_weekend(int day, int weekday_offset = 0) {
  int r = (day - 1 + weekday_offset) % 7;
  if (r < 0) r += 7;
  return r >= 5;
}

inline double normalize_duration(double seconds) { return (seconds - 172.0) / 118.0; }

enum class DayNorm { Fitting, Generation };

// Maps the first day of the mode's range to -1 and the last to +1.
inline double normalize_day(int day, DayNorm mode) {
  const int last = (mode == DayNorm::Fitting) ? kFittingDays : kGenerationDays;
  if (day < 1 || day > last) {
    throw std::out_of_range("normalize_day: day " + std::to_string(day) +
                            " out of [1, " + std::to_string(last) + "]");
  }
  if (mode == DayNorm::Fitting) return (day - 14.5) / 13.5;
  return (day - 35.5) / 34.5;
}

}  // namespace brushsim
