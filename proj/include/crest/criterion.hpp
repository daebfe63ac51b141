#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crest/error.hpp"

namespace crest {

/// Named sub-fields of a trouble-report observation.
enum class Criterion : std::uint8_t {
  TroubleDescription = 0,
  Impact,
  Condition,
  Frequency,
  Reproducibility,
};

inline constexpr std::size_t kCriterionCount = 5;

inline constexpr std::array<Criterion, kCriterionCount> kAllCriteria{
    Criterion::TroubleDescription, Criterion::Impact, Criterion::Condition, Criterion::Frequency,
    Criterion::Reproducibility};

/// Criteria that get their own specialized model. The trouble description is
/// part of every query instead.
inline constexpr std::array<Criterion, 4> kModelCriteria{Criterion::Impact, Criterion::Condition,
                                                         Criterion::Frequency, Criterion::Reproducibility};

constexpr std::size_t index_of(Criterion c) noexcept { return static_cast<std::size_t>(c); }

constexpr std::string_view name_of(Criterion c) noexcept {
  constexpr std::array<std::string_view, kCriterionCount> names{"trouble_description", "impact", "condition",
                                                                "frequency", "reproducibility"};
  return names[index_of(c)];
}

/// One-letter abbreviation used in dataset names (HTI, HTC, ...).
constexpr char letter_of(Criterion c) noexcept {
  constexpr std::array<char, kCriterionCount> letters{'T', 'I', 'C', 'F', 'R'};
  return letters[index_of(c)];
}

inline std::optional<Criterion> criterion_from_string(std::string_view s) {
  std::string lowered;
  for (char ch : s) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  for (Criterion c : kAllCriteria) {
    if (lowered == name_of(c)) return c;
    if (lowered.size() == 1 && std::toupper(static_cast<unsigned char>(lowered[0])) == letter_of(c)) return c;
  }
  if (lowered == "steps_to_reproduce" || lowered == "reproduce") return Criterion::Reproducibility;
  if (lowered == "description") return Criterion::TroubleDescription;
  return std::nullopt;
}

inline Criterion parse_criterion(std::string_view s) {
  if (auto c = criterion_from_string(s)) return *c;
  throw Error(Errc::InvalidArgument, "unknown criterion '" + std::string(s) + "'");
}

/// Small value-type set of criteria backed by a bitmask.
class CriterionSet {
 public:
  constexpr CriterionSet() = default;
  constexpr CriterionSet(std::initializer_list<Criterion> items) {
    for (Criterion c : items) insert(c);
  }

  static constexpr CriterionSet all() { return CriterionSet(0b11111); }
  static constexpr CriterionSet model_criteria() { return CriterionSet(0b11110); }

  constexpr bool contains(Criterion c) const noexcept { return (bits_ >> index_of(c)) & 1U; }
  constexpr void insert(Criterion c) noexcept { bits_ |= static_cast<std::uint8_t>(1U << index_of(c)); }
  constexpr void erase(Criterion c) noexcept { bits_ &= static_cast<std::uint8_t>(~(1U << index_of(c))); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::size_t size() const noexcept {
    std::size_t n = 0;
    for (std::uint8_t b = bits_; b; b &= static_cast<std::uint8_t>(b - 1)) ++n;
    return n;
  }
  constexpr std::uint8_t bits() const noexcept { return bits_; }

  constexpr CriterionSet operator&(CriterionSet o) const noexcept { return CriterionSet(bits_ & o.bits_); }
  constexpr CriterionSet operator|(CriterionSet o) const noexcept { return CriterionSet(bits_ | o.bits_); }
  constexpr CriterionSet without(Criterion c) const noexcept {
    CriterionSet s = *this;
    s.erase(c);
    return s;
  }
  constexpr bool subset_of(CriterionSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }
  constexpr bool operator==(const CriterionSet&) const = default;

  std::vector<Criterion> to_vector() const {
    std::vector<Criterion> out;
    for (Criterion c : kAllCriteria)
      if (contains(c)) out.push_back(c);
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (Criterion c : to_vector()) out.emplace_back(name_of(c));
    return out;
  }

  static CriterionSet from_names(const std::vector<std::string>& names) {
    CriterionSet s;
    for (const auto& n : names) s.insert(parse_criterion(n));
    return s;
  }

 private:
  constexpr explicit CriterionSet(unsigned bits) : bits_(static_cast<std::uint8_t>(bits & 0b11111U)) {}
  std::uint8_t bits_ = 0;
};

/// Fixed-size optional slot per criterion.
template <class T>
class CriterionMap {
 public:
  bool has(Criterion c) const { return slots_[index_of(c)].has_value(); }
  const std::optional<T>& operator[](Criterion c) const { return slots_[index_of(c)]; }
  std::optional<T>& operator[](Criterion c) { return slots_[index_of(c)]; }
  const T& at(Criterion c) const {
    if (!has(c)) throw Error(Errc::InvalidArgument, "criterion '" + std::string(name_of(c)) + "' not set");
    return *slots_[index_of(c)];
  }
  void set(Criterion c, T value) { slots_[index_of(c)] = std::move(value); }
  void reset(Criterion c) { slots_[index_of(c)].reset(); }

  CriterionSet present() const {
    CriterionSet s;
    for (Criterion c : kAllCriteria)
      if (has(c)) s.insert(c);
    return s;
  }

  bool operator==(const CriterionMap&) const = default;

 private:
  std::array<std::optional<T>, kCriterionCount> slots_{};
};

}  // namespace crest
