#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

namespace ctskills {

enum class Question { Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };

inline constexpr int kQuestionCount = 4;
inline constexpr int kLevelCount = 3;
inline constexpr int kCellCount = kQuestionCount * kLevelCount;

std::string_view to_string(Question q);
std::optional<Question> parse_question(std::string_view text);
inline int index_of(Question q) { return static_cast<int>(q) - 1; }

// One (question, level) screen of the instrument.
struct Cell {
  Question question = Question::Q1;
  int level = 1;

  auto operator<=>(const Cell&) const = default;
  // Position in play order: L1 Q1..Q4, L2 Q1..Q4, L3 Q1..Q4.
  int ordinal() const { return (level - 1) * kQuestionCount + index_of(question); }
  static Cell from_ordinal(int ordinal);
  bool valid() const;
};

std::string to_string(const Cell& cell);

// Canonical lowercase token from the instrument registry.
class ItemId {
 public:
  ItemId() = default;
  explicit ItemId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  auto operator<=>(const ItemId&) const = default;

 private:
  std::string value_;
};

// A relation between two items. Ordered pairs read "first is changing into
// second"; unordered pairs are kept with first < second so equality ignores
// the order in which the student placed them.
class ItemPair {
 public:
  static ItemPair make(ItemId a, ItemId b, bool ordered);

  const ItemId& first() const { return first_; }
  const ItemId& second() const { return second_; }
  bool ordered() const { return ordered_; }

  auto operator<=>(const ItemPair&) const = default;

 private:
  ItemPair(ItemId a, ItemId b, bool ordered)
      : first_(std::move(a)), second_(std::move(b)), ordered_(ordered) {}

  ItemId first_;
  ItemId second_;
  bool ordered_ = false;
};

// A selectable element: a single item (Q1/Q2) or a pair (Q3/Q4).
using Element = std::variant<ItemId, ItemPair>;
using ElementSet = std::set<Element>;

std::string to_string(const Element& element);

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// ISO-8601 UTC with millisecond precision, e.g. 2024-03-05T09:15:00.250Z.
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace ctskills
