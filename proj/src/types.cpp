#include "ctskills/types.hpp"

#include <array>
#include <cstdio>

#include "ctskills/error.hpp"

namespace ctskills {

std::string_view to_string(Question q) {
  switch (q) {
    case Question::Q1: return "Q1";
    case Question::Q2: return "Q2";
    case Question::Q3: return "Q3";
    case Question::Q4: return "Q4";
  }
  return "Q?";
}

std::optional<Question> parse_question(std::string_view text) {
  if (text == "Q1") return Question::Q1;
  if (text == "Q2") return Question::Q2;
  if (text == "Q3") return Question::Q3;
  if (text == "Q4") return Question::Q4;
  return std::nullopt;
}

Cell Cell::from_ordinal(int ordinal) {
  return Cell{static_cast<Question>(ordinal % kQuestionCount + 1), ordinal / kQuestionCount + 1};
}

bool Cell::valid() const {
  int q = static_cast<int>(question);
  return q >= 1 && q <= kQuestionCount && level >= 1 && level <= kLevelCount;
}

std::string to_string(const Cell& cell) {
  return std::string(to_string(cell.question)) + "/L" + std::to_string(cell.level);
}

ItemPair ItemPair::make(ItemId a, ItemId b, bool ordered) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::schema_violation, "pair members must be non-empty");
  }
  if (a == b) {
    throw Error(ErrorCode::schema_violation, "pair members must differ: " + a.str());
  }
  if (!ordered && b < a) std::swap(a, b);
  return ItemPair(std::move(a), std::move(b), ordered);
}

std::string to_string(const Element& element) {
  if (const auto* item = std::get_if<ItemId>(&element)) return item->str();
  const auto& pair = std::get<ItemPair>(element);
  return pair.first().str() + (pair.ordered() ? "->" : "+") + pair.second().str();
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{day};
  hh_mm_ss<milliseconds> tod{t - day};
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return std::string(buf.data());
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  // YYYY-MM-DDTHH:MM:SS[.mmm]Z
  if (text.size() != 20 && text.size() != 24) return std::nullopt;
  auto digits = [&](std::size_t pos, std::size_t n, int& out) {
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  if (!digits(0, 4, y) || text[4] != '-' || !digits(5, 2, mo) || text[7] != '-' ||
      !digits(8, 2, d) || text[10] != 'T' || !digits(11, 2, h) || text[13] != ':' ||
      !digits(14, 2, mi) || text[16] != ':' || !digits(17, 2, s)) {
    return std::nullopt;
  }
  if (text.size() == 24) {
    if (text[19] != '.' || !digits(20, 3, ms) || text[23] != 'Z') return std::nullopt;
  } else if (text[19] != 'Z') {
    return std::nullopt;
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return Timestamp{sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms}};
}

}  // namespace ctskills
