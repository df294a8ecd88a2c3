#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctskills/types.hpp"

namespace ctskills::instrument {

enum class SelectionKind { Item, OrderedPair, UnorderedPair };

std::string_view to_string(SelectionKind kind);

// Number of pair slots shown on Q3/Q4 screens; also the nominal |Y| of every
// pair question.
inline constexpr int kPairSlots = 4;

struct QuestionSpec {
  Cell cell;
  SelectionKind kind = SelectionKind::Item;
  std::set<ItemId> palette;
  ElementSet targets;
  ElementSet optional_targets;
  int nominal_nontargets = 0;

  Question question() const { return cell.question; }
  int level() const { return cell.level; }
  bool pair_kind() const { return kind != SelectionKind::Item; }
  int target_count() const { return static_cast<int>(targets.size()); }

  bool operator==(const QuestionSpec&) const = default;
};

enum class DropZone { basket_red, basket_yellow, grass, tree, other };

std::string_view to_string(DropZone zone);
std::optional<DropZone> parse_drop_zone(std::string_view text);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct Rect {
  Point min;
  Point max;
  bool contains(Point p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  bool operator==(const Rect&) const = default;
};

// What an object does in the game.
enum class ObjectRole { apple, leaf, basket, scenery };

std::string_view to_string(ObjectRole role);

struct SceneryObject {
  std::string id;  // instance id, e.g. "apple_red#3"
  ItemId item;
  ObjectRole role = ObjectRole::scenery;
  Point home;
  bool draggable = false;
  // Apples only: the basket zone that accepts this apple.
  std::optional<DropZone> basket;

  bool operator==(const SceneryObject&) const = default;
};

struct ZoneRegion {
  DropZone zone = DropZone::other;
  Rect bounds;
  bool operator==(const ZoneRegion&) const = default;
};

struct Scenery {
  int level = 1;
  std::vector<SceneryObject> objects;
  // Resolution order: the first region containing a point wins.
  std::vector<ZoneRegion> zones;

  const SceneryObject* find(std::string_view instance_id) const;
  DropZone resolve(Point p) const;
  bool operator==(const Scenery&) const = default;
};

enum class MinScoreMode { achievable, literal };

std::string_view to_string(MinScoreMode mode);
std::optional<MinScoreMode> parse_min_score_mode(std::string_view text);

struct InstrumentConfig {
  int version = 1;
  std::string name;
  std::set<ItemId> registry;
  std::array<Scenery, kLevelCount> sceneries;
  std::vector<QuestionSpec> question_specs;  // sorted by Cell::ordinal
  double max_scaled = 5.0;
  MinScoreMode min_score_mode = MinScoreMode::achievable;
  int grade_min = 4;
  int grade_max = 9;

  bool operator==(const InstrumentConfig&) const = default;
};

// Parses and validates an instrument document. Throws ctskills::Error.
InstrumentConfig load_instrument(std::string_view document);
InstrumentConfig load_instrument_file(const std::string& path);

// Canonical document form; load_instrument(serialize(c)) == c.
std::string serialize(const InstrumentConfig& config);

// The instrument shipped with the artifact.
std::string_view default_instrument_document();
const InstrumentConfig& default_instrument();

const QuestionSpec& spec_for(const InstrumentConfig& config, Question question, int level);
const QuestionSpec& spec_for(const InstrumentConfig& config, Cell cell);
const Scenery& scenery_for(const InstrumentConfig& config, int level);

// Reference |X|/|Y| counts of the published instrument, indexed by
// Cell::ordinal.
struct CellCounts {
  int targets = 0;
  int nontargets = 0;
  bool operator==(const CellCounts&) const = default;
};
const std::array<CellCounts, kCellCount>& reference_counts();
CellCounts counts_of(const QuestionSpec& spec);

}  // namespace ctskills::instrument
