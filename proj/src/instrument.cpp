#include "ctskills/instrument.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ctskills/error.hpp"

namespace ctskills::instrument {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

extern const char* const kDefaultInstrumentDocument;

std::string_view to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::Item: return "item";
    case SelectionKind::OrderedPair: return "ordered_pair";
    case SelectionKind::UnorderedPair: return "unordered_pair";
  }
  return "item";
}

std::string_view to_string(DropZone zone) {
  switch (zone) {
    case DropZone::basket_red: return "basket_red";
    case DropZone::basket_yellow: return "basket_yellow";
    case DropZone::grass: return "grass";
    case DropZone::tree: return "tree";
    case DropZone::other: return "other";
  }
  return "other";
}

std::optional<DropZone> parse_drop_zone(std::string_view text) {
  for (auto z : {DropZone::basket_red, DropZone::basket_yellow, DropZone::grass, DropZone::tree,
                 DropZone::other}) {
    if (to_string(z) == text) return z;
  }
  return std::nullopt;
}

std::string_view to_string(ObjectRole role) {
  switch (role) {
    case ObjectRole::apple: return "apple";
    case ObjectRole::leaf: return "leaf";
    case ObjectRole::basket: return "basket";
    case ObjectRole::scenery: return "scenery";
  }
  return "scenery";
}

std::string_view to_string(MinScoreMode mode) {
  return mode == MinScoreMode::literal ? "literal" : "achievable";
}

std::optional<MinScoreMode> parse_min_score_mode(std::string_view text) {
  if (text == "achievable") return MinScoreMode::achievable;
  if (text == "literal") return MinScoreMode::literal;
  return std::nullopt;
}

const SceneryObject* Scenery::find(std::string_view instance_id) const {
  for (const auto& object : objects) {
    if (object.id == instance_id) return &object;
  }
  return nullptr;
}

DropZone Scenery::resolve(Point p) const {
  for (const auto& region : zones) {
    if (region.bounds.contains(p)) return region.zone;
  }
  return DropZone::other;
}

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

[[noreturn]] void schema(const std::string& message) { fail(ErrorCode::schema_violation, message); }

bool valid_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

const json& field(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end()) schema(std::string("missing field '") + key + "'");
  return *it;
}

std::optional<SelectionKind> parse_kind(std::string_view text) {
  if (text == "item") return SelectionKind::Item;
  if (text == "ordered_pair") return SelectionKind::OrderedPair;
  if (text == "unordered_pair") return SelectionKind::UnorderedPair;
  return std::nullopt;
}

std::optional<ObjectRole> parse_role(std::string_view text) {
  for (auto r : {ObjectRole::apple, ObjectRole::leaf, ObjectRole::basket, ObjectRole::scenery}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

Point parse_point(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    schema("point must be a [x, y] number pair");
  }
  return Point{j[0].get<double>(), j[1].get<double>()};
}

class Loader {
 public:
  InstrumentConfig load(const json& doc) {
    if (!doc.is_object()) schema("instrument document must be an object");
    if (field(doc, "schema") != "ctskills.instrument") schema("unexpected schema tag");
    config_.version = field(doc, "version").get<int>();
    if (config_.version != 1) schema("unsupported instrument version " + std::to_string(config_.version));
    config_.name = doc.value("name", std::string{});
    config_.max_scaled = doc.value("max_scaled", 5.0);
    if (!(config_.max_scaled > 0.0)) schema("max_scaled must be positive");
    auto mode = parse_min_score_mode(doc.value("min_score_mode", std::string("achievable")));
    if (!mode) schema("min_score_mode must be 'achievable' or 'literal'");
    config_.min_score_mode = *mode;
    if (doc.contains("grades")) {
      const auto& grades = doc["grades"];
      if (!grades.is_array() || grades.size() != 2) schema("grades must be [min, max]");
      config_.grade_min = grades[0].get<int>();
      config_.grade_max = grades[1].get<int>();
      if (config_.grade_min > config_.grade_max) schema("grades must be [min, max]");
    }

    load_registry(field(doc, "registry"));
    load_sceneries(field(doc, "sceneries"));
    load_questions(field(doc, "questions"));
    return std::move(config_);
  }

 private:
  ItemId registered(const json& j) {
    if (!j.is_string()) schema("item id must be a string");
    ItemId id(j.get<std::string>());
    if (!config_.registry.contains(id)) fail(ErrorCode::unknown_item, "unknown item id '" + id.str() + "'");
    return id;
  }

  void load_registry(const json& j) {
    if (!j.is_array()) schema("registry must be an array");
    if (j.empty()) schema("registry must be non-empty");
    for (const auto& entry : j) {
      if (!entry.is_string() || !valid_token(entry.get<std::string>())) {
        schema("registry ids must be lowercase tokens");
      }
      if (!config_.registry.insert(ItemId(entry.get<std::string>())).second) {
        schema("duplicate registry id '" + entry.get<std::string>() + "'");
      }
    }
  }

  void load_sceneries(const json& j) {
    if (!j.is_array() || j.size() != kLevelCount) schema("exactly 3 sceneries are required");
    std::array<bool, kLevelCount> seen{};
    for (const auto& s : j) {
      int level = field(s, "level").get<int>();
      if (level < 1 || level > kLevelCount) fail(ErrorCode::out_of_range, "scenery level out of range");
      if (seen[level - 1]) schema("duplicate scenery for level " + std::to_string(level));
      seen[level - 1] = true;
      Scenery& scenery = config_.sceneries[level - 1];
      scenery.level = level;
      for (const auto& z : field(s, "zones")) {
        auto zone = parse_drop_zone(field(z, "zone").get<std::string>());
        if (!zone || *zone == DropZone::other) schema("invalid zone name");
        scenery.zones.push_back({*zone, Rect{parse_point(field(z, "min")), parse_point(field(z, "max"))}});
      }
      std::set<std::string> ids;
      for (const auto& o : field(s, "objects")) {
        for (auto& object : expand_object(o)) {
          if (!ids.insert(object.id).second) schema("duplicate instance id '" + object.id + "'");
          scenery.objects.push_back(std::move(object));
        }
      }
    }
  }

  std::vector<SceneryObject> expand_object(const json& o) {
    SceneryObject base;
    base.item = registered(field(o, "item"));
    auto role = parse_role(o.value("role", std::string("scenery")));
    if (!role) schema("invalid object role");
    base.role = *role;
    base.draggable = o.value("draggable", false);
    if (o.contains("basket")) {
      auto zone = parse_drop_zone(o["basket"].get<std::string>());
      if (!zone || (*zone != DropZone::basket_red && *zone != DropZone::basket_yellow)) {
        schema("apple basket must be basket_red or basket_yellow");
      }
      base.basket = zone;
    }
    if (base.role == ObjectRole::apple && !base.basket) schema("apples must name their basket");

    std::vector<SceneryObject> out;
    if (o.contains("homes")) {
      if (o.contains("id")) schema("'homes' shorthand generates ids; 'id' not allowed");
      int n = 0;
      for (const auto& home : o["homes"]) {
        SceneryObject copy = base;
        copy.id = base.item.str() + "#" + std::to_string(++n);
        copy.home = parse_point(home);
        out.push_back(std::move(copy));
      }
    } else {
      base.id = field(o, "id").get<std::string>();
      if (base.id.empty()) schema("instance id must be non-empty");
      base.home = parse_point(field(o, "home"));
      out.push_back(std::move(base));
    }
    return out;
  }

  Element parse_element(const json& j, SelectionKind kind, const std::set<ItemId>& palette) {
    auto on_palette = [&](const ItemId& id) {
      if (!palette.contains(id)) schema("element '" + id.str() + "' is not on the palette");
      return id;
    };
    if (kind == SelectionKind::Item) {
      if (!j.is_string()) fail(ErrorCode::kind_mismatch, "item question expects item ids");
      return on_palette(registered(j));
    }
    if (!j.is_array() || j.size() != 2) fail(ErrorCode::kind_mismatch, "pair question expects [a, b] pairs");
    return ItemPair::make(on_palette(registered(j[0])), on_palette(registered(j[1])),
                          kind == SelectionKind::OrderedPair);
  }

  void load_questions(const json& j) {
    if (!j.is_array()) schema("questions must be an array");
    std::map<Cell, QuestionSpec> specs;
    for (const auto& q : j) {
      QuestionSpec spec;
      auto question = parse_question(field(q, "question").get<std::string>());
      if (!question) fail(ErrorCode::out_of_range, "question must be one of Q1..Q4");
      spec.cell = Cell{*question, field(q, "level").get<int>()};
      if (!spec.cell.valid()) fail(ErrorCode::out_of_range, "level out of range for " + to_string(spec.cell));
      auto kind = parse_kind(field(q, "kind").get<std::string>());
      if (!kind) schema("invalid question kind");
      spec.kind = *kind;
      for (const auto& p : field(q, "palette")) {
        if (!spec.palette.insert(registered(p)).second) schema("duplicate palette item");
      }
      for (const auto& t : field(q, "targets")) {
        if (!spec.targets.insert(parse_element(t, spec.kind, spec.palette)).second) {
          schema("duplicate target in " + to_string(spec.cell));
        }
      }
      if (q.contains("optional")) {
        if (spec.kind == SelectionKind::Item && !q["optional"].empty()) {
          schema("optional targets are only defined for pair questions");
        }
        for (const auto& t : q["optional"]) {
          auto element = parse_element(t, spec.kind, spec.palette);
          if (spec.targets.contains(element)) {
            schema("optional target overlaps targets in " + to_string(spec.cell));
          }
          if (!spec.optional_targets.insert(std::move(element)).second) schema("duplicate optional target");
        }
      }
      const auto& declared = field(q, "declared");
      int declared_x = field(declared, "targets").get<int>();
      int declared_y = field(declared, "nontargets").get<int>();
      if (declared_x != spec.target_count()) {
        fail(ErrorCode::count_mismatch, to_string(spec.cell) + ": declared |X|=" + std::to_string(declared_x) +
                                            " but " + std::to_string(spec.target_count()) + " targets listed");
      }
      if (spec.pair_kind()) {
        if (declared_y != kPairSlots) fail(ErrorCode::count_mismatch, "pair-question non-target count must be 4");
        spec.nominal_nontargets = kPairSlots;
      } else {
        spec.nominal_nontargets = static_cast<int>(spec.palette.size()) - spec.target_count();
        if (declared_y != spec.nominal_nontargets) {
          fail(ErrorCode::count_mismatch, to_string(spec.cell) + ": declared |Y|=" + std::to_string(declared_y) +
                                              " but palette implies " + std::to_string(spec.nominal_nontargets));
        }
      }
      Cell cell = spec.cell;
      if (!specs.emplace(cell, std::move(spec)).second) {
        fail(ErrorCode::duplicate_cell, "duplicate question spec for " + to_string(cell));
      }
    }
    if (specs.size() != static_cast<std::size_t>(kCellCount)) {
      schema("exactly 12 question specs are required, got " + std::to_string(specs.size()));
    }
    config_.question_specs.resize(kCellCount);
    for (auto& [cell, spec] : specs) config_.question_specs[cell.ordinal()] = std::move(spec);
  }

  InstrumentConfig config_;
};

ordered_json point_json(Point p) { return ordered_json::array({p.x, p.y}); }

ordered_json element_json(const Element& e) {
  if (const auto* item = std::get_if<ItemId>(&e)) return item->str();
  const auto& pair = std::get<ItemPair>(e);
  return ordered_json::array({pair.first().str(), pair.second().str()});
}

}  // namespace

InstrumentConfig load_instrument(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    schema(std::string("malformed instrument document: ") + e.what());
  }
  try {
    return Loader{}.load(doc);
  } catch (const json::exception& e) {
    schema(std::string("instrument schema violation: ") + e.what());
  }
}

InstrumentConfig load_instrument_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open instrument file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_instrument(buffer.str());
}

std::string serialize(const InstrumentConfig& config) {
  ordered_json doc;
  doc["schema"] = "ctskills.instrument";
  doc["version"] = config.version;
  doc["name"] = config.name;
  doc["max_scaled"] = config.max_scaled;
  doc["min_score_mode"] = to_string(config.min_score_mode);
  doc["grades"] = ordered_json::array({config.grade_min, config.grade_max});
  auto& registry = doc["registry"] = ordered_json::array();
  for (const auto& id : config.registry) registry.push_back(id.str());
  auto& sceneries = doc["sceneries"] = ordered_json::array();
  for (const auto& s : config.sceneries) {
    ordered_json sj;
    sj["level"] = s.level;
    sj["zones"] = ordered_json::array();
    for (const auto& z : s.zones) {
      sj["zones"].push_back({{"zone", to_string(z.zone)}, {"min", point_json(z.bounds.min)},
                             {"max", point_json(z.bounds.max)}});
    }
    sj["objects"] = ordered_json::array();
    for (const auto& o : s.objects) {
      ordered_json oj;
      oj["id"] = o.id;
      oj["item"] = o.item.str();
      oj["role"] = to_string(o.role);
      oj["draggable"] = o.draggable;
      if (o.basket) oj["basket"] = to_string(*o.basket);
      oj["home"] = point_json(o.home);
      sj["objects"].push_back(std::move(oj));
    }
    sceneries.push_back(std::move(sj));
  }
  auto& questions = doc["questions"] = ordered_json::array();
  for (const auto& spec : config.question_specs) {
    ordered_json qj;
    qj["question"] = to_string(spec.question());
    qj["level"] = spec.level();
    qj["kind"] = to_string(spec.kind);
    qj["palette"] = ordered_json::array();
    for (const auto& id : spec.palette) qj["palette"].push_back(id.str());
    qj["targets"] = ordered_json::array();
    for (const auto& e : spec.targets) qj["targets"].push_back(element_json(e));
    qj["optional"] = ordered_json::array();
    for (const auto& e : spec.optional_targets) qj["optional"].push_back(element_json(e));
    qj["declared"] = {{"targets", spec.target_count()}, {"nontargets", spec.nominal_nontargets}};
    questions.push_back(std::move(qj));
  }
  return doc.dump(2) + "\n";
}

std::string_view default_instrument_document() { return kDefaultInstrumentDocument; }

const InstrumentConfig& default_instrument() {
  static const InstrumentConfig config = load_instrument(default_instrument_document());
  return config;
}

const QuestionSpec& spec_for(const InstrumentConfig& config, Cell cell) {
  if (!cell.valid()) {
    throw Error(ErrorCode::out_of_range, "no question spec for (" + std::to_string(static_cast<int>(cell.question)) +
                                             ", " + std::to_string(cell.level) + ")");
  }
  return config.question_specs.at(cell.ordinal());
}

const QuestionSpec& spec_for(const InstrumentConfig& config, Question question, int level) {
  return spec_for(config, Cell{question, level});
}

const Scenery& scenery_for(const InstrumentConfig& config, int level) {
  if (level < 1 || level > kLevelCount) {
    throw Error(ErrorCode::out_of_range, "level must be 1..3, got " + std::to_string(level));
  }
  return config.sceneries[level - 1];
}

const std::array<CellCounts, kCellCount>& reference_counts() {
  // Row-major by level, then question.
  static const std::array<CellCounts, kCellCount> counts{{
      {5, 6}, {1, 10}, {2, 4}, {2, 4},  // level 1: Q1..Q4
      {8, 3}, {2, 9}, {3, 4}, {4, 4},   // level 2
      {7, 1}, {4, 4}, {2, 4}, {2, 4},   // level 3
  }};
  return counts;
}

CellCounts counts_of(const QuestionSpec& spec) { return {spec.target_count(), spec.nominal_nontargets}; }

}  // namespace ctskills::instrument
