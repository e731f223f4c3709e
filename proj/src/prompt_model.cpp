/*
 * Copyright 2026 The IAMs Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "iams/prompt_model.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "iams/error.hpp"

namespace iams {
namespace {

using nlohmann::json;

constexpr std::string_view kEmptyToken = "-";

[[noreturn]] void Invalid(const std::string& message) {
  Fail(ErrorCode::kValidation, message);
}

void RejectUnknownFields(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) Invalid(where + ": expected an object");
  for (const auto& [name, value] : obj.items()) {
    if (!allowed.count(name)) Invalid(where + ": unknown field '" + name + "'");
  }
}

const json& Required(const json& obj, const std::string& field,
                     const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end()) Invalid(where + ": missing field '" + field + "'");
  return *it;
}

std::string AsString(const json& value, const std::string& where) {
  if (!value.is_string()) Invalid(where + ": expected a string");
  return value.get<std::string>();
}

void CheckId(const std::string& id, const std::string& where) {
  if (id.empty()) Invalid(where + ": component id is empty");
  if (id == kEmptyToken) Invalid(where + ": component id '-' is reserved");
  for (char c : id) {
    if (c == '|' || c == ':' || c == '\n' || c == '\r') {
      Invalid(where + ": component id '" + id +
              "' contains a reserved character ('|', ':' or newline)");
    }
  }
}

}  // namespace

PromptModel PromptModel::Build(PromptModelSpec spec) {
  if (spec.strata.empty()) Invalid("model must contain at least one stratum");
  const int m = static_cast<int>(spec.strata.size());
  if (spec.query_stratum < 0 || spec.query_stratum >= m) {
    Invalid("query_stratum " + std::to_string(spec.query_stratum) +
            " is out of range [0, " + std::to_string(m) + ")");
  }

  PromptModel model;
  model.separator_ = std::move(spec.separator);
  model.query_stratum_ = spec.query_stratum;
  std::unordered_set<std::string> seen;
  for (int i = 0; i < m; ++i) {
    auto& in = spec.strata[i];
    const std::string where = "strata[" + std::to_string(i) + "]";
    if (in.components.empty()) Invalid(where + ": stratum has no components");
    if (in.kind == StratumKind::kStatic && in.components.size() != 1) {
      Invalid(where + ": static stratum must have exactly 1 component, has " +
              std::to_string(in.components.size()));
    }
    if (i == spec.query_stratum && in.kind != StratumKind::kStatic) {
      Invalid(where + ": the query stratum must be static");
    }
    PromptStratum out;
    out.index = i;
    out.name = std::move(in.name);
    out.kind = in.kind;
    for (std::size_t j = 0; j < in.components.size(); ++j) {
      auto& c = in.components[j];
      const std::string cwhere = where + ".components[" + std::to_string(j) + "]";
      CheckId(c.id, cwhere);
      if (c.text.empty()) Invalid(cwhere + ": component text is empty");
      if (!seen.insert(c.id).second) {
        Invalid(cwhere + ": duplicate component id '" + c.id + "'");
      }
      out.components.push_back(
          PromptComponent{std::move(c.id), i, std::move(c.text), std::move(c.tags)});
    }
    model.strata_.push_back(std::move(out));
  }
  return model;
}

PromptModel PromptModel::FromJson(const json& doc) {
  RejectUnknownFields(doc, {"separator", "strata", "query_stratum"}, "model");
  PromptModelSpec spec;
  if (auto it = doc.find("separator"); it != doc.end()) {
    spec.separator = AsString(*it, "separator");
  }
  const json& strata = Required(doc, "strata", "model");
  if (!strata.is_array()) Invalid("strata: expected an array");
  const json& query = Required(doc, "query_stratum", "model");
  if (!query.is_number_integer()) Invalid("query_stratum: expected an integer");
  spec.query_stratum = query.get<int>();

  for (std::size_t i = 0; i < strata.size(); ++i) {
    const std::string where = "strata[" + std::to_string(i) + "]";
    const json& s = strata[i];
    RejectUnknownFields(s, {"name", "kind", "components"}, where);
    StratumSpec st;
    st.name = AsString(Required(s, "name", where), where + ".name");
    const std::string kind = AsString(Required(s, "kind", where), where + ".kind");
    if (kind == "static") {
      st.kind = StratumKind::kStatic;
    } else if (kind == "variable") {
      st.kind = StratumKind::kVariable;
    } else {
      Invalid(where + ".kind: expected \"static\" or \"variable\", got \"" +
              kind + "\"");
    }
    const json& comps = Required(s, "components", where);
    if (!comps.is_array()) Invalid(where + ".components: expected an array");
    for (std::size_t j = 0; j < comps.size(); ++j) {
      const std::string cwhere = where + ".components[" + std::to_string(j) + "]";
      const json& c = comps[j];
      RejectUnknownFields(c, {"id", "text", "tags"}, cwhere);
      ComponentSpec cs;
      cs.id = AsString(Required(c, "id", cwhere), cwhere + ".id");
      cs.text = AsString(Required(c, "text", cwhere), cwhere + ".text");
      if (auto t = c.find("tags"); t != c.end()) {
        if (!t->is_array()) Invalid(cwhere + ".tags: expected an array");
        for (const auto& tag : *t) cs.tags.push_back(AsString(tag, cwhere + ".tags"));
      }
      st.components.push_back(std::move(cs));
    }
    spec.strata.push_back(std::move(st));
  }
  return Build(std::move(spec));
}

PromptModel PromptModel::FromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    Invalid(path.string() + ": " + e.what());
  }
  return FromJson(doc);
}

json PromptModel::ToJson() const {
  json strata = json::array();
  for (const auto& s : strata_) {
    json comps = json::array();
    for (const auto& c : s.components) {
      comps.push_back({{"id", c.id}, {"text", c.text}, {"tags", c.tags}});
    }
    strata.push_back({{"name", s.name},
                      {"kind", s.kind == StratumKind::kStatic ? "static" : "variable"},
                      {"components", std::move(comps)}});
  }
  return {{"separator", separator_},
          {"strata", std::move(strata)},
          {"query_stratum", query_stratum_}};
}

std::vector<int> PromptModel::variable_strata() const {
  std::vector<int> out;
  for (const auto& s : strata_) {
    if (s.kind == StratumKind::kVariable) out.push_back(s.index);
  }
  return out;
}

bool PromptModel::is_variable(int stratum) const {
  return stratum >= 0 && stratum < num_strata() &&
         strata_[stratum].kind == StratumKind::kVariable;
}

int PromptModel::num_variable_components() const {
  int total = 0;
  for (const auto& s : strata_) {
    if (s.kind == StratumKind::kVariable) total += static_cast<int>(s.components.size());
  }
  return total;
}

std::optional<ComponentRef> PromptModel::find(std::string_view id) const {
  for (const auto& s : strata_) {
    for (std::size_t j = 0; j < s.components.size(); ++j) {
      if (s.components[j].id == id) return ComponentRef{s.index, static_cast<int>(j)};
    }
  }
  return std::nullopt;
}

const PromptComponent& PromptModel::component(ComponentRef ref) const {
  return strata_.at(ref.stratum).components.at(ref.position);
}

std::uint64_t PromptModel::subprompt_count() const {
  std::uint64_t total = 1;
  for (const auto& s : strata_) {
    if (s.kind != StratumKind::kVariable) continue;
    const std::uint64_t choices = s.components.size() + 1;
    if (total > std::numeric_limits<std::uint64_t>::max() / choices) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= choices;
  }
  return total;
}

std::string SubpromptKey(const PromptModel& model,
                         const std::vector<int>& selections) {
  std::string key;
  for (int i = 0; i < model.num_strata(); ++i) {
    if (i) key += '|';
    const int sel = selections.at(i);
    key += sel == kEmptySelection ? std::string(kEmptyToken)
                                  : model.stratum(i).components.at(sel).id;
  }
  return key;
}

std::vector<int> ParseSubpromptKey(const PromptModel& model, std::string_view key) {
  std::vector<int> selections;
  std::size_t start = 0;
  for (int i = 0; i < model.num_strata(); ++i) {
    const std::size_t end = key.find('|', start);
    const bool last = i + 1 == model.num_strata();
    if ((end == std::string_view::npos) != last) {
      Invalid("subprompt key '" + std::string(key) + "' does not have " +
              std::to_string(model.num_strata()) + " tokens");
    }
    const std::string_view token =
        key.substr(start, last ? std::string_view::npos : end - start);
    const PromptStratum& stratum = model.stratum(i);
    if (token == kEmptyToken) {
      if (stratum.kind != StratumKind::kVariable) {
        Invalid("subprompt key '" + std::string(key) + "' leaves static stratum " +
                std::to_string(i) + " empty");
      }
      selections.push_back(kEmptySelection);
    } else {
      int found = -1;
      for (std::size_t j = 0; j < stratum.components.size(); ++j) {
        if (stratum.components[j].id == token) found = static_cast<int>(j);
      }
      if (found < 0) {
        Invalid("unknown component id '" + std::string(token) + "' in stratum " +
                std::to_string(i));
      }
      selections.push_back(found);
    }
    start = last ? key.size() : end + 1;
  }
  return selections;
}

std::string RenderSubprompt(const Subprompt& sub, const PromptModel& model,
                            std::string_view separator) {
  if (static_cast<int>(sub.selections.size()) != model.num_strata()) {
    Invalid("subprompt has " + std::to_string(sub.selections.size()) +
            " selections, model has " + std::to_string(model.num_strata()) +
            " strata");
  }
  std::string out;
  bool first = true;
  for (int i = 0; i < model.num_strata(); ++i) {
    const int sel = sub.selections[i];
    const PromptStratum& stratum = model.stratum(i);
    if (sel == kEmptySelection) {
      if (stratum.kind == StratumKind::kStatic) {
        Invalid("static stratum " + std::to_string(i) + " cannot be empty");
      }
      continue;
    }
    if (sel < 0 || sel >= static_cast<int>(stratum.components.size())) {
      Invalid("unknown component position " + std::to_string(sel) +
              " in stratum " + std::to_string(i));
    }
    if (!first) out += separator;
    out += stratum.components[sel].text;
    first = false;
  }
  return out;
}

Subprompt MakeSubprompt(const PromptModel& model, std::vector<int> selections) {
  Subprompt sub;
  sub.selections = std::move(selections);
  sub.rendered = RenderSubprompt(sub, model);
  sub.key = SubpromptKey(model, sub.selections);
  return sub;
}

std::vector<Subprompt> EnumerateSubprompts(const PromptModel& model,
                                           std::uint64_t cap) {
  const std::uint64_t count = model.subprompt_count();
  if (count > cap) {
    Fail(ErrorCode::kTooLarge,
         "design too large: " +
             (count == std::numeric_limits<std::uint64_t>::max()
                  ? std::string("more than 2^64")
                  : std::to_string(count)) +
             " subprompts exceed the cap of " + std::to_string(cap));
  }
  const int m = model.num_strata();
  // Odometer over choice indices; choice 0 is empty for variable strata.
  std::vector<int> choice(m, 0);
  std::vector<int> radix(m, 1);
  for (int i = 0; i < m; ++i) {
    if (model.is_variable(i)) {
      radix[i] = static_cast<int>(model.stratum(i).components.size()) + 1;
    }
  }
  std::vector<Subprompt> out;
  out.reserve(count);
  for (std::uint64_t n = 0; n < count; ++n) {
    std::vector<int> selections(m);
    for (int i = 0; i < m; ++i) {
      selections[i] = model.is_variable(i) ? choice[i] - 1 : 0;
    }
    out.push_back(MakeSubprompt(model, std::move(selections)));
    for (int i = m - 1; i >= 0; --i) {
      if (++choice[i] < radix[i]) break;
      choice[i] = 0;
    }
  }
  return out;
}

}  // namespace iams
