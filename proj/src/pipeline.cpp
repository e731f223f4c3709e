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

#include "iams/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "iams/backends.hpp"
#include "iams/csv.hpp"
#include "iams/encoding.hpp"
#include "iams/error.hpp"
#include "iams/reporting.hpp"
#include "iams/shapley.hpp"
#include "iams/util.hpp"

namespace iams {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestCopy = "manifest.json";
constexpr const char* kSubpromptsFile = "subprompts.csv";
constexpr const char* kScoresFile = "scores.jsonl";
constexpr const char* kScoresMetaFile = "scores.meta.json";
constexpr const char* kDesignFile = "design.csv";
constexpr const char* kDesignColumnsFile = "design_columns.json";
constexpr const char* kFitFile = "fit.json";
constexpr const char* kPathFile = "lasso_path.csv";
constexpr const char* kTraceFile = "selection_trace.jsonl";
constexpr const char* kSelectionFitFile = "selection_fit.json";
constexpr const char* kShapleyCsvFile = "shapley.csv";
constexpr const char* kShapleyJsonFile = "shapley.json";
constexpr const char* kReportDir = "report";

void CheckFields(const json& doc, const std::string& where,
                 std::initializer_list<const char*> allowed) {
  if (!doc.is_object()) Fail(ErrorCode::kValidation, where + ": expected an object");
  for (const auto& [name, v] : doc.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || name == a;
    if (!ok) {
      Fail(ErrorCode::kValidation,
           (where.empty() ? "" : where + ".") + name + ": unknown field");
    }
  }
}

const char* FitKindName(FitKind kind) {
  switch (kind) {
    case FitKind::kOls: return "ols";
    case FitKind::kLasso: return "lasso";
    case FitKind::kLogistic: return "logistic";
  }
  return "ols";
}

std::string HashComment(const std::string& hash) { return "# manifest_hash=" + hash + "\n"; }

std::string CsvHash(const csv::Table& table) {
  for (std::string_view c : table.comments) {
    while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
    if (c.starts_with("manifest_hash=")) return std::string(c.substr(14));
  }
  return {};
}

std::string Slurp(const fs::path& file, const char* producer) {
  if (!fs::exists(file)) {
    Fail(ErrorCode::kMissingArtifact, file.filename().string() + " not found in " +
                                          file.parent_path().string() + "; run `iams " +
                                          producer + "` first");
  }
  return ReadFileToString(file.string());
}

json ParseJsonFile(const fs::path& file, const char* producer) {
  const std::string text = Slurp(file, producer);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kValidation, file.string() + ": " + e.what());
  }
}

void CheckHash(const std::string& found, const std::string& expected, const fs::path& file) {
  if (found != expected) {
    Fail(ErrorCode::kProvenance,
         file.string() + " was produced under manifest hash '" + found +
             "', current manifest hash is '" + expected + "'");
  }
}

std::string HashOf(const json& doc) {
  return doc.is_object() && doc.contains("manifest_hash") && doc["manifest_hash"].is_string()
             ? doc["manifest_hash"].get<std::string>()
             : std::string();
}

// Inserts manifest_hash into a JSON object.
std::string WithHash(json doc, const std::string& hash) {
  doc["manifest_hash"] = hash;
  return doc.dump(2) + "\n";
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

RunManifest RunManifest::Load(const fs::path& path) {
  if (!fs::exists(path)) Fail(ErrorCode::kIo, "manifest not found: " + path.string());
  return Parse(ReadFileToString(path.string()), path);
}

RunManifest RunManifest::Parse(std::string text, const fs::path& source) {
  RunManifest m;
  m.source = source;
  m.hash = HexDigest(Fnv1a64(text));
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    Fail(ErrorCode::kValidation, source.string() + ": " + e.what());
  }
  m.text = std::move(text);
  CheckFields(doc, "", {"model", "seed", "scorer", "repeats", "concurrency", "max_retries",
                        "response", "terms", "fit", "selection", "report"});
  const fs::path base = source.has_parent_path() ? source.parent_path() : fs::path(".");
  try {
    if (!doc.contains("model")) Fail(ErrorCode::kValidation, "model: required field missing");
    m.model_path = base / doc["model"].get<std::string>();
    if (!doc.contains("seed")) Fail(ErrorCode::kValidation, "seed: required field missing");
    if (!doc["seed"].is_number_integer()) {
      Fail(ErrorCode::kValidation, "seed: expected an integer");
    }
    m.seed = doc["seed"].get<std::uint64_t>();
    if (!doc.contains("scorer")) Fail(ErrorCode::kValidation, "scorer: required field missing");
    m.scorer = doc["scorer"];
    if (!m.scorer.is_object() || !m.scorer.contains("kind")) {
      Fail(ErrorCode::kValidation, "scorer.kind: required field missing");
    }
    if (m.scorer.contains("fixtures")) {
      m.scorer["fixtures"] = (base / m.scorer["fixtures"].get<std::string>()).string();
    }
    m.repeats = doc.value("repeats", 1);
    m.concurrency = doc.value("concurrency", 1);
    m.max_retries = doc.value("max_retries", 2);
    if (m.repeats < 1) Fail(ErrorCode::kValidation, "repeats: must be at least 1");
    if (m.concurrency < 1) Fail(ErrorCode::kValidation, "concurrency: must be at least 1");
    if (m.max_retries < 0) Fail(ErrorCode::kValidation, "max_retries: must be non-negative");
    m.response = ParseResponseKind(doc.value("response", "dcpmi"));

    json terms = doc.value("terms", json::object());
    CheckFields(terms, "terms", {"interaction_strata", "max_order"});
    m.max_order = terms.value("max_order", 1);
    if (m.max_order < 1) Fail(ErrorCode::kValidation, "terms.max_order: must be at least 1");

    json fit = doc.value("fit", json::object());
    CheckFields(fit, "fit", {"kind", "lambda", "grid", "max_order"});
    const std::string kind = fit.value("kind", "ols");
    if (kind == "ols") {
      m.fit_kind = FitKind::kOls;
    } else if (kind == "lasso") {
      m.fit_kind = FitKind::kLasso;
    } else if (kind == "logistic") {
      m.fit_kind = FitKind::kLogistic;
    } else {
      Fail(ErrorCode::kValidation, "fit.kind: unknown value '" + kind + "'");
    }
    m.lambda = fit.value("lambda", 0.0);
    m.grid = fit.value("grid", "");
    m.fit_max_order = fit.value("max_order", 1);
    if (m.fit_max_order < 1 || m.fit_max_order > m.max_order) {
      Fail(ErrorCode::kValidation, "fit.max_order: must lie in [1, terms.max_order]");
    }

    json selection = doc.value("selection", json::object());
    m.selection = SelectionConfig::FromJson(selection);
    if (!selection.contains("max_level")) m.selection.max_level = m.max_order;

    json report = doc.value("report", json::object());
    CheckFields(report, "report", {"bins"});
    m.bins = report.value("bins", 50);
    if (m.bins < 1) Fail(ErrorCode::kValidation, "report.bins: must be at least 1");

    if (terms.contains("interaction_strata")) {
      m.interaction_strata_spec = terms["interaction_strata"];
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kValidation, source.string() + ": " + e.what());
  }
  return m;
}

json DescribeModel(const PromptModel& model) {
  json strata = json::array();
  for (const auto& s : model.strata()) {
    json ids = json::array();
    for (const auto& c : s.components) ids.push_back(c.id);
    strata.push_back({{"index", s.index},
                      {"name", s.name},
                      {"kind", s.kind == StratumKind::kStatic ? "static" : "variable"},
                      {"components", ids}});
  }
  return {{"valid", true},
          {"strata", model.num_strata()},
          {"variable_strata", model.variable_strata().size()},
          {"variable_components", model.num_variable_components()},
          {"query_stratum", model.query_stratum()},
          {"subprompts", model.subprompt_count()},
          {"layout", strata}};
}

Pipeline::Pipeline(RunManifest manifest, fs::path out_dir, RunOverrides overrides)
    : manifest_(std::move(manifest)), out_(std::move(out_dir)) {
  if (overrides.model) manifest_.model_path = *overrides.model;
  if (overrides.lambda) {
    if (*overrides.lambda < 0) Fail(ErrorCode::kInvalidArgument, "--lambda must be non-negative");
    manifest_.lambda = *overrides.lambda;
  }
  if (overrides.grid) manifest_.grid = *overrides.grid;
  if (overrides.max_order) {
    if (*overrides.max_order < 1) Fail(ErrorCode::kInvalidArgument, "--max-order must be >= 1");
    manifest_.max_order = *overrides.max_order;
    manifest_.selection.max_level = *overrides.max_order;
    manifest_.fit_max_order = std::min(manifest_.fit_max_order, manifest_.max_order);
  }
  if (overrides.alpha) manifest_.selection.alpha = *overrides.alpha;
  if (overrides.seed) manifest_.seed = *overrides.seed;
  scorer_kind_ = manifest_.scorer["kind"].get<std::string>();
  if (overrides.scorer) scorer_kind_ = *overrides.scorer;
  if (scorer_kind_ != "synthetic" && scorer_kind_ != "endpoint" && scorer_kind_ != "replay") {
    Fail(ErrorCode::kValidation, "scorer.kind: unknown value '" + scorer_kind_ + "'");
  }
}

void Pipeline::Prepare() {
  if (prepared_) return;
  if (!fs::exists(manifest_.model_path)) {
    Fail(ErrorCode::kIo, "model file not found: " + manifest_.model_path.string());
  }
  model_ = PromptModel::FromFile(manifest_.model_path);

  std::vector<int> strata;
  if (!manifest_.interaction_strata_spec.is_null()) {
    const json& raw = manifest_.interaction_strata_spec;
    if (!raw.is_array()) Fail(ErrorCode::kValidation, "terms.interaction_strata: expected an array");
    for (const auto& entry : raw) {
      int index = -1;
      if (entry.is_number_integer()) {
        index = entry.get<int>();
      } else if (entry.is_string()) {
        for (const auto& s : model_.strata()) {
          if (s.name == entry.get<std::string>()) index = s.index;
        }
        if (index < 0) {
          Fail(ErrorCode::kValidation,
               "terms.interaction_strata: no stratum named '" + entry.get<std::string>() + "'");
        }
      } else {
        Fail(ErrorCode::kValidation, "terms.interaction_strata: expected names or indices");
      }
      if (index < 0 || index >= model_.num_strata() || !model_.is_variable(index)) {
        Fail(ErrorCode::kValidation, "terms.interaction_strata: stratum " +
                                         std::to_string(index) + " is not a variable stratum");
      }
      strata.push_back(index);
    }
  } else {
    strata = model_.variable_strata();
  }
  manifest_.interaction_strata = strata;
  if (manifest_.selection.interaction_strata.empty()) {
    manifest_.selection.interaction_strata = strata;
  }
  if (manifest_.selection.max_level > manifest_.max_order) {
    Fail(ErrorCode::kValidation, "selection.max_level exceeds terms.max_order");
  }
  manifest_.selection.Validate();
  subprompts_ = EnumerateSubprompts(model_);

  fs::create_directories(out_);
  const fs::path copy = out_ / kManifestCopy;
  if (fs::exists(copy)) {
    const std::string existing = ReadFileToString(copy.string());
    CheckHash(HexDigest(Fnv1a64(existing)), manifest_.hash, copy);
  } else {
    WriteFileAtomic(copy.string(), manifest_.text);
  }
  prepared_ = true;
}

std::unique_ptr<Scorer> Pipeline::MakeScorer() const {
  json cfg = manifest_.scorer;
  if (scorer_kind_ == "synthetic") {
    CheckFields(cfg, "scorer", {"kind", "weights", "noise_sd", "binary"});
    if (!cfg.contains("weights")) {
      Fail(ErrorCode::kValidation, "scorer.weights: required for the synthetic scorer");
    }
    SyntheticDefinition def = ParseSyntheticWeights(model_, cfg["weights"]);
    try {
      def.noise_sd = cfg.value("noise_sd", 0.0);
      def.binary = cfg.value("binary", false);
    } catch (const json::exception& e) {
      Fail(ErrorCode::kValidation, std::string("scorer: ") + e.what());
    }
    if (def.noise_sd < 0) Fail(ErrorCode::kValidation, "scorer.noise_sd: must be non-negative");
    def.seed = manifest_.seed;
    return std::make_unique<SyntheticOracle>(std::move(def));
  }
  EndpointConfig config = EndpointConfig::FromJson(cfg);
  std::shared_ptr<Transport> transport;
  if (scorer_kind_ == "replay") {
    if (!cfg.contains("fixtures")) {
      Fail(ErrorCode::kValidation, "scorer.fixtures: required for the replay scorer");
    }
    transport = std::make_shared<ReplayTransport>(cfg["fixtures"].get<std::string>());
  } else {
    config.Validate();
    transport = std::make_shared<HttpTransport>(config.base_url, config.timeout_ms);
  }
  return std::make_unique<EndpointScorer>(CompletionClient(config, transport));
}

std::vector<TermDescriptor> Pipeline::Universe() const {
  return TermUniverse(model_, manifest_.interaction_strata, manifest_.max_order);
}

std::vector<double> Pipeline::GridValues() const {
  if (manifest_.grid.empty()) {
    Fail(ErrorCode::kValidation, "fit.grid: no lambda grid given (manifest or --grid)");
  }
  return ParseGrid(manifest_.grid);
}

ScoreTable Pipeline::LoadScores() const {
  const fs::path meta_file = out_ / kScoresMetaFile;
  const json meta = ParseJsonFile(meta_file, "score");
  CheckHash(HashOf(meta), manifest_.hash, meta_file);
  const fs::path store_file = out_ / kScoresFile;
  if (!fs::exists(store_file)) {
    Fail(ErrorCode::kMissingArtifact, std::string(kScoresFile) + " not found in " +
                                          out_.string() + "; run `iams score` first");
  }
  const std::string scorer_id = meta.at("scorer_id").get<std::string>();
  const int repeats = meta.at("repeats").get<int>();
  ScoreStore store(store_file);
  std::vector<ScoreRecord> records;
  records.reserve(subprompts_.size() * repeats);
  for (const auto& sub : subprompts_) {
    for (int r = 0; r < repeats; ++r) {
      if (auto rec = store.Find(scorer_id, sub.key, r)) records.push_back(std::move(*rec));
    }
  }
  const ScoreKind kind = manifest_.response == ResponseKind::kBinary ? ScoreKind::kBinary
                                                                     : ScoreKind::kContinuous;
  try {
    return ScoreTable::Assemble(scorer_id, kind, subprompts_, repeats, records);
  } catch (const Error& e) {
    Fail(e.code(), std::string(e.what()) + "; run `iams score` to complete the store");
  }
}

json Pipeline::Validate() {
  Prepare();
  auto scorer = MakeScorer();
  if (manifest_.fit_kind == FitKind::kLogistic && manifest_.response != ResponseKind::kBinary) {
    Fail(ErrorCode::kValidation, "fit.kind: logistic fits need response \"binary\"");
  }
  if (manifest_.response == ResponseKind::kBinary && manifest_.fit_kind != FitKind::kLogistic &&
      manifest_.fit_kind != FitKind::kOls) {
    Fail(ErrorCode::kValidation, "fit.kind: binary responses support ols or logistic fits");
  }
  std::size_t grid_points = 0;
  if (!manifest_.grid.empty()) grid_points = ParseGrid(manifest_.grid).size();
  const auto universe = Universe();
  return {{"manifest_hash", manifest_.hash},
          {"model", DescribeModel(model_)},
          {"scorer", {{"kind", scorer_kind_}, {"id", scorer->id()}}},
          {"fit", FitKindName(manifest_.fit_kind)},
          {"universe_columns", universe.size() + 1},
          {"grid_points", grid_points}};
}

json Pipeline::Enumerate() {
  Prepare();
  std::ostringstream ss;
  ss << HashComment(manifest_.hash);
  csv::WriteRow(ss, {"index", "subprompt_key", "rendered"});
  for (std::size_t i = 0; i < subprompts_.size(); ++i) {
    csv::WriteRow(ss, {std::to_string(i), subprompts_[i].key, subprompts_[i].rendered});
  }
  WriteFileAtomic((out_ / kSubpromptsFile).string(), ss.str());
  return {{"count", subprompts_.size()}, {"file", (out_ / kSubpromptsFile).string()}};
}

json Pipeline::Score() {
  Prepare();
  const fs::path meta_file = out_ / kScoresMetaFile;
  if (fs::exists(meta_file)) {
    CheckHash(HashOf(ParseJsonFile(meta_file, "score")), manifest_.hash, meta_file);
  }
  auto scorer = MakeScorer();
  ScoreStore store(out_ / kScoresFile);
  const std::size_t before = store.size();
  ScoreOptions opts;
  opts.repeats = manifest_.repeats;
  opts.concurrency = manifest_.concurrency;
  opts.max_retries = manifest_.max_retries;
  const ScoreTable table = ScoreAll(*scorer, model_, subprompts_, store, opts);
  json meta = {{"scorer_id", table.scorer_id},
               {"scorer_kind", scorer_kind_},
               {"repeats", table.repeats},
               {"subprompts", subprompts_.size()}};
  WriteFileAtomic(meta_file.string(), WithHash(meta, manifest_.hash));
  std::size_t flagged = 0;
  for (const auto& r : table.records) flagged += r.flagged ? 1 : 0;
  return {{"scorer_id", table.scorer_id},
          {"records", table.records.size()},
          {"new_records", store.size() - before},
          {"flagged", flagged},
          {"baseline", table.records.front().raw}};
}

json Pipeline::Design() {
  Prepare();
  const DesignMatrix design = BuildDesignMatrix(model_, subprompts_, Universe(), manifest_.repeats);
  std::ostringstream ss;
  ss << HashComment(manifest_.hash);
  design.WriteCsv(ss);
  WriteFileAtomic((out_ / kDesignFile).string(), ss.str());
  WriteFileAtomic((out_ / kDesignColumnsFile).string(),
                  WithHash({{"columns", design.ColumnManifest()}}, manifest_.hash));
  return {{"rows", design.rows()}, {"columns", design.cols()}};
}

json Pipeline::Fit() {
  Prepare();
  const ScoreTable table = LoadScores();
  const std::vector<double> y = table.Response(manifest_.response);
  const auto terms = TermUniverse(model_, manifest_.interaction_strata, manifest_.fit_max_order);
  const DesignMatrix design = BuildDesignMatrix(model_, subprompts_, terms, table.repeats);
  FitResult fit;
  switch (manifest_.fit_kind) {
    case FitKind::kOls: fit = FitOls(design, y); break;
    case FitKind::kLasso: fit = FitLasso(design, y, manifest_.lambda); break;
    case FitKind::kLogistic: fit = FitLogistic(design, y, manifest_.lambda); break;
  }
  json doc = fit.ToJson();
  doc["response"] = ResponseKindName(manifest_.response);
  WriteFileAtomic((out_ / kFitFile).string(), WithHash(doc, manifest_.hash));
  return {{"method", fit.method},
          {"columns", fit.labels.size()},
          {"r_squared", fit.r_squared},
          {"adj_r_squared", fit.adj_r_squared},
          {"mse", fit.mse},
          {"converged", fit.converged}};
}

json Pipeline::Path() {
  Prepare();
  const std::vector<double> grid = GridValues();
  const ScoreTable table = LoadScores();
  const std::vector<double> y = table.Response(manifest_.response);
  const DesignMatrix design = BuildDesignMatrix(model_, subprompts_, Universe(), table.repeats);
  const LassoPath path = FitLassoPath(design, y, grid);
  std::ostringstream ss;
  ss << HashComment(manifest_.hash);
  path.WriteCsv(ss);
  WriteFileAtomic((out_ / kPathFile).string(), ss.str());
  std::size_t unconverged = 0;
  for (bool c : path.converged) unconverged += c ? 0 : 1;
  return {{"points", path.lambdas.size()},
          {"columns", path.labels.size()},
          {"mse_first", path.mse.front()},
          {"mse_last", path.mse.back()},
          {"unconverged", unconverged}};
}

json Pipeline::Select() {
  Prepare();
  const ScoreTable table = LoadScores();
  const std::vector<double> y = table.Response(manifest_.response);
  const DesignMatrix design = BuildDesignMatrix(model_, subprompts_, Universe(), table.repeats);
  const SelectionTrace trace = ForwardSelect(design, y, manifest_.selection);
  std::string lines;
  for (const auto& step : trace.log) {
    json line = step.ToJson();
    line["manifest_hash"] = manifest_.hash;
    lines += line.dump() + "\n";
  }
  WriteFileAtomic((out_ / kTraceFile).string(), lines);
  json doc = trace.final_fit.ToJson();
  doc["included"] = trace.included;
  doc["response"] = ResponseKindName(manifest_.response);
  WriteFileAtomic((out_ / kSelectionFitFile).string(), WithHash(doc, manifest_.hash));
  std::map<int, int> by_level;
  for (const auto& label : trace.included) {
    by_level[1 + static_cast<int>(std::count(label.begin(), label.end(), ':'))]++;
  }
  json levels = json::object();
  for (const auto& [level, count] : by_level) levels[std::to_string(level)] = count;
  return {{"included", trace.included.size()},
          {"included_by_level", levels},
          {"steps", trace.log.size()},
          {"adj_r_squared", trace.final_fit.adj_r_squared}};
}

json Pipeline::Shapley() {
  Prepare();
  const ScoreTable table = LoadScores();
  const auto value = ScoreTableValue(model_, table.MeanByKey(manifest_.response));
  const auto estimates = ShapleyValues(model_, value);
  std::ostringstream ss;
  ss << HashComment(manifest_.hash);
  WriteShapleyCsv(ss, estimates);
  WriteFileAtomic((out_ / kShapleyCsvFile).string(), ss.str());
  WriteFileAtomic((out_ / kShapleyJsonFile).string(),
                  WithHash({{"estimates", ShapleyToJson(estimates)}}, manifest_.hash));
  return {{"components", estimates.size()}};
}

json Pipeline::Report() {
  Prepare();
  const ScoreTable table = LoadScores();
  ReportInputs inputs;
  inputs.manifest_hash = manifest_.hash;
  inputs.bins = manifest_.bins;
  inputs.universe.push_back(kInterceptLabel);
  for (const auto& t : Universe()) {
    inputs.universe.push_back(t.label);
    if (t.order == 1) {
      const auto& comp = model_.component({t.members[0].stratum, t.members[0].position});
      if (!comp.tags.empty()) inputs.tags[t.label] = comp.tags;
    }
  }

  const fs::path fit_file = out_ / kFitFile;
  const json fit_doc = ParseJsonFile(fit_file, "fit");
  CheckHash(HashOf(fit_doc), manifest_.hash, fit_file);
  FitResult fit = FitResult::FromJson(fit_doc);
  const std::string fit_name = fit.method;
  inputs.fits.emplace_back(fit_name, std::move(fit));
  inputs.qq_model = fit_name;

  const fs::path sel_file = out_ / kSelectionFitFile;
  if (fs::exists(sel_file)) {
    const json doc = ParseJsonFile(sel_file, "select");
    CheckHash(HashOf(doc), manifest_.hash, sel_file);
    inputs.fits.emplace_back("forward_selected", FitResult::FromJson(doc));
  }
  const fs::path shapley_file = out_ / kShapleyJsonFile;
  if (fs::exists(shapley_file)) {
    const json doc = ParseJsonFile(shapley_file, "shapley");
    CheckHash(HashOf(doc), manifest_.hash, shapley_file);
    inputs.shapley = ShapleyFromJson(doc.at("estimates"));
  }
  const fs::path path_file = out_ / kPathFile;
  if (fs::exists(path_file)) {
    const std::string text = ReadFileToString(path_file.string());
    std::istringstream probe(text);
    CheckHash(CsvHash(csv::Read(probe)), manifest_.hash, path_file);
    std::istringstream in(text);
    inputs.path = LassoPath::ReadCsv(in);
  }

  double baseline_sum = 0.0;
  int baseline_n = 0;
  for (const auto& r : table.records) {
    if (r.dcpmi) inputs.dcpmi.push_back(*r.dcpmi);
    if (r.subprompt_key == subprompts_.front().key) {
      baseline_sum += r.raw;
      ++baseline_n;
    }
  }
  if (baseline_n > 0) inputs.baseline_probability = baseline_sum / baseline_n;

  const ReportBundle bundle = BuildComparisonReport(inputs);
  const fs::path dir = out_ / kReportDir;
  WriteReportBundle(bundle, dir);
  const ReportBundle reread = ReadReportBundle(dir);
  return {{"dir", dir.string()},
          {"models", bundle.coefficients.models},
          {"rows", bundle.coefficients.rows.size()},
          {"summary", reread.summary}};
}

json Pipeline::Run() {
  json out = json::object();
  auto stage = [&](const char* name, auto fn) {
    const auto start = std::chrono::steady_clock::now();
    json result = (this->*fn)();
    result["seconds"] = Seconds(start);
    out[name] = std::move(result);
  };
  const auto start = std::chrono::steady_clock::now();
  stage("enumerate", &Pipeline::Enumerate);
  stage("score", &Pipeline::Score);
  stage("fit", &Pipeline::Fit);
  if (!manifest_.grid.empty()) stage("path", &Pipeline::Path);
  stage("select", &Pipeline::Select);
  stage("shapley", &Pipeline::Shapley);
  stage("report", &Pipeline::Report);
  out["seconds"] = Seconds(start);
  return out;
}

json Pipeline::Execute(const std::string& command) {
  if (command == "validate") return Validate();
  if (command == "enumerate") return Enumerate();
  if (command == "score") return Score();
  if (command == "design") return Design();
  if (command == "fit") return Fit();
  if (command == "path") return Path();
  if (command == "select") return Select();
  if (command == "shapley") return Shapley();
  if (command == "report") return Report();
  if (command == "run") return Run();
  Fail(ErrorCode::kInvalidArgument, "unknown command '" + command + "'");
}

}  // namespace iams
