#include "lmsearch/evaluators.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmsearch/errors.hpp"

namespace lmsearch {

double SyntheticLandscape::value_of(const NCode& code) const {
  double value = 0.0;
  for (std::size_t d = 0; d < code.size(); ++d) {
    value += utilities[d][code.digit(d)];
  }
  for (const Interaction& term : interactions) {
    if (code.digit(term.dim_a) == term.opt_a && code.digit(term.dim_b) == term.opt_b) {
      value += term.value;
    }
  }
  return value;
}

SyntheticLandscape SyntheticLandscape::option_index(const SearchSpace& space) {
  SyntheticLandscape landscape;
  landscape.utilities.reserve(space.dimension_count());
  for (const Dimension& dim : space.dimensions()) {
    std::vector<double> row(dim.options.size());
    for (std::size_t o = 0; o < row.size(); ++o) row[o] = static_cast<double>(o);
    landscape.utilities.push_back(std::move(row));
  }
  return landscape;
}

namespace {

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ValidationError("table line " + std::to_string(line_no) +
                          ": non-numeric cell '" + cell + "' in column '" + column + "'");
  }
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

PerformanceTable PerformanceTable::load(const std::string& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open table file: " + path);

  PerformanceTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("table " + path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "ncode") {
    throw ValidationError("table " + path + ": header must be 'ncode,<metric>[,...]'");
  }
  table.metrics_.assign(header.begin() + 1, header.end());

  std::unordered_map<std::string, std::size_t> first_seen_line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError("table line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
    }
    const std::string& code_text = cells[0];
    try {
      parse_ncode(space, code_text);
    } catch (const ValidationError& ex) {
      throw ValidationError("table line " + std::to_string(line_no) + ": " + ex.what());
    }
    const auto [it, inserted] = first_seen_line.emplace(code_text, line_no);
    if (!inserted) {
      throw ValidationError("table: duplicate code '" + code_text + "' on lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    std::vector<double> values;
    values.reserve(table.metrics_.size());
    for (std::size_t c = 1; c < cells.size(); ++c) {
      values.push_back(parse_cell(cells[c], line_no, header[c]));
    }
    table.rows_.emplace(code_text, std::move(values));
  }
  if (table.rows_.empty()) throw ValidationError("table " + path + ": no data rows");
  return table;
}

bool PerformanceTable::contains(const NCode& code) const {
  return rows_.count(code.str()) > 0;
}

double PerformanceTable::lookup(const NCode& code, const std::string& metric) const {
  const auto row = rows_.find(code.str());
  if (row == rows_.end()) {
    throw EvaluationError("table: no row for code '" + code.str() + "'");
  }
  for (std::size_t m = 0; m < metrics_.size(); ++m) {
    if (metrics_[m] == metric) return row->second[m];
  }
  throw EvaluationError("table: no metric column '" + metric + "'");
}

double PerformanceTable::worst_raw(const std::string& metric, Direction direction) const {
  std::size_t column = metrics_.size();
  for (std::size_t m = 0; m < metrics_.size(); ++m) {
    if (metrics_[m] == metric) { column = m; break; }
  }
  if (column == metrics_.size()) {
    throw EvaluationError("table: no metric column '" + metric + "'");
  }
  bool first = true;
  double worst = 0.0;
  for (const auto& [_, values] : rows_) {
    const double canonical = canonical_performance(values[column], direction);
    if (first || canonical < canonical_performance(worst, direction)) {
      worst = values[column];
      first = false;
    }
  }
  return worst;
}

std::string run_command_capture(const std::string& command,
                                std::chrono::milliseconds timeout,
                                const std::string& workdir) {
  int pipe_fds[2];
  if (pipe(pipe_fds) != 0) {
    throw EvaluationError(std::string("pipe failed: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(pipe_fds[0]);
    close(pipe_fds[1]);
    throw EvaluationError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    close(pipe_fds[0]);
    dup2(pipe_fds[1], STDOUT_FILENO);
    close(pipe_fds[1]);
    if (!workdir.empty() && chdir(workdir.c_str()) != 0) _exit(127);
    setpgid(0, 0);  // own process group so the whole pipeline can be killed
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(pipe_fds[1]);

  std::string output;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  bool timed_out = false;
  char buffer[4096];
  while (true) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      timed_out = true;
      break;
    }
    struct pollfd pfd{pipe_fds[0], POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) {
      timed_out = true;
      break;
    }
    const ssize_t n = read(pipe_fds[0], buffer, sizeof(buffer));
    if (n <= 0) break;  // EOF or error
    output.append(buffer, static_cast<std::size_t>(n));
  }
  close(pipe_fds[0]);

  if (timed_out) {
    kill(-pid, SIGKILL);
    int status = 0;
    waitpid(pid, &status, 0);
    throw EvaluationError("external command timed out after " +
                          std::to_string(timeout.count()) + " ms: " + command);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw EvaluationError("external command exited with status " +
                          std::to_string(code) + ": " + command);
  }
  return output;
}

namespace {

std::string substitute_ncode(const std::string& command_template, const std::string& code) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = command_template.find("{ncode}", pos);
    if (hit == std::string::npos) {
      out += command_template.substr(pos);
      return out;
    }
    out += command_template.substr(pos, hit - pos);
    out += code;
    pos = hit + 7;
  }
}

double parse_final_line_metric(const std::string& output, const std::string& command) {
  // last non-empty line of stdout is the metric
  std::size_t end = output.size();
  while (end > 0 && (output[end - 1] == '\n' || output[end - 1] == '\r')) --end;
  if (end == 0) {
    throw EvaluationError("external command produced no output: " + command);
  }
  std::size_t begin = output.rfind('\n', end - 1);
  begin = (begin == std::string::npos) ? 0 : begin + 1;
  std::string line = output.substr(begin, end - begin);
  const auto first = line.find_first_not_of(" \t\r");
  const auto last = line.find_last_not_of(" \t\r");
  if (first == std::string::npos) {
    throw EvaluationError("external command produced no output: " + command);
  }
  line = line.substr(first, last - first + 1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
  if (ec != std::errc() || ptr != line.data() + line.size() || !std::isfinite(value)) {
    throw EvaluationError("external command output is not a number: '" + line +
                          "' from: " + command);
  }
  return value;
}

}  // namespace

struct Evaluator::Backing {
  EvaluatorKind kind = EvaluatorKind::kSynthetic;
  std::string metric;
  Direction direction = Direction::kMaximize;

  std::optional<PerformanceTable> table;
  bool impute_missing_with_worst = false;
  std::string table_path;

  std::optional<SyntheticLandscape> landscape;

  std::optional<ExternalCommand> command;
};

Evaluator::Evaluator(std::shared_ptr<const Backing> backing)
    : backing_(std::move(backing)),
      memo_mutex_(std::make_shared<std::mutex>()),
      memo_(std::make_shared<std::map<std::string, ArchRecord>>()) {}

Evaluator Evaluator::tabular(PerformanceTable table, std::string metric,
                             Direction direction, bool impute_missing_with_worst) {
  auto backing = std::make_shared<Backing>();
  backing->kind = EvaluatorKind::kTabular;
  backing->metric = std::move(metric);
  backing->direction = direction;
  backing->table = std::move(table);
  backing->impute_missing_with_worst = impute_missing_with_worst;
  return Evaluator(std::move(backing));
}

Evaluator Evaluator::synthetic(SyntheticLandscape landscape, std::string metric,
                               Direction direction) {
  auto backing = std::make_shared<Backing>();
  backing->kind = EvaluatorKind::kSynthetic;
  backing->metric = std::move(metric);
  backing->direction = direction;
  backing->landscape = std::move(landscape);
  return Evaluator(std::move(backing));
}

Evaluator Evaluator::external(ExternalCommand command, std::string metric,
                              Direction direction) {
  auto backing = std::make_shared<Backing>();
  backing->kind = EvaluatorKind::kExternal;
  backing->metric = std::move(metric);
  backing->direction = direction;
  backing->command = std::move(command);
  return Evaluator(std::move(backing));
}

Evaluator Evaluator::from_json(const nlohmann::json& doc, const SearchSpace& space,
                               const std::string& base_dir) {
  if (!doc.is_object()) throw ValidationError("evaluator spec: not a JSON object");
  const std::string kind = doc.value("kind", "");
  const std::string metric = doc.value("metric", "score");
  const Direction direction = direction_from_string(doc.value("direction", "maximize"));

  if (kind == "tabular") {
    if (!doc.contains("table")) {
      throw ValidationError("evaluator spec: tabular kind requires 'table' path");
    }
    std::filesystem::path table_path = doc["table"].get<std::string>();
    if (table_path.is_relative() && !base_dir.empty()) {
      table_path = std::filesystem::path(base_dir) / table_path;
    }
    Evaluator evaluator = tabular(PerformanceTable::load(table_path.string(), space),
                                  metric, direction,
                                  doc.value("impute_missing_with_worst", false));
    const_cast<Backing&>(*evaluator.backing_).table_path = table_path.string();
    return evaluator;
  }
  if (kind == "synthetic") {
    SyntheticLandscape landscape;
    if (!doc.contains("utilities") ||
        (doc["utilities"].is_string() &&
         doc["utilities"].get<std::string>() == "option-index")) {
      landscape = SyntheticLandscape::option_index(space);
    } else if (doc["utilities"].is_array()) {
      landscape.utilities = doc["utilities"].get<std::vector<std::vector<double>>>();
    } else {
      throw ValidationError("evaluator spec: 'utilities' must be an array or \"option-index\"");
    }
    if (landscape.utilities.size() != space.dimension_count()) {
      throw ValidationError("evaluator spec: utilities cover " +
                            std::to_string(landscape.utilities.size()) +
                            " dimensions, space has " +
                            std::to_string(space.dimension_count()));
    }
    for (std::size_t d = 0; d < landscape.utilities.size(); ++d) {
      if (landscape.utilities[d].size() != space.radix(d)) {
        throw ValidationError("evaluator spec: utilities[" + std::to_string(d) +
                              "] has " + std::to_string(landscape.utilities[d].size()) +
                              " entries, dimension has " + std::to_string(space.radix(d)));
      }
      for (double u : landscape.utilities[d]) {
        if (!std::isfinite(u)) {
          throw ValidationError("evaluator spec: utilities[" + std::to_string(d) +
                                "] contains a non-finite value");
        }
      }
    }
    for (const auto& term : doc.value("interactions", nlohmann::json::array())) {
      SyntheticLandscape::Interaction interaction;
      interaction.dim_a = term.at("dim_a").get<std::size_t>();
      interaction.opt_a = term.at("opt_a").get<std::size_t>();
      interaction.dim_b = term.at("dim_b").get<std::size_t>();
      interaction.opt_b = term.at("opt_b").get<std::size_t>();
      interaction.value = term.at("value").get<double>();
      if (interaction.dim_a >= space.dimension_count() ||
          interaction.dim_b >= space.dimension_count() ||
          interaction.opt_a >= space.radix(interaction.dim_a) ||
          interaction.opt_b >= space.radix(interaction.dim_b)) {
        throw ValidationError("evaluator spec: interaction term out of range");
      }
      landscape.interactions.push_back(interaction);
    }
    landscape.noise_sd = doc.value("noise_sd", 0.0);
    if (landscape.noise_sd < 0.0) {
      throw ValidationError("evaluator spec: noise_sd must be >= 0");
    }
    return synthetic(std::move(landscape), metric, direction);
  }
  if (kind == "external") {
    if (!doc.contains("command")) {
      throw ValidationError("evaluator spec: external kind requires 'command'");
    }
    ExternalCommand command;
    command.command_template = doc["command"].get<std::string>();
    command.timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(doc.value("timeout_sec", 60.0) * 1000.0));
    command.workdir = doc.value("workdir", "");
    if (command.timeout.count() <= 0) {
      throw ValidationError("evaluator spec: timeout_sec must be positive");
    }
    return external(std::move(command), metric, direction);
  }
  throw ValidationError("evaluator spec: unknown kind '" + kind +
                        "' (expected tabular, synthetic, or external)");
}

Evaluator Evaluator::load_spec_file(const std::string& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open evaluator spec: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("evaluator spec " + path + ": " + ex.what());
  }
  return from_json(doc, space, std::filesystem::path(path).parent_path().string());
}

ArchRecord Evaluator::evaluate(const NCode& code, Rng& rng, Provenance provenance) {
  const std::string key = code.str();
  {
    std::lock_guard<std::mutex> lock(*memo_mutex_);
    const auto hit = memo_->find(key);
    if (hit != memo_->end()) return hit->second;
  }

  double raw = 0.0;
  switch (backing_->kind) {
    case EvaluatorKind::kTabular: {
      if (backing_->table->contains(code)) {
        raw = backing_->table->lookup(code, backing_->metric);
      } else if (backing_->impute_missing_with_worst) {
        raw = backing_->table->worst_raw(backing_->metric, backing_->direction);
      } else {
        throw EvaluationError("tabular evaluator: no row for code '" + key +
                              "' (enable worst-value imputation to tolerate gaps)");
      }
      break;
    }
    case EvaluatorKind::kSynthetic: {
      raw = backing_->landscape->value_of(code);
      if (backing_->landscape->noise_sd > 0.0) {
        raw += rng.gaussian(0.0, backing_->landscape->noise_sd);
      }
      break;
    }
    case EvaluatorKind::kExternal: {
      const std::string command =
          substitute_ncode(backing_->command->command_template, key);
      const std::string output = run_command_capture(
          command, backing_->command->timeout, backing_->command->workdir);
      raw = parse_final_line_metric(output, command);
      break;
    }
  }

  ArchRecord record;
  record.code = code;
  record.raw_metrics[backing_->metric] = raw;
  record.performance = canonical_performance(raw, backing_->direction);
  record.provenance = provenance;

  std::lock_guard<std::mutex> lock(*memo_mutex_);
  const auto [it, inserted] = memo_->emplace(key, std::move(record));
  return it->second;
}

EvaluatorKind Evaluator::kind() const { return backing_->kind; }
const std::string& Evaluator::metric_name() const { return backing_->metric; }
Direction Evaluator::direction() const { return backing_->direction; }

bool Evaluator::deterministic() const {
  if (backing_->kind == EvaluatorKind::kSynthetic) {
    return backing_->landscape->noise_sd == 0.0;
  }
  return true;
}

std::size_t Evaluator::unique_evaluations() const {
  std::lock_guard<std::mutex> lock(*memo_mutex_);
  return memo_->size();
}

Evaluator Evaluator::clone_fresh() const { return Evaluator(backing_); }

nlohmann::ordered_json Evaluator::spec_json() const {
  nlohmann::ordered_json doc;
  switch (backing_->kind) {
    case EvaluatorKind::kTabular:
      doc["kind"] = "tabular";
      doc["table"] = backing_->table_path;
      doc["impute_missing_with_worst"] = backing_->impute_missing_with_worst;
      break;
    case EvaluatorKind::kSynthetic: {
      doc["kind"] = "synthetic";
      doc["utilities"] = backing_->landscape->utilities;
      if (!backing_->landscape->interactions.empty()) {
        auto terms = nlohmann::ordered_json::array();
        for (const auto& term : backing_->landscape->interactions) {
          terms.push_back({{"dim_a", term.dim_a},
                           {"opt_a", term.opt_a},
                           {"dim_b", term.dim_b},
                           {"opt_b", term.opt_b},
                           {"value", term.value}});
        }
        doc["interactions"] = std::move(terms);
      }
      doc["noise_sd"] = backing_->landscape->noise_sd;
      break;
    }
    case EvaluatorKind::kExternal:
      doc["kind"] = "external";
      doc["command"] = backing_->command->command_template;
      doc["timeout_sec"] = backing_->command->timeout.count() / 1000.0;
      if (!backing_->command->workdir.empty()) doc["workdir"] = backing_->command->workdir;
      break;
  }
  doc["metric"] = backing_->metric;
  doc["direction"] = to_string(backing_->direction);
  return doc;
}

ArchRecord enumerate_optimum(const SearchSpace& space, Evaluator& evaluator,
                             std::uint64_t cap) {
  if (!evaluator.deterministic()) {
    throw EvaluationError("enumerate_optimum: evaluator is noisy");
  }
  const ExactCount count = space_cardinality(space);
  if (!count.less_equal(cap)) {
    throw EvaluationError("enumerate_optimum: cardinality " + count.str() +
                          " exceeds cap " + std::to_string(cap));
  }
  Rng rng(0);
  const std::uint64_t total = count.as_u64();
  std::vector<std::uint8_t> digits(space.dimension_count(), 0);
  std::optional<ArchRecord> best;
  for (std::uint64_t n = 0; n < total; ++n) {
    ArchRecord record = evaluator.evaluate(NCode(digits), rng, Provenance::kExternal);
    // strict improvement keeps the lexicographically first code on ties
    if (!best || record.performance > best->performance) best = std::move(record);
    for (std::size_t d = space.dimension_count(); d-- > 0;) {
      if (++digits[d] < space.radix(d)) break;
      digits[d] = 0;
    }
  }
  return *best;
}

}  // namespace lmsearch
