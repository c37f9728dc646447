#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parps::experiments {

// Config file rejected: bad syntax, unknown key/kind or out-of-range value.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A validated experiment description: a kind, its parameters (defaults
// filled in), the seed and the output basename.
struct Spec {
  std::string kind;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  std::string output_path;

  friend bool operator==(const Spec&, const Spec&) = default;
};

std::vector<std::string> list_kinds();

// Default config text for a kind (round-trips through validate_spec).
std::string emit_default(const std::string& kind);

// Parse and validate `key = value` config text ('#' starts a comment).
Spec validate_spec(std::string_view config_text);

struct ResultTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, std::string> config_echo;
  std::map<std::string, std::string> metadata;  // kind-specific summaries

  std::string to_csv() const;
};

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  int threads = 1;
  std::string out_dir = ".";
  bool persist = true;
};

// Execute the experiment; writes <out_dir>/<output_path>.csv and .json
// unless persist is off. Deterministic given (spec, seed), independent of
// the thread count.
ResultTable run_experiment(const Spec& spec, const RunOptions& options = {});

// Numeric cell formatting used throughout the CSV output.
std::string format_number(double v);

}  // namespace parps::experiments
