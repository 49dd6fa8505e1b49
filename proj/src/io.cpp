#include "bt/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bt {

using nlohmann::json;

const char* to_string(WeightForm form) {
  return form == WeightForm::Additive ? "additive" : "multiplicative";
}

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t k = 0; k < offset; ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

[[noreturn]] void parse_fail(std::string_view text, std::size_t offset, const std::string& what) {
  const auto [line, column] = line_column(text, offset);
  throw Error(ErrorCode::ParseError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

// Location of a field for semantic diagnostics: the first occurrence of its
// quoted key, or the start of the document.
[[noreturn]] void field_fail(std::string_view text, const std::string& field, const std::string& what) {
  const std::size_t at = text.find("\"" + field + "\"");
  parse_fail(text, at == std::string_view::npos ? 0 : at, "field '" + field + "': " + what);
}

const json& require_field(const json& doc, std::string_view text, const std::string& field) {
  const auto it = doc.find(field);
  if (it == doc.end()) parse_fail(text, 0, "missing field '" + field + "'");
  return *it;
}

std::size_t read_count(const json& doc, std::string_view text, const std::string& field) {
  const json& v = require_field(doc, text, field);
  if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
    field_fail(text, field, "expected a positive integer");
  }
  return v.get<std::size_t>();
}

Vector read_array(const json& doc, std::string_view text, const std::string& field,
                  std::size_t expected) {
  const json& v = require_field(doc, text, field);
  if (!v.is_array()) field_fail(text, field, "expected an array of numbers");
  if (v.size() != expected) {
    field_fail(text, field,
               "expected " + std::to_string(expected) + " values, found " + std::to_string(v.size()));
  }
  Vector out;
  out.reserve(expected);
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) {
      field_fail(text, field, "entry " + std::to_string(k + 1) + " is not a number");
    }
    out.push_back(v[k].get<double>());
  }
  return out;
}

}  // namespace

ProblemFile parse_problem(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // byte is 1-based and points just past the offending character.
    parse_fail(text, e.byte > 0 ? e.byte - 1 : 0, "malformed JSON");
  }
  if (!doc.is_object()) parse_fail(text, 0, "expected a JSON object");

  ProblemFile file;
  file.n = read_count(doc, text, "n");
  file.m = read_count(doc, text, "m");

  const auto sense = doc.find("sense");
  if (sense != doc.end()) {
    if (*sense == "max" || *sense == "maximize") {
      file.sense = Sense::Maximize;
    } else if (*sense == "min" || *sense == "minimize") {
      file.sense = Sense::Minimize;
    } else {
      field_fail(text, "sense", "expected \"maximize\" or \"minimize\"");
    }
  }
  const auto form = doc.find("form");
  if (form != doc.end()) {
    if (*form == "additive") {
      file.form = WeightForm::Additive;
    } else if (*form == "multiplicative") {
      file.form = WeightForm::Multiplicative;
    } else {
      field_fail(text, "form", "expected \"additive\" or \"multiplicative\"");
    }
  }
  file.weights = read_array(doc, text, "weights", file.n * file.m);
  file.r = read_array(doc, text, "r", file.n);
  file.c = read_array(doc, text, "c", file.m);
  return file;
}

std::string serialize_problem(const ProblemFile& file) {
  // Hand-written so that every number carries 17 significant digits.
  auto array = [](const Vector& v) {
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k > 0) s += ", ";
      s += format_double(v[k]);
    }
    return s + "]";
  };
  std::string out = "{\n";
  out += "  \"n\": " + std::to_string(file.n) + ",\n";
  out += "  \"m\": " + std::to_string(file.m) + ",\n";
  out += std::string("  \"sense\": \"") + to_string(file.sense) + "\",\n";
  out += std::string("  \"form\": \"") + to_string(file.form) + "\",\n";
  out += "  \"weights\": " + array(file.weights) + ",\n";
  out += "  \"r\": " + array(file.r) + ",\n";
  out += "  \"c\": " + array(file.c) + "\n}\n";
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ProblemFile read_problem_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_problem(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_problem_file(const std::filesystem::path& path, const ProblemFile& file) {
  write_text_file(path, serialize_problem(file));
}

ProblemFile to_problem_file(const OTProblem& problem) {
  ProblemFile file;
  file.n = problem.n();
  file.m = problem.m();
  file.sense = problem.sense;
  file.form = WeightForm::Additive;
  file.weights.assign(problem.weights.data().begin(), problem.weights.data().end());
  file.r = problem.row_marginals;
  file.c = problem.col_marginals;
  return file;
}

OTProblem to_ot_problem(const ProblemFile& file) {
  Matrix w(file.n, file.m, file.weights);
  if (file.form == WeightForm::Multiplicative) {
    return moma_to_ot(MOMAProblem{std::move(w), file.r, file.c, file.sense});
  }
  return OTProblem{std::move(w), file.r, file.c, file.sense};
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string matrix_to_csv(const Matrix& matrix) {
  std::string out;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(matrix(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_matrix_csv(std::string_view text) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_start = 0;
  std::size_t line_no = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    ++line_no;
    std::string_view line = text.substr(line_start, line_end - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      std::size_t count = 0;
      std::size_t field_start = 0;
      while (true) {
        std::size_t field_end = line.find(',', field_start);
        if (field_end == std::string_view::npos) field_end = line.size();
        const std::string field(line.substr(field_start, field_end - field_start));
        char* end = nullptr;
        const double v = std::strtod(field.c_str(), &end);
        const bool rest_blank =
            end != field.c_str() &&
            std::all_of(static_cast<const char*>(end), field.c_str() + field.size(), [](char ch) { return ch == ' ' || ch == '\t'; });
        if (!rest_blank) {
          throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column " +
                                                 std::to_string(field_start + 1) +
                                                 ": expected a number");
        }
        values.push_back(v);
        ++count;
        if (field_end == line.size()) break;
        field_start = field_end + 1;
      }
      if (rows == 0) {
        cols = count;
      } else if (count != cols) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column 1: expected " +
                                               std::to_string(cols) + " values, found " +
                                               std::to_string(count));
      }
      ++rows;
    }
    line_start = line_end + 1;
  }
  if (rows == 0) throw Error(ErrorCode::ParseError, "line 1, column 1: empty matrix");
  return Matrix(rows, cols, std::move(values));
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& matrix) {
  write_text_file(path, matrix_to_csv(matrix));
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_matrix_csv(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = "iter,eta,criterion\n";
  for (const TraceRecord& rec : trace.records) {
    out += std::to_string(rec.iteration) + ',' + format_double(rec.eta) + ',' +
           format_double(rec.criterion) + '\n';
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace) {
  write_text_file(path, trace_to_csv(trace));
}

std::vector<std::uint8_t> gray_levels(const Matrix& matrix) {
  if (matrix.empty()) throw Error(ErrorCode::InvalidArgument, "cannot render an empty matrix");
  for (double v : matrix.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteEntry, "cannot render non-finite values");
  }
  const double lo = min_entry(matrix);
  const double hi = max_entry(matrix);
  std::vector<std::uint8_t> out(matrix.size(), 128);
  if (hi > lo) {
    for (std::size_t k = 0; k < matrix.size(); ++k) {
      const double level = std::round(255.0 * ((matrix.data()[k] - lo) / (hi - lo)));
      out[k] = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
    }
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Matrix& matrix) {
  const std::vector<std::uint8_t> pixels = gray_levels(matrix);
  std::string data = "P5\n" + std::to_string(matrix.cols()) + " " + std::to_string(matrix.rows()) +
                     "\n255\n";
  data.append(pixels.begin(), pixels.end());
  write_text_file(path, data);
}

}  // namespace bt
