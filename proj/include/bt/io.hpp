#pragma once

// File formats: JSON problem files, full-precision CSV for plans and traces,
// and binary PGM heatmaps.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bt/core_model.hpp"
#include "bt/reg_solver.hpp"

namespace bt {

enum class WeightForm { Additive, Multiplicative };

const char* to_string(WeightForm form);

/// On-disk problem description. `weights` holds n*m row-major values, read as
/// a (additive) or b (multiplicative) according to `form`.
struct ProblemFile {
  std::size_t n = 0;
  std::size_t m = 0;
  Sense sense = Sense::Maximize;
  WeightForm form = WeightForm::Additive;
  Vector weights;
  Vector r;
  Vector c;

  bool operator==(const ProblemFile&) const = default;
};

/// Parses the JSON text. Errors are ParseError with a "line L, column C"
/// location.
ProblemFile parse_problem(std::string_view text);
std::string serialize_problem(const ProblemFile& file);

ProblemFile read_problem_file(const std::filesystem::path& path);
void write_problem_file(const std::filesystem::path& path, const ProblemFile& file);

ProblemFile to_problem_file(const OTProblem& problem);
OTProblem to_ot_problem(const ProblemFile& file);

/// %.17g, which round-trips every finite double.
std::string format_double(double value);

std::string matrix_to_csv(const Matrix& matrix);
Matrix parse_matrix_csv(std::string_view text);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& matrix);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Columns iter,eta,criterion.
std::string trace_to_csv(const ConvergenceTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace);

/// 8-bit gray levels, min -> 0 and max -> 255 linearly; a constant matrix is
/// uniformly 128. Non-finite entries are rejected.
std::vector<std::uint8_t> gray_levels(const Matrix& matrix);
/// Binary P5 image, first matrix row at the top.
void write_pgm(const std::filesystem::path& path, const Matrix& matrix);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace bt
