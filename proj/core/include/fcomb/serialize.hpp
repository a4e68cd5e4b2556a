#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fcomb/dgp_solver.hpp"
#include "fcomb/errors.hpp"
#include "fcomb/estimation.hpp"
#include "fcomb/experiments.hpp"
#include "fcomb/inference.hpp"
#include "fcomb/timeseries.hpp"

namespace fcomb {

/// Input-format error carrying a 1-based line (and column when known).
struct ParseError : ValidationError {
    ParseError(const std::string& source, std::size_t line, std::size_t column,
               const std::string& message);
    std::size_t line;
    std::size_t column;
};

/// 17 significant digits.
std::string format_real(double x);

std::string to_json(const FitResult& fit, int indent = 2);
std::string to_json(const TestOutcome& outcome, int indent = 2);
std::string to_json(const SimulatedCvModel& model, int indent = 2);
std::string to_json(const DgpSolution& solution, int indent = 2);
std::string to_json(const std::vector<DgpSolution>& catalog, int indent = 2);
std::string to_json(const RejectionCurve& curve, const McConfig& config, int indent = 2);
std::string to_json(const std::vector<SizePowerRow>& table, const SizePowerConfig& config,
                    int indent = 2);
std::string to_json(const SeriesSample& series, const Ar2Dgp& dgp, int indent = 2);

SimulatedCvModel cv_model_from_json(const std::string& text, const std::string& source = "<json>");
DgpSolution dgp_solution_from_json(const std::string& text, const std::string& source = "<json>");
std::vector<DgpSolution> catalog_from_json(const std::string& text,
                                           const std::string& source = "<json>");

/// Catalog entry for (loss, target); throws ValidationError when absent.
const DgpSolution& catalog_lookup(const std::vector<DgpSolution>& catalog, Loss loss,
                                  double target);

void write_series_csv(std::ostream& out, std::span<const double> values);
std::vector<double> read_series_csv(std::istream& in, const std::string& source = "<csv>");

void write_loss_csv(std::ostream& out, const LossSeries& bench, const LossSeries& alt);

struct PairedLosses {
    LossSeries bench;
    LossSeries alt;
};

/// Header t,loss_benchmark,loss_alternative; t strictly increasing; cells finite.
/// r = 0 marks an unknown in-sample size.
PairedLosses ingest_loss_csv(std::istream& in, std::size_t r, const std::string& source = "<csv>");
PairedLosses ingest_loss_csv(const std::filesystem::path& path, std::size_t r);

/// Header t,loss: one loss column.
std::vector<double> read_single_loss_csv(std::istream& in, const std::string& source = "<csv>");

void write_curve_csv(std::ostream& out, const RejectionCurve& curve);
void write_size_power_csv(std::ostream& out, const std::vector<SizePowerRow>& table);
std::string curve_svg(const RejectionCurve& curve, const std::string& title);

std::string read_text_file(const std::filesystem::path& path);
/// Temp file in the target directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace fcomb
