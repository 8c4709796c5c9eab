#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mou/errors.hpp"
#include "mou/estimators.hpp"
#include "mou/experiments.hpp"
#include "mou/timeseries.hpp"

namespace mou::io {

/// Shortest exact decimal representation; "nan" for NaN sentinels.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view cell, long row, long col) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw FormatError("non-numeric cell at row " + std::to_string(row) +
                          ", column " + std::to_string(col) + ": '" +
                          std::string(cell) + "'");
    }
    if (!std::isfinite(v)) {
        throw FormatError("non-finite cell at row " + std::to_string(row) +
                          ", column " + std::to_string(col));
    }
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

/// Writes a series as CSV: header node_0..node_{M-1}, one row per sample.
inline void write_timeseries_csv(const std::filesystem::path& path, const TimeSeries& ts) {
    std::ofstream out = open_out(path);
    for (Eigen::Index i = 0; i < ts.node_count(); ++i) {
        out << (i ? "," : "") << "node_" << i;
    }
    out << "\n";
    for (Eigen::Index s = 0; s < ts.sample_count(); ++s) {
        for (Eigen::Index i = 0; i < ts.node_count(); ++i) {
            out << (i ? "," : "") << format_double(ts.data(i, s));
        }
        out << "\n";
    }
}

/// Loads a series from the CSV schema above.  The sample interval is not part
/// of the CSV; it comes from a manifest sidecar or a flag.
inline TimeSeries load_timeseries(const std::filesystem::path& path, double sample_interval) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("empty file: '" + path.string() + "'");
    }
    const std::size_t cols = split_csv_line(line).size();
    if (cols == 0) {
        throw FormatError("empty header row in '" + path.string() + "'");
    }
    std::vector<double> values;
    long row = 1;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == EOF) break;  // trailing newline
        ++row;
        auto cells = split_csv_line(line);
        if (cells.size() != cols) {
            throw FormatError("ragged row " + std::to_string(row) + ": expected " +
                              std::to_string(cols) + " cells, got " +
                              std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            values.push_back(parse_double(cells[c], row, static_cast<long>(c + 1)));
        }
    }
    if (values.empty()) {
        throw FormatError("no data rows in '" + path.string() + "'");
    }
    const long samples = static_cast<long>(values.size() / cols);
    RealMatrix data(cols, samples);
    for (long s = 0; s < samples; ++s) {
        for (std::size_t c = 0; c < cols; ++c) {
            data(static_cast<Eigen::Index>(c), s) = values[s * cols + c];
        }
    }
    return TimeSeries(std::move(data), sample_interval);
}

/// Square/rectangular matrix as CSV with a generated header.
inline void write_matrix_csv(const std::filesystem::path& path, const RealMatrix& m,
                             const std::string& col_prefix = "col_") {
    std::ofstream out = open_out(path);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out << (j ? "," : "") << col_prefix << j;
    }
    out << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << (j ? "," : "") << format_double(m(i, j));
        }
        out << "\n";
    }
}

inline RealMatrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("empty file: '" + path.string() + "'");
    }
    const std::size_t cols = split_csv_line(line).size();
    std::vector<double> values;
    long row = 1;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == EOF) break;
        ++row;
        auto cells = split_csv_line(line);
        if (cells.size() != cols) {
            throw FormatError("ragged row " + std::to_string(row));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            values.push_back(parse_double(cells[c], row, static_cast<long>(c + 1)));
        }
    }
    const long rows = static_cast<long>(values.size() / cols);
    RealMatrix m(rows, static_cast<Eigen::Index>(cols));
    for (long i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(i, static_cast<Eigen::Index>(j)) = values[i * cols + j];
        }
    }
    return m;
}

inline void write_vector_csv(const std::filesystem::path& path, const RealVector& v,
                             const std::string& header) {
    std::ofstream out = open_out(path);
    out << header << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << format_double(v[i]) << "\n";
    }
}

inline RealVector load_vector_csv(const std::filesystem::path& path) {
    RealMatrix m = load_matrix_csv(path);
    if (m.cols() != 1) {
        throw FormatError("expected a single-column CSV in '" + path.string() + "'");
    }
    return m.col(0);
}

inline constexpr const char* accuracy_csv_header =
    "m,n,method,seed,accuracy_c,accuracy_sigma,imag_ratio,wall_time_ms";

inline void write_accuracy_csv(const std::filesystem::path& path,
                               const std::vector<AccuracyRecord>& records) {
    std::ofstream out = open_out(path);
    out << accuracy_csv_header << "\n";
    for (const auto& r : records) {
        out << r.m << "," << r.n << "," << to_string(r.method) << "," << r.seed << ","
            << format_double(r.accuracy_c) << "," << format_double(r.accuracy_sigma) << ","
            << format_double(r.imag_ratio) << "," << format_double(r.wall_time_ms) << "\n";
    }
}

inline constexpr const char* diagnosis_csv_header =
    "m,seed,corr_precision,corr_lagged,corr_lambda,corr_logm,corr_c,imag_ratio";

inline void write_diagnosis_csv(const std::filesystem::path& path,
                                const std::vector<DiagnosisRecord>& records) {
    std::ofstream out = open_out(path);
    out << diagnosis_csv_header << "\n";
    for (const auto& r : records) {
        out << r.m << "," << r.seed << "," << format_double(r.corr_precision) << ","
            << format_double(r.corr_lagged) << "," << format_double(r.corr_lambda) << ","
            << format_double(r.corr_logm) << "," << format_double(r.corr_c) << ","
            << format_double(r.imag_ratio) << "\n";
    }
}

inline void write_classify_csv(const std::filesystem::path& path,
                               const std::vector<double>& accuracies) {
    std::ofstream out = open_out(path);
    out << "repetition,accuracy\n";
    for (std::size_t i = 0; i < accuracies.size(); ++i) {
        out << i << "," << format_double(accuracies[i]) << "\n";
    }
}

/// Writes the estimator output: a one-row summary plus the estimated
/// matrices, each in its own CSV.
inline std::vector<std::string> write_estimate(const std::filesystem::path& dir,
                                               const Estimate& est,
                                               const AccuracyResult* acc = nullptr) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    {
        std::ofstream out = open_out(dir / "estimate_summary.csv");
        out << "method,m,tau_x_hat,imag_ratio,iterations,fit_value,"
               "sigma_offdiag_residual,accuracy_c,accuracy_sigma\n";
        out << to_string(est.method) << "," << est.c_hat.rows() << ","
            << format_double(est.tau_x_hat) << "," << format_double(est.imag_ratio) << ","
            << est.iterations << ","
            << (est.fit_value ? format_double(*est.fit_value) : "") << ","
            << (est.sigma_offdiag_residual ? format_double(*est.sigma_offdiag_residual) : "")
            << "," << (acc ? format_double(acc->accuracy_c) : "") << ","
            << (acc ? format_double(acc->accuracy_sigma) : "") << "\n";
        files.push_back("estimate_summary.csv");
    }
    write_matrix_csv(dir / "estimate_c_hat.csv", est.c_hat, "node_");
    files.push_back("estimate_c_hat.csv");
    write_vector_csv(dir / "estimate_sigma_hat.csv", est.sigma_hat, "sigma_hat");
    files.push_back("estimate_sigma_hat.csv");
    write_matrix_csv(dir / "estimate_j_hat_real.csv", RealMatrix(est.j_hat.real()), "node_");
    files.push_back("estimate_j_hat_real.csv");
    write_matrix_csv(dir / "estimate_j_hat_imag.csv", RealMatrix(est.j_hat.imag()), "node_");
    files.push_back("estimate_j_hat_imag.csv");
    return files;
}

/// Manifest sidecar: command, effective configuration, seed, version, and the
/// produced files.  Re-running from a manifest regenerates the same outputs.
inline void write_manifest(const std::filesystem::path& path, const std::string& command,
                           const std::map<std::string, std::string>& config,
                           std::uint64_t seed, int workers, const std::string& version,
                           const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["workers"] = workers;
    j["version"] = version;
    j["outputs"] = outputs;
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    int workers = 1;
};

inline Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
    }
    Manifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.workers = j.value("workers", 1);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + path.string() + "' missing fields: " + e.what());
    }
    return m;
}

}  // namespace mou::io
