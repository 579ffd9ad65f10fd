#include "canica/dataio.hpp"

#include "canica/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

namespace canica {

namespace {

constexpr std::size_t kHeaderBytes = 8 + 8 + 8;

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(std::span<const std::byte> bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(std::to_integer<unsigned>(bytes[offset + i])) << (8 * i);
    return v;
}

bool has_magic(std::span<const std::byte> bytes) {
    if (bytes.size() < kMatrixMagic.size()) return false;
    return std::memcmp(bytes.data(), kMatrixMagic.data(), kMatrixMagic.size()) == 0;
}

MatrixXd decode_binary(std::span<const std::byte> bytes) {
    if (bytes.size() < kHeaderBytes) {
        throw FormatError("truncated matrix header", bytes.size());
    }
    const std::uint64_t rows = get_u64(bytes, 8);
    const std::uint64_t cols = get_u64(bytes, 16);
    constexpr auto kMaxIndex = static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max());
    if (rows > kMaxIndex || cols > kMaxIndex ||
        (cols != 0 && rows > (std::numeric_limits<std::uint64_t>::max() / 8) / cols)) {
        throw DimensionError("matrix dimensions " + std::to_string(rows) + " x " +
                             std::to_string(cols) + " overflow");
    }
    const std::uint64_t payload = rows * cols * 8;
    const std::uint64_t available = bytes.size() - kHeaderBytes;
    if (payload != available) {
        throw FormatError("header declares " + std::to_string(rows) + " x " +
                              std::to_string(cols) + " values but payload holds " +
                              std::to_string(available) + " bytes",
                          payload < available ? kHeaderBytes + payload : bytes.size());
    }
    MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::size_t offset = kHeaderBytes;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = std::bit_cast<double>(get_u64(bytes, offset));
            offset += 8;
        }
    return m;
}

MatrixXd decode_csv(std::span<const std::byte> bytes) {
    const char* begin = reinterpret_cast<const char*>(bytes.data());
    const char* end = begin + bytes.size();
    std::vector<double> values;
    std::size_t n_cols = 0;
    std::size_t n_rows = 0;
    const char* p = begin;
    while (p < end) {
        const char* line_end = std::find(p, end, '\n');
        const char* content_end = line_end;
        if (content_end > p && content_end[-1] == '\r') --content_end;
        if (content_end == p) {  // blank line: only allowed as trailing
            p = line_end + (line_end < end ? 1 : 0);
            continue;
        }
        std::size_t cols_here = 0;
        const char* field = p;
        while (true) {
            const char* field_end = std::find(field, content_end, ',');
            const char* a = field;
            const char* b = field_end;
            while (a < b && (*a == ' ' || *a == '\t')) ++a;
            while (b > a && (b[-1] == ' ' || b[-1] == '\t')) --b;
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(a, b, v);
            if (ec != std::errc() || ptr != b || a == b) {
                throw FormatError("invalid CSV number", static_cast<std::uint64_t>(a - begin));
            }
            values.push_back(v);
            ++cols_here;
            if (field_end == content_end) break;
            field = field_end + 1;
        }
        if (n_rows == 0) {
            n_cols = cols_here;
        } else if (cols_here != n_cols) {
            throw FormatError("CSV row " + std::to_string(n_rows) + " has " +
                                  std::to_string(cols_here) + " fields, expected " +
                                  std::to_string(n_cols),
                              static_cast<std::uint64_t>(p - begin));
        }
        ++n_rows;
        p = line_end + (line_end < end ? 1 : 0);
    }
    MatrixXd m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < n_cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * n_cols + j];
    return m;
}

std::vector<std::byte> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

}  // namespace

std::vector<std::byte> encode_matrix(const MatrixXd& m) {
    std::vector<std::byte> out;
    out.reserve(kHeaderBytes + static_cast<std::size_t>(m.size()) * 8);
    for (char c : kMatrixMagic) out.push_back(static_cast<std::byte>(c));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
    return out;
}

MatrixXd decode_matrix(std::span<const std::byte> bytes) {
    if (has_magic(bytes)) return decode_binary(bytes);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "CANM", 4) == 0) {
        throw FormatError("unrecognized matrix magic", 0);
    }
    return decode_csv(bytes);
}

MatrixXd load_matrix(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    return decode_matrix(bytes);
}

void save_matrix(const std::filesystem::path& path, const MatrixXd& m) {
    const auto bytes = encode_matrix(m);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::int64_t> load_mask(const std::filesystem::path& path) {
    const MatrixXd m = load_matrix(path);
    if (m.rows() != 1) {
        throw DimensionError("mask must be a single row, got " + std::to_string(m.rows()));
    }
    std::vector<std::int64_t> indices;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(0, j) == 1.0) {
            indices.push_back(j);
        } else if (m(0, j) != 0.0) {
            throw ParameterError("mask entries must be 0 or 1 (column " + std::to_string(j) + ")");
        }
    }
    return indices;
}

void save_mask(const std::filesystem::path& path, std::span<const std::int64_t> indices,
               std::int64_t n_voxels) {
    MatrixXd m = MatrixXd::Zero(1, n_voxels);
    for (auto i : indices) {
        if (i < 0 || i >= n_voxels) throw DimensionError("mask index out of range");
        m(0, i) = 1.0;
    }
    save_matrix(path, m);
}

void apply_mask(SubjectDataset& dataset, std::span<const std::int64_t> indices) {
    MatrixXd kept(dataset.data.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] < 0 || indices[k] >= dataset.data.cols()) {
            throw DimensionError("mask index " + std::to_string(indices[k]) +
                                 " outside subject with " + std::to_string(dataset.data.cols()) +
                                 " voxels");
        }
        kept.col(static_cast<Eigen::Index>(k)) = dataset.data.col(indices[k]);
    }
    dataset.data = std::move(kept);
    dataset.mask_indices = std::vector<std::int64_t>(indices.begin(), indices.end());
    dataset.standardized = false;
    dataset.constant_columns.clear();
}

SubjectDataset standardize(const MatrixXd& data, std::string subject_id) {
    if (data.rows() < 2) {
        throw InsufficientFramesError("standardization needs at least 2 frames, got " +
                                      std::to_string(data.rows()));
    }
    if (!data.allFinite()) {
        throw ParameterError("subject data contains non-finite values");
    }
    SubjectDataset out;
    out.subject_id = std::move(subject_id);
    out.data.resize(data.rows(), data.cols());
    const double n = static_cast<double>(data.rows());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double mean = data.col(j).sum() / n;
        const VectorXd centered = data.col(j).array() - mean;
        const double var = centered.squaredNorm() / n;
        const double scale = std::max(1.0, std::abs(mean));
        if (var <= 1e-24 * scale * scale) {
            out.data.col(j).setZero();
            out.constant_columns.push_back(j);
        } else {
            out.data.col(j) = centered / std::sqrt(var);
        }
    }
    out.standardized = true;
    return out;
}

namespace {

template <typename T>
T get_checked(const nlohmann::json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key \"") + key + "\" has the wrong type");
    }
}

int get_positive(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(std::string("config key \"") + key + "\" must be an integer");
    }
    const auto x = v.get<std::int64_t>();
    if (x < 1 || x > std::numeric_limits<int>::max()) {
        throw ConfigError(std::string("config key \"") + key + "\" must be a positive integer");
    }
    return static_cast<int>(x);
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
    static const std::set<std::string> kKeys = {
        "n_sbj",        "p_value",      "n_bootstrap",      "ica_nonlinearity", "ica_mode",
        "ica_max_iter", "ica_tol",      "map_threshold",    "rng_seed",         "use_cca",
        "n_grp",        "max_order",    "order_replicates", "order_subject"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKeys.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
    }
    RunConfig c;
    if (j.contains("n_sbj") && !j["n_sbj"].is_null()) c.n_sbj = get_positive(j, "n_sbj");
    if (j.contains("n_grp") && !j["n_grp"].is_null()) {
        const auto& v = j["n_grp"];
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            throw ConfigError("config key \"n_grp\" must be a non-negative integer");
        }
        c.n_grp = v.get<int>();
    }
    if (j.contains("p_value")) {
        c.p_value = get_checked<double>(j, "p_value");
        if (!(c.p_value > 0.0 && c.p_value < 1.0)) {
            throw ConfigError("config key \"p_value\" must lie in (0, 1)");
        }
    }
    if (j.contains("n_bootstrap")) c.n_bootstrap = get_positive(j, "n_bootstrap");
    if (j.contains("ica_nonlinearity")) {
        const auto s = get_checked<std::string>(j, "ica_nonlinearity");
        if (s == "logcosh") c.ica_nonlinearity = Nonlinearity::kLogcosh;
        else if (s == "cube") c.ica_nonlinearity = Nonlinearity::kCube;
        else throw ConfigError("config key \"ica_nonlinearity\" must be \"logcosh\" or \"cube\"");
    }
    if (j.contains("ica_mode")) {
        const auto s = get_checked<std::string>(j, "ica_mode");
        if (s == "symmetric") c.ica_mode = IcaMode::kSymmetric;
        else if (s == "deflation") c.ica_mode = IcaMode::kDeflation;
        else throw ConfigError("config key \"ica_mode\" must be \"symmetric\" or \"deflation\"");
    }
    if (j.contains("ica_max_iter")) c.ica_max_iter = get_positive(j, "ica_max_iter");
    if (j.contains("ica_tol")) {
        c.ica_tol = get_checked<double>(j, "ica_tol");
        if (!(c.ica_tol > 0.0)) throw ConfigError("config key \"ica_tol\" must be positive");
    }
    if (j.contains("map_threshold")) {
        c.map_threshold = get_checked<double>(j, "map_threshold");
        if (!(c.map_threshold >= 0.0)) {
            throw ConfigError("config key \"map_threshold\" must be >= 0");
        }
    }
    if (j.contains("rng_seed")) {
        const auto& v = j["rng_seed"];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            throw ConfigError("config key \"rng_seed\" must be an unsigned integer");
        }
        c.rng_seed = v.get<std::uint64_t>();
    }
    if (j.contains("use_cca")) c.use_cca = get_checked<bool>(j, "use_cca");
    if (j.contains("max_order")) c.max_order = get_positive(j, "max_order");
    if (j.contains("order_replicates")) c.order_replicates = get_positive(j, "order_replicates");
    if (j.contains("order_subject")) {
        const auto& v = j["order_subject"];
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            throw ConfigError("config key \"order_subject\" must be a non-negative integer");
        }
        c.order_subject = v.get<int>();
    }
    return c;
}

RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_text_file(path));
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["n_sbj"] = c.n_sbj ? nlohmann::json(*c.n_sbj) : nlohmann::json(nullptr);
    j["n_grp"] = c.n_grp ? nlohmann::json(*c.n_grp) : nlohmann::json(nullptr);
    j["p_value"] = report_round(c.p_value);
    j["n_bootstrap"] = c.n_bootstrap;
    j["ica_nonlinearity"] = to_string(c.ica_nonlinearity);
    j["ica_mode"] = to_string(c.ica_mode);
    j["ica_max_iter"] = c.ica_max_iter;
    j["ica_tol"] = report_round(c.ica_tol);
    j["map_threshold"] = report_round(c.map_threshold);
    j["rng_seed"] = c.rng_seed;
    j["use_cca"] = c.use_cca;
    j["max_order"] = c.max_order;
    j["order_replicates"] = c.order_replicates;
    j["order_subject"] = c.order_subject;
    return j;
}

std::string to_string(Nonlinearity g) {
    return g == Nonlinearity::kLogcosh ? "logcosh" : "cube";
}

std::string to_string(IcaMode mode) {
    return mode == IcaMode::kSymmetric ? "symmetric" : "deflation";
}

double report_round(double x) {
    if (!std::isfinite(x)) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::strtod(buf, nullptr);
}

nlohmann::json report_array(const VectorXd& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(report_round(v[i]));
    return arr;
}

nlohmann::json report_array(std::span<const double> v) {
    auto arr = nlohmann::json::array();
    for (double x : v) arr.push_back(report_round(x));
    return arr;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace canica
