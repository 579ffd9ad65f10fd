#include "canica/dataio.hpp"
#include "canica/errors.hpp"
#include "canica/rng.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <limits>

namespace canica {
namespace {

using test::TempDir;

TEST(Dataio, TwoByTwoRoundTrip) {
    TempDir dir("dataio_2x2");
    MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    save_matrix(dir.path() / "m.canmat", m);
    EXPECT_EQ(load_matrix(dir.path() / "m.canmat"), m);
}

TEST(Dataio, RandomRoundTripIsBitwise) {
    TempDir dir("dataio_random");
    Rng rng = derive_rng(11);
    MatrixXd m = gaussian_matrix(7, 5, rng);
    m(0, 0) = std::numeric_limits<double>::denorm_min();
    m(1, 1) = -0.0;
    save_matrix(dir.path() / "m.canmat", m);
    const MatrixXd back = load_matrix(dir.path() / "m.canmat");
    ASSERT_EQ(back.rows(), 7);
    ASSERT_EQ(back.cols(), 5);
    EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 35), 0);
}

TEST(Dataio, EncodingIsLittleEndianRowMajor) {
    MatrixXd m(1, 2);
    m << 1.0, 2.0;
    const auto bytes = encode_matrix(m);
    ASSERT_EQ(bytes.size(), 8u + 16u + 16u);
    EXPECT_EQ(std::memcmp(bytes.data(), "CANMAT01", 8), 0);
    EXPECT_EQ(static_cast<unsigned>(bytes[8]), 1u);   // rows, low byte first
    EXPECT_EQ(static_cast<unsigned>(bytes[16]), 2u);  // cols
    // 2.0 = 0x4000000000000000: last byte of the second value is 0x40.
    EXPECT_EQ(static_cast<unsigned>(bytes[39]), 0x40u);
}

TEST(Dataio, ShortPayloadIsFormatError) {
    MatrixXd m = MatrixXd::Zero(3, 3);
    auto bytes = encode_matrix(m);
    bytes.resize(bytes.size() - 8);  // 8 values for a 3 x 3 header
    try {
        decode_matrix(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_GT(e.offset(), 0u);
    }
}

TEST(Dataio, TruncatedHeaderIsFormatError) {
    auto bytes = encode_matrix(MatrixXd::Zero(1, 1));
    bytes.resize(12);
    EXPECT_THROW(decode_matrix(bytes), FormatError);
}

TEST(Dataio, OverflowingDimensionsAreDimensionError) {
    auto bytes = encode_matrix(MatrixXd::Zero(1, 1));
    for (int k = 8; k < 24; ++k) bytes[static_cast<std::size_t>(k)] = std::byte{0xff};
    EXPECT_THROW(decode_matrix(bytes), DimensionError);
}

TEST(Dataio, CsvIsAccepted) {
    TempDir dir("dataio_csv");
    write_text_file(dir.path() / "m.csv", "1,2.5,-3\n4e1,5,6\n");
    MatrixXd expected(2, 3);
    expected << 1, 2.5, -3, 40, 5, 6;
    EXPECT_EQ(load_matrix(dir.path() / "m.csv"), expected);
}

TEST(Dataio, RaggedCsvIsFormatError) {
    TempDir dir("dataio_ragged");
    write_text_file(dir.path() / "m.csv", "1,2\n3\n");
    EXPECT_THROW(load_matrix(dir.path() / "m.csv"), FormatError);
}

TEST(Dataio, MissingFileIsIoError) {
    EXPECT_THROW(load_matrix("/nonexistent/canica/m.canmat"), IoError);
}

TEST(Dataio, MaskRoundTripAndApply) {
    TempDir dir("dataio_mask");
    const std::vector<std::int64_t> idx = {0, 2, 3};
    save_mask(dir.path() / "mask.canmat", idx, 5);
    EXPECT_EQ(load_mask(dir.path() / "mask.canmat"), idx);

    SubjectDataset d;
    d.data = MatrixXd::Zero(2, 5);
    d.data.row(0) << 0, 1, 2, 3, 4;
    apply_mask(d, idx);
    ASSERT_EQ(d.n_voxels(), 3);
    EXPECT_EQ(d.data(0, 1), 2.0);
    EXPECT_EQ(*d.mask_indices, idx);
}

TEST(Dataio, NonBinaryMaskRejected) {
    TempDir dir("dataio_badmask");
    MatrixXd m(1, 3);
    m << 1, 0.5, 0;
    save_matrix(dir.path() / "mask.canmat", m);
    EXPECT_THROW(load_mask(dir.path() / "mask.canmat"), ParameterError);
}

TEST(Standardize, TwoPointColumn) {
    MatrixXd m(2, 1);
    m << 1, 3;
    const auto d = standardize(m);
    EXPECT_DOUBLE_EQ(d.data(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(d.data(1, 0), 1.0);
    EXPECT_TRUE(d.standardized);
}

TEST(Standardize, ConstantColumnZeroedAndRecorded) {
    MatrixXd m(3, 2);
    m << 5, 1, 5, 2, 5, 4;
    const auto d = standardize(m);
    EXPECT_TRUE(d.data.col(0).isZero(0.0));
    ASSERT_EQ(d.constant_columns.size(), 1u);
    EXPECT_EQ(d.constant_columns[0], 0);
    EXPECT_EQ(m(0, 0), 5.0);  // input untouched
}

TEST(Standardize, RandomMatrixMomentsByRecomputation) {
    Rng rng = derive_rng(5);
    const MatrixXd m = (gaussian_matrix(50, 20, rng).array() * 3.0 + 7.0).matrix();
    const auto d = standardize(m);
    for (Eigen::Index j = 0; j < 20; ++j) {
        double mean = 0.0;
        for (Eigen::Index i = 0; i < 50; ++i) mean += d.data(i, j);
        mean /= 50.0;
        double var = 0.0;
        for (Eigen::Index i = 0; i < 50; ++i) var += (d.data(i, j) - mean) * (d.data(i, j) - mean);
        var /= 50.0;
        EXPECT_LT(std::abs(mean), 1e-10);
        EXPECT_NEAR(var, 1.0, 1e-8);
    }
}

TEST(Standardize, Idempotent) {
    Rng rng = derive_rng(6);
    const auto once = standardize(gaussian_matrix(30, 10, rng));
    const auto twice = standardize(once.data);
    EXPECT_LT((once.data - twice.data).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Standardize, SingleFrameRejected) {
    EXPECT_THROW(standardize(MatrixXd::Ones(1, 4)), InsufficientFramesError);
}

TEST(RunConfigParse, DefaultsWhenEmpty) {
    const RunConfig c = parse_run_config(std::string("{}"));
    EXPECT_FALSE(c.n_sbj.has_value());
    EXPECT_DOUBLE_EQ(c.p_value, 0.05);
    EXPECT_EQ(c.n_bootstrap, 1000);
    EXPECT_EQ(c.ica_nonlinearity, Nonlinearity::kLogcosh);
    EXPECT_EQ(c.ica_mode, IcaMode::kSymmetric);
    EXPECT_EQ(c.ica_max_iter, 200);
    EXPECT_DOUBLE_EQ(c.ica_tol, 1e-6);
    EXPECT_DOUBLE_EQ(c.map_threshold, 3.0);
    EXPECT_TRUE(c.use_cca);
}

TEST(RunConfigParse, UnknownKeyNamed) {
    try {
        parse_run_config(std::string(R"({"pvalue": 0.01})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("pvalue"), std::string::npos);
    }
}

TEST(RunConfigParse, InvalidValuesRejected) {
    EXPECT_THROW(parse_run_config(std::string(R"({"p_value": 1.5})")), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(R"({"n_sbj": 0})")), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(R"({"ica_mode": "parallel"})")), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(R"({"map_threshold": -1})")), ConfigError);
    EXPECT_THROW(parse_run_config(std::string("[1, 2]")), ConfigError);
    EXPECT_THROW(parse_run_config(std::string("{not json")), ConfigError);
}

TEST(RunConfigParse, JsonRoundTrip) {
    RunConfig c;
    c.n_sbj = 7;
    c.p_value = 0.01;
    c.ica_nonlinearity = Nonlinearity::kCube;
    c.ica_mode = IcaMode::kDeflation;
    c.rng_seed = 18446744073709551615ull;
    c.use_cca = false;
    const RunConfig back = parse_run_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.rng_seed, c.rng_seed);
}

TEST(Report, RoundsToTwelveDigits) {
    EXPECT_EQ(report_round(0.1234567890123456), 0.123456789012);
    EXPECT_EQ(report_round(0.0), 0.0);
}

}  // namespace
}  // namespace canica
