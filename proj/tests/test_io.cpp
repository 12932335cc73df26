#include "sqfit/error.hpp"
#include "sqfit/io.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace sqfit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::Gen;

class IoTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("sqfit_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& content) {
        const fs::path p = dir_ / name;
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }

    fs::path dir_;
};

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return Errc::IoError;
}

std::vector<Vec3> awkward_points() {
    Gen g(71);
    std::vector<Vec3> pts{{0, 0, 0},
                          {-0.0, 1e-310, -1e300},
                          {0.1, 1.0 / 3.0, std::nextafter(1.0, 2.0)},
                          {std::numeric_limits<double>::max(), std::numeric_limits<double>::min(), -2.5}};
    for (int i = 0; i < 200; ++i) pts.push_back(g.box(1.0) * std::exp(g.uniform(-30, 30)));
    return pts;
}

void expect_bit_equal(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < 3; ++k) ASSERT_EQ(std::memcmp(&a[i][k], &b[i][k], sizeof(double)), 0) << i << "," << k;
}

TEST_F(IoTest, XyzBasics) {
    const LoadedCloud c = read_cloud(write("a.xyz", "0 0 0\n1 0 0\n0 1 0\n"));
    ASSERT_EQ(c.points.size(), 3u);
    EXPECT_EQ(c.points[1], Vec3(1, 0, 0));
    const LoadedCloud d = read_cloud(write("b.xyz", "# comment\n1 2 3\n\n4\t5   6 # tail\nnan 1 2\n1 inf 2\nfoo bar baz\n"));
    EXPECT_EQ(d.points.size(), 2u);
    EXPECT_EQ(d.report.rejected_non_finite, 2u);
    EXPECT_EQ(d.report.rejected_malformed, 1u);
    EXPECT_EQ(d.report.accepted, 2u);
}

TEST_F(IoTest, NanRowDropped) {
    const LoadedCloud c = read_cloud(write("n.xyz", "0 0 0\nnan 0 0\n1 1 1\n"));
    EXPECT_EQ(c.points.size(), 2u);
    EXPECT_EQ(c.report.rejected_non_finite, 1u);
}

TEST_F(IoTest, RoundTripsAreExact) {
    const auto pts = awkward_points();
    for (const char* name : {"r.xyz", "r.ply", "r.csv"}) {
        write_cloud(dir_ / name, pts);
        expect_bit_equal(read_cloud(dir_ / name).points, pts);
    }
    write_cloud(dir_ / "ascii.ply", pts, CloudFormat::PlyAscii);
    expect_bit_equal(read_cloud(dir_ / "ascii.ply").points, pts);
}

TEST_F(IoTest, SingleVertexAsciiPly) {
    const std::vector<Vec3> one{{0.25, -1.5, 3e-7}};
    write_cloud(dir_ / "one.ply", one, CloudFormat::PlyAscii);
    expect_bit_equal(read_cloud(dir_ / "one.ply").points, one);
}

TEST_F(IoTest, PlyWithExtraPropertiesAndElements) {
    const std::string ascii =
        "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty uchar red\nproperty float x\n"
        "property float y\nproperty double z\nproperty int flags\nelement face 1\n"
        "property list uchar int vertex_indices\nend_header\n255 1.5 2.5 3.5 7\n0 -1 -2 -3 0\n3 0 1 1\n";
    const LoadedCloud c = read_cloud(write("extra.ply", ascii));
    ASSERT_EQ(c.points.size(), 2u);
    EXPECT_EQ(c.points[0], Vec3(1.5, 2.5, 3.5));
    EXPECT_EQ(c.points[1], Vec3(-1, -2, -3));

    std::string bin = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                      "property float z\nproperty short s\nend_header\n";
    const float vals[2][3] = {{1.25f, -2.0f, 0.5f}, {3.0f, 4.0f, NAN}};
    for (const auto& v : vals) {
        bin.append(reinterpret_cast<const char*>(v), sizeof(v));
        bin.append(2, '\0');
    }
    const LoadedCloud b = read_cloud(write("bin.ply", bin));
    ASSERT_EQ(b.points.size(), 1u);
    EXPECT_EQ(b.points[0], Vec3(1.25, -2.0, 0.5));
    EXPECT_EQ(b.report.rejected_non_finite, 1u);
}

TEST_F(IoTest, PlyErrors) {
    EXPECT_EQ(code_of([&] {
                  read_cloud(write("be.ply", "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\n"
                                             "property float y\nproperty float z\nend_header\n"));
              }),
              Errc::UnsupportedPlyEncoding);
    EXPECT_EQ(code_of([&] { read_cloud(write("bad.ply", "ply\nformat ascii 1.0\nelement vertex 1\n")); }),
              Errc::MalformedHeader);
    EXPECT_EQ(code_of([&] {
                  read_cloud(write("noz.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                                              "property float y\nend_header\n1 2\n"));
              }),
              Errc::MalformedHeader);
}

TEST_F(IoTest, CsvHeaderAndColumns) {
    const LoadedCloud a = read_cloud(write("h.csv", "id,z,y,x,label\n0,3,2,1,a\n1,6,5,4,b\n"));
    ASSERT_EQ(a.points.size(), 2u);
    EXPECT_EQ(a.points[0], Vec3(1, 2, 3));
    const LoadedCloud b = read_cloud(write("n.csv", "1,2,3,9\n4,5,6,9\n"));
    ASSERT_EQ(b.points.size(), 2u);
    EXPECT_EQ(b.points[1], Vec3(4, 5, 6));
    const LoadedCloud c = read_cloud(write("g.csv", "name,a,b,c\np,1,2,3\n"));
    ASSERT_EQ(c.points.size(), 1u);
    EXPECT_EQ(c.points[0], Vec3(1, 2, 3));
}

TEST_F(IoTest, CloudErrors) {
    EXPECT_EQ(code_of([&] { read_cloud(dir_ / "missing.xyz"); }), Errc::FileNotFound);
    try {
        read_cloud(dir_ / "missing.xyz");
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("missing.xyz"), std::string::npos);
    }
    EXPECT_EQ(code_of([&] { read_cloud(write("e.xyz", "# nothing\n")); }), Errc::EmptyCloud);
    EXPECT_EQ(code_of([&] { read_cloud(write("all_nan.xyz", "nan nan nan\n")); }), Errc::EmptyCloud);
    EXPECT_EQ(code_of([&] { write_cloud(dir_, awkward_points(), CloudFormat::Xyz); }), Errc::IoError);
}

TEST_F(IoTest, EmptyCloudWritesValidFile) {
    const std::vector<Vec3> none;
    write_cloud(dir_ / "empty.xyz", none);
    write_cloud(dir_ / "empty.ply", none);
    EXPECT_TRUE(fs::exists(dir_ / "empty.xyz"));
    EXPECT_EQ(code_of([&] { read_cloud(dir_ / "empty.ply"); }), Errc::EmptyCloud);
}

SuperquadricModel sample_model(int kind) {
    SuperquadricModel m;
    m.eps1 = 0.1 + 1.0 / 3.0;
    m.eps2 = 1.7;
    m.size = Vec3(0.5, 1.0 / 7.0, 2.9);
    m.euler = Vec3(-3.0, 0.1, 1e-17);
    m.translation = Vec3(1e5, -0.25, 0);
    if (kind == 1) m.deformation = Taper{-0.3, 1.0};
    if (kind == 2) m.deformation = Bend{0.123, 1.2};
    return m;
}

TEST_F(IoTest, ModelRoundTrip) {
    for (int kind = 0; kind < 3; ++kind) {
        const SuperquadricModel m = sample_model(kind);
        write_model(dir_ / "m.json", m);
        EXPECT_EQ(read_model(dir_ / "m.json"), m);
    }
    const json j = model_to_json(sample_model(2));
    EXPECT_EQ(j["deformation"]["type"], "bend");
    EXPECT_EQ(j["eps"].size(), 2u);
    EXPECT_EQ(model_to_json(sample_model(0))["deformation"]["type"], "none");
}

TEST_F(IoTest, ModelSchemaViolations) {
    json j = model_to_json(sample_model(1));
    j["deformation"]["type"] = "twist";
    EXPECT_EQ(code_of([&] { model_from_json(j); }), Errc::SchemaViolation);

    json missing = model_to_json(sample_model(0));
    missing.erase("size");
    try {
        model_from_json(missing);
        ADD_FAILURE() << "accepted a model without size";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SchemaViolation);
        EXPECT_NE(std::string(e.what()).find("size"), std::string::npos);
    }

    json short_eps = model_to_json(sample_model(0));
    short_eps["eps"] = {1.0};
    EXPECT_EQ(code_of([&] { model_from_json(short_eps); }), Errc::SchemaViolation);
    json no_kappa = model_to_json(sample_model(2));
    no_kappa["deformation"].erase("kappa");
    EXPECT_EQ(code_of([&] { model_from_json(no_kappa); }), Errc::SchemaViolation);
    EXPECT_EQ(code_of([&] { read_model(write("broken.json", "{\"eps\": [1,")); }), Errc::SchemaViolation);
}

}  // namespace
}  // namespace sqfit
