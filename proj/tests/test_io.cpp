#include "techdiff/errors.hpp"
#include "techdiff/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace techdiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("techdiff_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_tiny_dataset(const fs::path& dir) {
    write_text(dir / "firms.csv", "firm_id,latitude,longitude\n10,35.0,-100.0\n20,35.5,-100.5\n30,36.0,-99.0\n");
    write_text(dir / "panel.csv",
               "# comment lines are skipped\nfirm_id,year,tech,adopted\n"
               "10,2019,AI,1\n20,2019,AI,0\n30,2019,AI,0\n10,2020,AI,1\n20,2020,AI,1\n30,2020,AI,0\n");
    write_text(dir / "edges.csv",
               "year,firm_i,firm_j,weight_musd\n2019,10,20,5\n2019,20,30,2\n2020,20,10,5\n2020,30,20,3\n");
}

}  // namespace

TEST_CASE("shortest round-trip number formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(158.0) == "158");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
    CHECK(std::stod(format_double(0.0435)) == 0.0435);
    CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("a dataset directory is ingested") {
    TempDir tmp("ingest");
    write_tiny_dataset(tmp.path);
    const auto d = read_dataset(tmp.path);
    CHECK(d.firms.size() == 3);
    CHECK(d.panel.first_year() == 2019);
    CHECK(d.panel.last_year() == 2020);
    CHECK(d.panel.adopted(0, 2020, 1));
    REQUIRE(d.networks.size() == 2);
    CHECK(d.networks[1].edges[0].i == 0);
    CHECK(d.networks[1].edges[0].j == 1);
    CHECK(d.shock.treated.empty());
}

TEST_CASE("ingestion errors name the file and line") {
    TempDir tmp("errors");
    write_tiny_dataset(tmp.path);
    write_text(tmp.path / "edges.csv", "year,firm_i,firm_j,weight_musd\n2019,10,20,5\n2019,20,99,2\n");
    CHECK_THROWS_WITH_AS(read_dataset(tmp.path), doctest::Contains("edges.csv:3"), IngestError);

    write_text(tmp.path / "edges.csv", "#schema=techdiff/1\nyear,firm_i,firm_j,weight_musd\n");
    CHECK_THROWS_WITH_AS(read_dataset(tmp.path), doctest::Contains("no edges"), IngestError);

    write_tiny_dataset(tmp.path);
    write_text(tmp.path / "panel.csv", "firm_id,year,tech,adopted\n10,2019,AI,1\n10,2020,AI,0\n");
    CHECK_THROWS_AS(read_dataset(tmp.path), IngestError);

    write_text(tmp.path / "panel.csv", "firm_id,year,tech\n10,2019,AI\n");
    CHECK_THROWS_WITH_AS(read_dataset(tmp.path), doctest::Contains("missing column 'adopted'"), IngestError);

    write_text(tmp.path / "firms.csv", "firm_id,latitude,longitude\n10,95.0,-100.0\n");
    CHECK_THROWS_WITH_AS(read_firms(tmp.path / "firms.csv"), doctest::Contains("firms.csv:2"), IngestError);
}

TEST_CASE("written files carry the schema line and read back unchanged") {
    TempDir tmp("roundtrip");
    write_tiny_dataset(tmp.path);
    const auto d = read_dataset(tmp.path);
    const fs::path out = tmp.path / "copy";
    fs::create_directories(out);
    write_firms(out / "firms.csv", d.firms);
    write_panel(out / "panel.csv", d.panel, d.firms);
    write_edges(out / "edges.csv", d.networks, d.firms);
    CHECK(read_text(out / "firms.csv").rfind("#schema=techdiff/1\n", 0) == 0);
    const auto back = read_dataset(out);
    CHECK(back.firms.ids == d.firms.ids);
    CHECK(back.firms.coords[1].latitude == d.firms.coords[1].latitude);
    CHECK(back.networks[0].edges[1].weight == d.networks[0].edges[1].weight);
    CHECK(sha256_file(out / "edges.csv") != sha256_file(out / "firms.csv"));
}

TEST_CASE("SHA-256 of a known string") {
    TempDir tmp("sha");
    write_text(tmp.path / "abc.txt", "abc");
    CHECK(sha256_file(tmp.path / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("simulation configs round-trip through JSON and reject unknown keys") {
    SimConfig cfg;
    cfg.n_firms = 321;
    cfg.shock.impulse = 1.25;
    cfg.technologies[2].forcing_scale = 0.75;
    const nlohmann::json j = cfg;
    const auto back = j.get<SimConfig>();
    CHECK(back.n_firms == 321);
    CHECK(back.shock.impulse == 1.25);
    CHECK(back.technologies[2].forcing_scale == 0.75);
    auto bad = j;
    bad["shock"]["boost"] = 1.0;
    CHECK_THROWS_WITH_AS(bad.get<SimConfig>(), doctest::Contains("shock.boost"), ConfigError);
}
