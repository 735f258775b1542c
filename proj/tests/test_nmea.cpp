#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "trackkit/nmea.hpp"

using namespace trackkit;
using namespace trackkit::nmea;

namespace {

std::string checksummed(const std::string& body) {
    static const char* d = "0123456789ABCDEF";
    const std::uint8_t c = checksum(body);
    return "$" + body + "*" + std::string{d[c >> 4], d[c & 0xF]};
}

}  // namespace

TEST_CASE("parse_sentence decomposes a GGA line") {
    const auto s = parse_sentence(
        "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47");
    CHECK(s.talker == "GP");
    CHECK(s.type_code == "GGA");
    CHECK(s.fields.size() == 14);
    REQUIRE(s.checksum_declared.has_value());
    CHECK(*s.checksum_declared == 0x47);
}

TEST_CASE("parse_sentence rejects a bad checksum with computed vs declared") {
    try {
        parse_sentence("$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*00");
        FAIL("expected ChecksumMismatch");
    } catch (const ChecksumMismatch& e) {
        CHECK(e.declared == 0x00);
        CHECK(e.computed == 0x47);
    }
}

TEST_CASE("parse_sentence tolerates a missing checksum") {
    const auto s = parse_sentence("$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,");
    CHECK_FALSE(s.checksum_declared.has_value());
}

TEST_CASE("parse_sentence error cases") {
    CHECK_THROWS_AS(parse_sentence("GPGGA,123519"), MalformedSentence);
    CHECK_THROWS_AS(parse_sentence("$GPGGA,1*G1"), MalformedSentence);
    CHECK_THROWS_AS(parse_sentence("$GPGGA,1*7"), MalformedSentence);
    CHECK_THROWS_AS(parse_sentence("$GPGGA,caf\xc3\xa9*11"), MalformedSentence);
    CHECK_THROWS_AS(parse_sentence(""), MalformedSentence);
}

TEST_CASE("flipping any single bit of the body breaks checksum validation") {
    const std::string body = "GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,";
    const std::string good = checksummed(body);
    std::mt19937 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::string corrupted = good;
        const std::size_t pos = 1 + rng() % body.size();  // inside the body
        const int bit = rng() % 7;                        // stay ASCII
        corrupted[pos] = static_cast<char>(corrupted[pos] ^ (1 << bit));
        if (corrupted[pos] == ',' || corrupted[pos] == '*' || corrupted[pos] == '$') continue;
        CHECK_THROWS(parse_sentence(corrupted));
    }
}

TEST_CASE("ddmm_to_degrees known values") {
    CHECK_THAT(ddmm_to_degrees("4807.038", 'N'), Catch::Matchers::WithinAbs(48.1173, 1e-9));
    CHECK(ddmm_to_degrees("0000.0000", 'N') == 0.0);
    CHECK_THAT(ddmm_to_degrees("01131.000", 'E'),
               Catch::Matchers::WithinAbs(11.0 + 31.0 / 60.0, 1e-9));
    CHECK_THAT(ddmm_to_degrees("4807.038", 'S'), Catch::Matchers::WithinAbs(-48.1173, 1e-9));
    CHECK_THAT(ddmm_to_degrees("01131.000", 'W'),
               Catch::Matchers::WithinAbs(-(11.0 + 31.0 / 60.0), 1e-9));
}

TEST_CASE("ddmm_to_degrees rejects malformed fields") {
    CHECK_THROWS_AS(ddmm_to_degrees("4861.000", 'N'), MalformedCoordinate);  // minutes >= 60
    CHECK_THROWS_AS(ddmm_to_degrees("48o7.038", 'N'), MalformedCoordinate);
    CHECK_THROWS_AS(ddmm_to_degrees("7.038", 'N'), MalformedCoordinate);
    CHECK_THROWS_AS(ddmm_to_degrees("4807.038", 'X'), MalformedCoordinate);
}

TEST_CASE("degrees_to_ddmm round-trips well-formed fields") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> lat(-89.9, 89.9), lon(-179.9, 179.9);
    for (int i = 0; i < 500; ++i) {
        const double v = quantize_degrees(lat(rng));
        auto [field, hemi] = degrees_to_ddmm(v, true);
        CHECK_THAT(ddmm_to_degrees(field, hemi), Catch::Matchers::WithinAbs(v, 1e-9));
        const double w = quantize_degrees(lon(rng));
        auto [lfield, lhemi] = degrees_to_ddmm(w, false);
        CHECK_THAT(ddmm_to_degrees(lfield, lhemi), Catch::Matchers::WithinAbs(w, 1e-9));
    }
    // carry at the minute boundary
    auto [f, h] = degrees_to_ddmm(47.9999999, true);
    CHECK(f == "4800.0000");
    CHECK(h == 'N');
}

namespace {

std::string gga_line(const std::string& tod, const std::string& lat = "4540.3200",
                     const std::string& lon = "01155.6800", int quality = 1) {
    return checksummed("GPGGA," + tod + "," + lat + ",N," + lon + ",E," +
                       std::to_string(quality) + ",08,0.9,50.0,M,0.0,M,,");
}

}  // namespace

TEST_CASE("parse_stream on a clean 1 Hz file") {
    std::vector<std::string> lines;
    for (int s = 0; s < 60; ++s) {
        char tod[8];
        std::snprintf(tod, sizeof(tod), "1131%02d", s);
        lines.push_back(gga_line(tod));
    }
    const auto [fixes, report] = parse_stream(lines);
    CHECK(fixes.size() == 60);
    CHECK(report.accepted == 60);
    CHECK(report.total_lines == 60);
    CHECK(report.counts_consistent());
    REQUIRE(report.first_timestamp);
    CHECK(*report.last_timestamp - *report.first_timestamp == 59);
}

TEST_CASE("parse_stream tolerates one corrupted checksum") {
    std::vector<std::string> lines;
    for (int s = 0; s < 10; ++s) {
        char tod[8];
        std::snprintf(tod, sizeof(tod), "1131%02d", s);
        lines.push_back(gga_line(tod));
    }
    lines[4] = lines[4].substr(0, lines[4].size() - 2) + "ZZ";  // break the hex digits
    lines[5].back() = lines[5].back() == '0' ? '1' : '0';       // break the checksum value
    const auto [fixes, report] = parse_stream(lines);
    CHECK(fixes.size() == 8);
    CHECK(report.rejected_checksum == 1);
    CHECK(report.rejected_malformed == 1);
    CHECK(report.counts_consistent());
}

TEST_CASE("no-fix epochs are recorded but flagged unusable") {
    std::vector<std::string> lines = {gga_line("113100"), gga_line("113101", "", "", 0),
                                      gga_line("113102")};
    lines[1] = checksummed("GPGGA,113101,,,,,0,00,,,M,,M,,");
    const auto [fixes, report] = parse_stream(lines);
    REQUIRE(fixes.size() == 3);
    CHECK(fixes[1].fix_quality == FixQuality::no_fix);
    CHECK_FALSE(fixes[1].usable());
    CHECK(fixes[0].usable());
}

TEST_CASE("RMC supplies the date and midnight rollover advances it") {
    std::vector<std::string> lines;
    lines.push_back(checksummed(
        "GPRMC,235958,A,4540.3200,N,01155.6800,E,0.0,,030221,,,A"));
    lines.push_back(gga_line("235958"));
    lines.push_back(gga_line("235959"));
    lines.push_back(gga_line("000000"));
    lines.push_back(gga_line("000001"));
    const auto [fixes, report] = parse_stream(lines);
    REQUIRE(fixes.size() == 4);
    CHECK(fixes[0].timestamp == make_utc(2021, 2, 3, 23, 59, 58));
    CHECK(fixes[2].timestamp == make_utc(2021, 2, 4, 0, 0, 0));
    CHECK(fixes[3].timestamp - fixes[0].timestamp == 3);
    CHECK(report.counts_consistent());
}

TEST_CASE("duplicate timestamps keep the first epoch") {
    std::vector<std::string> lines = {gga_line("113100"), gga_line("113100", "4540.3210"),
                                      gga_line("113101")};
    const auto [fixes, report] = parse_stream(lines);
    CHECK(fixes.size() == 2);
    CHECK(report.unsupported == 1);
    CHECK_THAT(fixes[0].latitude, Catch::Matchers::WithinAbs(45.0 + 40.32 / 60.0, 1e-9));
}

TEST_CASE("unsupported sentences and headers are counted, not parsed") {
    std::vector<std::string> lines = {
        "# device: Xiaomi - Redmi Note 8T",
        checksummed("GPGSV,3,1,11,10,63,137,17,07,61,098,15,05,59,290,20,08,54,157,30"),
        checksummed("PGRME,15.0,M,45.0,M,25.0,M"),
        gga_line("113100"),
        gga_line("113101"),
    };
    const auto [fixes, report] = parse_stream(lines);
    CHECK(fixes.size() == 2);
    CHECK(report.unsupported == 3);
    CHECK(report.counts_consistent());
}

TEST_CASE("empty stream is the only terminal error") {
    CHECK_THROWS_AS(parse_stream(std::vector<std::string>{}), EmptyStream);
    CHECK_THROWS_AS(parse_stream(std::vector<std::string>{"garbage", "# header"}), EmptyStream);
}

TEST_CASE("parse_stream is deterministic and order preserving") {
    std::vector<std::string> lines;
    for (int s = 0; s < 30; ++s) {
        char tod[8];
        std::snprintf(tod, sizeof(tod), "1200%02d", s);
        lines.push_back(gga_line(tod));
    }
    const auto [fixes1, r1] = parse_stream(lines);
    const auto [fixes2, r2] = parse_stream(lines);
    REQUIRE(fixes1.size() == fixes2.size());
    for (std::size_t i = 1; i < fixes1.size(); ++i) {
        CHECK(fixes1[i].timestamp > fixes1[i - 1].timestamp);
        CHECK(fixes1[i].timestamp == fixes2[i].timestamp);
    }
}

TEST_CASE("quantization step matches the study-area constants") {
    const auto q = quantization_step(45.67);
    CHECK_THAT(q.lat_step_m, Catch::Matchers::WithinAbs(0.186, 0.002));
    CHECK_THAT(q.lon_step_m, Catch::Matchers::WithinAbs(0.131, 0.002));

    const auto eq = quantization_step(0.0);
    CHECK_THAT(eq.lat_step_m, Catch::Matchers::WithinAbs(0.185, 0.002));
    CHECK_THAT(eq.lon_step_m, Catch::Matchers::WithinAbs(0.185, 0.002));

    const auto polar = quantization_step(89.0);
    CHECK(polar.lon_step_m < 0.01);
    CHECK_THAT(polar.lat_step_m, Catch::Matchers::WithinAbs(0.186, 0.002));
}

TEST_CASE("longitude quantization step decreases monotonically with |latitude|") {
    double prev = quantization_step(0.0).lon_step_m;
    for (double lat = 1.0; lat < 89.0; lat += 1.0) {
        const double cur = quantization_step(lat).lon_step_m;
        CHECK(cur < prev);
        prev = cur;
    }
}
