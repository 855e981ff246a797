#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "kivi/analysis.hpp"
#include "kivi/dump_io.hpp"

using namespace kivi;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("round trip identity") {
    std::mt19937_64 rng(51);
    TempFile f("kivi_dump_rt.bin");
    SUBCASE("2-D") {
        std::vector<Matrix> tensors{gaussian_matrix(17, 9, rng)};
        write_dump(f.path, tensors);
        auto back = read_dump(f.path);
        REQUIRE(back.size() == 1);
        CHECK(back[0] == tensors[0]);
    }
    SUBCASE("3-D splits per head") {
        std::vector<Matrix> tensors{gaussian_matrix(5, 8, rng), gaussian_matrix(5, 8, rng),
                                    gaussian_matrix(5, 8, rng)};
        write_dump(f.path, tensors);
        auto back = read_dump(f.path);
        REQUIRE(back.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK(back[std::size_t(i)] == tensors[std::size_t(i)]);
    }
}

TEST_CASE("hand-built file per the format layout") {
    TempFile f("kivi_dump_hand.bin");
    std::vector<unsigned char> bytes = {
        'K', 'V', 'Q', 'D',       // magic
        1, 0, 0, 0,               // version u32 = 1
        0,                        // dtype float32
        2,                        // ndim
        1, 0, 0, 0, 0, 0, 0, 0,   // dims[0] = 1
        1, 0, 0, 0, 0, 0, 0, 0,   // dims[1] = 1
        0x00, 0x00, 0x80, 0x3f,   // 1.0f little-endian
    };
    write_bytes(f.path, bytes);
    auto back = read_dump(f.path);
    REQUIRE(back.size() == 1);
    CHECK(back[0].rows() == 1);
    CHECK(back[0].cols() == 1);
    CHECK(back[0](0, 0) == 1.0f);
}

TEST_CASE("malformed files report offsets") {
    TempFile f("kivi_dump_bad.bin");
    SUBCASE("bad magic") {
        write_bytes(f.path, {'X', 'X', 'X', 'X', 1, 0, 0, 0, 0, 2});
        try {
            read_dump(f.path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.byte_offset == 0);
        }
    }
    SUBCASE("bad version") {
        write_bytes(f.path, {'K', 'V', 'Q', 'D', 7, 0, 0, 0, 0, 2});
        try {
            read_dump(f.path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.byte_offset == 4);
        }
    }
    SUBCASE("truncated payload") {
        // 2x2 tensor announced, only 1 float supplied: fails inside the
        // 16-byte payload that starts at offset 26.
        std::vector<unsigned char> bytes = {
            'K', 'V', 'Q', 'D', 1, 0, 0, 0, 0, 2,
            2, 0, 0, 0, 0, 0, 0, 0,
            2, 0, 0, 0, 0, 0, 0, 0,
            0x00, 0x00, 0x80, 0x3f,
        };
        write_bytes(f.path, bytes);
        try {
            read_dump(f.path);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.byte_offset == 30);  // 26 + the 4 bytes actually read
        }
    }
}
