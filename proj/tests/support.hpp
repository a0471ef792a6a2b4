#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "evo/errors.hpp"
#include "evo/rng.hpp"
#include "evo/scoring.hpp"

namespace testing {

inline evo::ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const evo::Error& e) {
        return e.kind();
    }
    throw std::logic_error("expected an evo::Error");
}

#define CHECK_THROWS_KIND(expr, k) CHECK(::testing::kind_of([&] { (void)(expr); }) == (k))

inline evo::scoring::TokenMatrix random_matrix(evo::Rng& rng, std::size_t rows, std::size_t dim,
                                               double scale = 1.0) {
    evo::scoring::TokenMatrix m(rows, dim);
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
}

inline evo::scoring::TokenMatrix random_unit_matrix(evo::Rng& rng, std::size_t rows, std::size_t dim) {
    return evo::scoring::l2_normalize(random_matrix(rng, rows, dim));
}

inline std::filesystem::path golden_dir() { return EVO_GOLDEN_DIR; }

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("evo-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline double rel_error(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing
