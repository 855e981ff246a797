#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kivi {

// Machine-parseable report: "# comment" lines and "key = value" lines.
class Report {
public:
    void comment(const std::string& text) { lines_.push_back("# " + text); }
    template <typename T>
    void set(const std::string& key, const T& value) {
        if constexpr (std::is_convertible_v<T, std::string>) {
            lines_.push_back(key + " = " + std::string(value));
        } else {
            lines_.push_back(key + " = " + std::to_string(value));
        }
    }
    void blank() { lines_.emplace_back(); }

    void write(std::ostream& out) const {
        for (const std::string& line : lines_) out << line << '\n';
    }

private:
    std::vector<std::string> lines_;
};

}  // namespace kivi
