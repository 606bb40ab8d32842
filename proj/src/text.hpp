#pragma once

// Small string helpers shared by the text formats. Internal to the library.

#include <charconv>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace cctml::detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void split_view(std::string_view s, char sep, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        if (i >= s.size()) break;
        const auto b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        out.emplace_back(s.substr(b, i - b));
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_size(std::string_view s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && !s.empty();
}

/// Shortest round-trip decimal form.
inline void append_double(std::string& buf, double v) {
    char tmp[32];
    auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, v);
    buf.append(tmp, p);
}

inline std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

}  // namespace cctml::detail

#include <istream>

#include "cctml/error.hpp"

namespace cctml::detail {

/// Line-oriented reader for the model text formats; tracks line numbers for
/// error messages and skips blank lines.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            strip_cr(line);
            auto tok = split_ws(line);
            if (!tok.empty()) return tok;
        }
        throw ParseError("unexpected end of input", line_ + 1);
    }

    /// Next line, which must start with `keyword` and have `count` tokens in total.
    std::vector<std::string> expect(std::string_view keyword, std::size_t count) {
        auto tok = next();
        if (tok[0] != keyword) fail("expected '" + std::string(keyword) + "', found '" + tok[0] + "'");
        if (count && tok.size() != count) fail("'" + std::string(keyword) + "' line has wrong field count");
        return tok;
    }

    double real(const std::string& s) {
        double v = 0;
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (!parse_double(s, v)) fail("bad number '" + s + "'");
        return v;
    }

    std::size_t count(const std::string& s) {
        std::size_t v = 0;
        if (!parse_size(s, v)) fail("bad count '" + s + "'");
        return v;
    }

    /// Value of a `key=value` token.
    std::string value(const std::string& tok, std::string_view key) {
        if (!tok.starts_with(key) || tok.size() <= key.size() || tok[key.size()] != '=')
            fail("expected '" + std::string(key) + "=...', found '" + tok + "'");
        return tok.substr(key.size() + 1);
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_); }

    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline std::string format_real(double v) {
    if (v != v) return "nan";
    return format_double(v);
}

}  // namespace cctml::detail
