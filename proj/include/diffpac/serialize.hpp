#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace diffpac {

/// Every real written by the library goes through here: 17 significant digits,
/// which round-trips IEEE doubles exactly. Non-finite values print as nan/inf.
std::string format_real(double value);

/// Minimal ordered JSON object writer. Keys keep insertion order so output is
/// byte-stable across runs. Non-finite reals are written as null.
class JsonObject {
public:
    JsonObject& add(std::string key, double value);
    JsonObject& add(std::string key, std::int64_t value);
    JsonObject& add(std::string key, int value) { return add(std::move(key), std::int64_t{value}); }
    JsonObject& add(std::string key, bool value);
    JsonObject& add(std::string key, std::string_view value);
    JsonObject& add(std::string key, const char* value) { return add(std::move(key), std::string_view(value)); }
    JsonObject& add(std::string key, JsonObject value);
    JsonObject& add(std::string key, std::vector<JsonObject> value);
    JsonObject& add(std::string key, const std::vector<double>& value);
    /// Row-major nested array, e.g. a matrix.
    JsonObject& add(std::string key, const std::vector<std::vector<double>>& rows);

    std::string dump() const;

private:
    enum class Kind { scalar, object, object_array };
    struct Member {
        std::string key;
        Kind kind;
        std::string scalar;
        std::vector<JsonObject> children;
    };

    void write(std::string& out, int depth) const;

    std::vector<Member> members_;
};

std::string json_escape(std::string_view text);

/// Writes `contents` to `path`, replacing any existing file. Throws ConfigError
/// when the file cannot be opened.
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace diffpac
