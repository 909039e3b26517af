#include "diffpac/serialize.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "diffpac/error.hpp"

namespace diffpac {

namespace {

std::string json_real(double value) {
    return std::isfinite(value) ? format_real(value) : std::string("null");
}

void indent_to(std::string& out, int depth) {
    out.append(static_cast<std::size_t>(2 * depth), ' ');
}

}  // namespace

std::string format_real(double value) {
    return fmt::format("{:.17g}", value);
}

std::string json_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 2);
    out.push_back('"');
    for (char c : text) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    out += fmt::format("\\u{:04x}", static_cast<unsigned>(c));
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
    return out;
}

JsonObject& JsonObject::add(std::string key, double value) {
    members_.push_back({std::move(key), Kind::scalar, json_real(value), {}});
    return *this;
}

JsonObject& JsonObject::add(std::string key, std::int64_t value) {
    members_.push_back({std::move(key), Kind::scalar, std::to_string(value), {}});
    return *this;
}

JsonObject& JsonObject::add(std::string key, bool value) {
    members_.push_back({std::move(key), Kind::scalar, value ? "true" : "false", {}});
    return *this;
}

JsonObject& JsonObject::add(std::string key, std::string_view value) {
    members_.push_back({std::move(key), Kind::scalar, json_escape(value), {}});
    return *this;
}

JsonObject& JsonObject::add(std::string key, JsonObject value) {
    members_.push_back({std::move(key), Kind::object, {}, {std::move(value)}});
    return *this;
}

JsonObject& JsonObject::add(std::string key, std::vector<JsonObject> value) {
    members_.push_back({std::move(key), Kind::object_array, {}, std::move(value)});
    return *this;
}

JsonObject& JsonObject::add(std::string key, const std::vector<double>& value) {
    std::string text = "[";
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (i > 0) text += ", ";
        text += json_real(value[i]);
    }
    text += "]";
    members_.push_back({std::move(key), Kind::scalar, std::move(text), {}});
    return *this;
}

JsonObject& JsonObject::add(std::string key, const std::vector<std::vector<double>>& rows) {
    std::string text = "[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0) text += ", ";
        text += "[";
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            if (j > 0) text += ", ";
            text += json_real(rows[i][j]);
        }
        text += "]";
    }
    text += "]";
    members_.push_back({std::move(key), Kind::scalar, std::move(text), {}});
    return *this;
}

void JsonObject::write(std::string& out, int depth) const {
    if (members_.empty()) {
        out += "{}";
        return;
    }
    out += "{\n";
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const Member& m = members_[i];
        indent_to(out, depth + 1);
        out += json_escape(m.key);
        out += ": ";
        switch (m.kind) {
            case Kind::scalar:
                out += m.scalar;
                break;
            case Kind::object:
                m.children.front().write(out, depth + 1);
                break;
            case Kind::object_array:
                if (m.children.empty()) {
                    out += "[]";
                    break;
                }
                out += "[\n";
                for (std::size_t k = 0; k < m.children.size(); ++k) {
                    indent_to(out, depth + 2);
                    m.children[k].write(out, depth + 2);
                    out += k + 1 < m.children.size() ? ",\n" : "\n";
                }
                indent_to(out, depth + 1);
                out += "]";
                break;
        }
        out += i + 1 < members_.size() ? ",\n" : "\n";
    }
    indent_to(out, depth);
    out += "}";
}

std::string JsonObject::dump() const {
    std::string out;
    write(out, 0);
    out += "\n";
    return out;
}

void write_text_file(const std::string& path, std::string_view contents) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw ConfigError(fmt::format("cannot open '{}' for writing", path));
    }
    file.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!file) {
        throw ConfigError(fmt::format("failed writing '{}'", path));
    }
}

}  // namespace diffpac
