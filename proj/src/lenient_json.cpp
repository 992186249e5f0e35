#include "physkit/lenient_json.hpp"

#include <cstdlib>
#include <optional>
#include <string>

#include "physkit/error.hpp"

namespace physkit {

namespace {

using nlohmann::json;

class LenientParser {
 public:
  explicit LenientParser(std::string_view text) : s_(text) {}

  json parse_document() {
    skip_ws();
    if (at_end()) fail("empty input");
    json v = parse_value();
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::optional<std::string> pending_key_;

  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::UnparseableResponse, what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (!at_end()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        ++pos_;
      } else if (c == '/' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '/') {
        while (!at_end() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  // Commas, "..." and the UTF-8 ellipsis carry no content between members.
  void skip_separators() {
    for (;;) {
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (s_.substr(pos_, 3) == "...") {
        while (peek() == '.') ++pos_;
      } else if (s_.substr(pos_, 3) == "\xE2\x80\xA6") {
        pos_ += 3;
      } else {
        return;
      }
    }
  }

  json parse_value() {
    skip_ws();
    const char c = peek();
    if (c == '{') return parse_object();
    if (c == '[') return parse_array();
    if (c == '"') return json(parse_string());
    if (c == '-' || (c >= '0' && c <= '9')) return parse_number();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return json(true);
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return json(false);
    }
    if (s_.substr(pos_, 4) == "null") {
      pos_ += 4;
      return json(nullptr);
    }
    if (at_end()) fail("unexpected end of input");
    fail(std::string("unexpected character '") + c + "'");
  }

  json parse_object() {
    ++pos_;  // '{'
    json obj = json::object();
    for (;;) {
      std::string key;
      if (pending_key_) {
        key = std::move(*pending_key_);
        pending_key_.reset();
      } else {
        skip_separators();
        if (at_end()) return obj;
        const char c = peek();
        if (c == '}') {
          ++pos_;
          return obj;
        }
        if (c == ']') {  // stray closer left over from an implicitly closed array
          ++pos_;
          continue;
        }
        if (c != '"') fail("expected a key");
        key = parse_string();
        skip_ws();
        if (peek() != ':') fail("expected ':' after key \"" + key + "\"");
        ++pos_;
      }
      obj[key] = parse_value();
    }
  }

  json parse_array() {
    ++pos_;  // '['
    json arr = json::array();
    for (;;) {
      skip_separators();
      if (at_end()) return arr;
      const char c = peek();
      if (c == ']') {
        ++pos_;
        return arr;
      }
      if (c == '}') return arr;  // enclosing object closes; leave it for the caller
      if (c == '"') {
        std::string s = parse_string();
        skip_ws();
        if (peek() == ':') {
          ++pos_;
          pending_key_ = std::move(s);
          return arr;
        }
        arr.push_back(std::move(s));
        continue;
      }
      arr.push_back(parse_value());
      if (pending_key_) return arr;
    }
  }

  static void append_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  unsigned parse_hex4() {
    if (pos_ + 4 > s_.size()) fail("truncated \\u escape");
    unsigned v = 0;
    for (int i = 0; i < 4; ++i) {
      const char h = s_[pos_++];
      v <<= 4;
      if (h >= '0' && h <= '9') v |= static_cast<unsigned>(h - '0');
      else if (h >= 'a' && h <= 'f') v |= static_cast<unsigned>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') v |= static_cast<unsigned>(h - 'A' + 10);
      else fail("bad \\u escape");
    }
    return v;
  }

  std::string parse_string() {
    ++pos_;  // '"'
    std::string out;
    for (;;) {
      if (at_end()) fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) fail("unterminated escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case '/': out.push_back('/'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'u': {
          unsigned cp = parse_hex4();
          if (cp >= 0xD800 && cp < 0xDC00 && s_.substr(pos_, 2) == "\\u") {
            pos_ += 2;
            const unsigned lo = parse_hex4();
            cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
          }
          append_utf8(out, cp);
          break;
        }
        default: out.push_back(e);
      }
    }
  }

  json parse_number() {
    const std::size_t start = pos_;
    bool is_float = false;
    if (peek() == '-') ++pos_;
    while (!at_end()) {
      const char c = s_[pos_];
      if (c >= '0' && c <= '9') {
        ++pos_;
      } else if (c == '.' || c == 'e' || c == 'E' || c == '+' || (c == '-' && pos_ > start)) {
        // "1..." is a number followed by a placeholder, not a float
        if (c == '.' && s_.substr(pos_, 3) == "...") break;
        is_float = true;
        ++pos_;
      } else {
        break;
      }
    }
    const std::string token(s_.substr(start, pos_ - start));
    char* end = nullptr;
    if (!is_float) {
      const long long v = std::strtoll(token.c_str(), &end, 10);
      if (end && *end == '\0' && token != "-") return json(static_cast<std::int64_t>(v));
    }
    const double d = std::strtod(token.c_str(), &end);
    if (!end || *end != '\0') fail("bad number '" + token + "'");
    return json(d);
  }
};

}  // namespace

std::string_view extract_json_text(std::string_view text) {
  const std::size_t fence = text.find("```");
  if (fence != std::string_view::npos) {
    std::size_t body = text.find('\n', fence);
    if (body != std::string_view::npos) {
      ++body;
      const std::size_t close = text.find("```", body);
      return text.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
    }
  }
  const std::size_t brace = text.find('{');
  if (brace == std::string_view::npos) return text;
  return text.substr(brace);
}

json parse_lenient_json(std::string_view text) {
  LenientParser p(extract_json_text(text));
  return p.parse_document();
}

json parse_model_json(std::string_view text) {
  std::string_view body = extract_json_text(text);
  const std::size_t last = body.rfind('}');
  if (last != std::string_view::npos) {
    json strict = json::parse(body.substr(0, last + 1), nullptr, false);
    if (!strict.is_discarded()) return strict;
  }
  return parse_lenient_json(text);
}

}  // namespace physkit
