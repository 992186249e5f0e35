#pragma once

#include <string_view>

#include <json.hpp>

namespace physkit {

/// Body of the first ``` fenced block if any, else the text from the first '{'.
std::string_view extract_json_text(std::string_view text);

/// Parses JSON the way chat models tend to write it. Accepted deviations:
/// trailing or missing commas, bare `...` placeholders, containers left open
/// at the end of input, stray closers, and `"key": value` pairs that follow an
/// unterminated array inside an object (the array is closed implicitly and the
/// pairs belong to the enclosing object). Throws UnparseableResponse.
nlohmann::json parse_lenient_json(std::string_view text);

/// Strict parse of the extracted text first; falls back to the lenient parser.
nlohmann::json parse_model_json(std::string_view text);

}  // namespace physkit
