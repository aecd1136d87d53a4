// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_TEXT_HPP
#define MODLM_TEXT_HPP

#include <string>
#include <vector>

namespace modlm::text {

// Decodes UTF-8; invalid sequences become U+FFFD.
std::u32string decode_utf8(const std::string& s);
std::string encode_utf8(const std::u32string& s);
std::string encode_utf8(char32_t cp);

bool is_space(char32_t cp);

// Collapses whitespace runs to a single U+0020 and trims the ends.
std::string collapse_whitespace(const std::string& s);

// Text normalization applied before tokenization: a compact NFKC-style
// mapping for Latin scripts (combining-mark composition, width folding,
// space-like codepoints) followed by whitespace collapsing. Case is
// preserved. The vocabulary file records the normalizer name so segmenters
// and trainers always agree.
std::string normalize(const std::string& s);
inline const char* kNormalizerName = "nfkc_latin_ws";

// Removes <...> markup tags and decodes the five standard entities.
std::string strip_markup(const std::string& s);

// Splits normalized text on U+0020.
std::vector<std::string> split_words(const std::string& normalized);

}  // namespace modlm::text

#endif  // MODLM_TEXT_HPP
