// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/text.hpp"

#include <array>
#include <unordered_map>

namespace modlm::text {

std::u32string decode_utf8(const std::string& s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < n) {
      cp = static_cast<char32_t>((c & 0x1F) << 6 |
                                 (static_cast<unsigned char>(s[i + 1]) & 0x3F));
      len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < n) {
      cp = static_cast<char32_t>(
          (c & 0x0F) << 12 |
          (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6 |
          (static_cast<unsigned char>(s[i + 2]) & 0x3F));
      len = 3;
    } else if ((c >> 3) == 0x1E && i + 3 < n) {
      cp = static_cast<char32_t>(
          (c & 0x07) << 18 |
          (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12 |
          (static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6 |
          (static_cast<unsigned char>(s[i + 3]) & 0x3F));
      len = 4;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
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
  return out;
}

std::string encode_utf8(const std::u32string& s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) out += encode_utf8(cp);
  return out;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:
    case 0xA0:    // no-break space
    case 0x1680:  // ogham space mark
    case 0x2028:
    case 0x2029:
    case 0x202F:  // narrow no-break space (frequent in fr text)
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;  // typographic spaces
  }
}

namespace {

// Composition of a base Latin letter with a combining mark into the
// precomposed codepoint. Covers the marks that occur in the four target
// languages (acute, grave, circumflex, diaeresis, tilde, cedilla, ring).
char32_t compose(char32_t base, char32_t mark) {
  struct Entry {
    char32_t mark;
    const char* bases;
    const char32_t* composed;
  };
  // ordered as in `bases`
  static const char32_t kAcute[] = {0xE1, 0xE9, 0xED, 0xF3, 0xFA, 0xFD, 0x107,
                                    0xC1, 0xC9, 0xCD, 0xD3, 0xDA, 0xDD, 0x106};
  static const char32_t kGrave[] = {0xE0, 0xE8, 0xEC, 0xF2, 0xF9,
                                    0xC0, 0xC8, 0xCC, 0xD2, 0xD9};
  static const char32_t kCirc[] = {0xE2, 0xEA, 0xEE, 0xF4, 0xFB,
                                   0xC2, 0xCA, 0xCE, 0xD4, 0xDB};
  static const char32_t kDia[] = {0xE4, 0xEB, 0xEF, 0xF6, 0xFC, 0xFF,
                                  0xC4, 0xCB, 0xCF, 0xD6, 0xDC, 0x178};
  static const char32_t kTilde[] = {0xE3, 0xF1, 0xF5, 0xC3, 0xD1, 0xD5};
  static const char32_t kCedilla[] = {0xE7, 0xC7};
  static const char32_t kRing[] = {0xE5, 0xC5};
  static const Entry kTable[] = {
      {0x301, "aeiouyc" "AEIOUYC", kAcute},
      {0x300, "aeiou" "AEIOU", kGrave},
      {0x302, "aeiou" "AEIOU", kCirc},
      {0x308, "aeiouy" "AEIOUY", kDia},
      {0x303, "ano" "ANO", kTilde},
      {0x327, "cC", kCedilla},
      {0x30A, "aA", kRing},
  };
  for (const auto& e : kTable) {
    if (e.mark != mark) continue;
    for (const char* p = e.bases; *p; ++p) {
      if (static_cast<char32_t>(*p) == base)
        return e.composed[p - e.bases];
    }
  }
  return 0;
}

// Single-codepoint compatibility mappings (width folding, dashes kept,
// ligatures expanded, soft hyphen removed).
std::u32string map_compat(char32_t cp) {
  if (is_space(cp)) return U" ";
  if (cp == 0xAD || cp == 0x200B || cp == 0x200C || cp == 0x200D ||
      cp == 0xFEFF)
    return U"";  // soft hyphen, zero-width characters
  if (cp >= 0xFF01 && cp <= 0xFF5E)  // fullwidth ASCII block
    return std::u32string(1, cp - 0xFF01 + 0x21);
  switch (cp) {
    case 0xFB00: return U"ff";
    case 0xFB01: return U"fi";
    case 0xFB02: return U"fl";
    case 0xFB03: return U"ffi";
    case 0xFB04: return U"ffl";
    case 0x2160: return U"I";
    case 0x2126: return std::u32string(1, 0x3A9);  // ohm -> omega
    default: return std::u32string(1, cp);
  }
}

}  // namespace

std::string normalize(const std::string& s) {
  const std::u32string in = decode_utf8(s);
  std::u32string mapped;
  mapped.reserve(in.size());
  for (char32_t cp : in) mapped += map_compat(cp);
  // compose combining marks with the preceding base letter
  std::u32string composed;
  composed.reserve(mapped.size());
  for (char32_t cp : mapped) {
    if (!composed.empty()) {
      const char32_t c = compose(composed.back(), cp);
      if (c != 0) {
        composed.back() = c;
        continue;
      }
    }
    composed.push_back(cp);
  }
  // collapse whitespace
  std::u32string out;
  out.reserve(composed.size());
  bool pending_space = false;
  for (char32_t cp : composed) {
    if (cp == U' ') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return encode_utf8(out);
}

std::string collapse_whitespace(const std::string& s) {
  const std::u32string in = decode_utf8(s);
  std::u32string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char32_t cp : in) {
    if (is_space(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return encode_utf8(out);
}

std::string strip_markup(const std::string& s) {
  // special-token literals survive stripping; cleaning stays idempotent on
  // already-cleaned text
  static const std::array<const char*, 8> kKeep = {
      "</s>", "<s>", "<pad>", "<unk>", "<mask>", "<medium>", "<year>",
      "<month>"};
  std::string out;
  out.reserve(s.size());
  bool in_tag = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '<' && !in_tag) {
      bool kept = false;
      for (const char* lit : kKeep) {
        const std::size_t len = std::char_traits<char>::length(lit);
        if (s.compare(i, len, lit) == 0) {
          out += lit;
          i += len - 1;
          kept = true;
          break;
        }
      }
      if (kept) continue;
      in_tag = true;
      continue;
    }
    if (c == '>') {
      if (in_tag) {
        in_tag = false;
        continue;
      }
    }
    if (!in_tag) out.push_back(c);
  }
  // standard entities
  static const std::array<std::pair<const char*, const char*>, 5> kEntities = {
      {{"&amp;", "&"},
       {"&lt;", "<"},
       {"&gt;", ">"},
       {"&quot;", "\""},
       {"&#39;", "'"}}};
  std::string res;
  res.reserve(out.size());
  for (std::size_t i = 0; i < out.size();) {
    bool matched = false;
    if (out[i] == '&') {
      for (const auto& [ent, rep] : kEntities) {
        const std::size_t len = std::char_traits<char>::length(ent);
        if (out.compare(i, len, ent) == 0) {
          res += rep;
          i += len;
          matched = true;
          break;
        }
      }
    }
    if (!matched) {
      res.push_back(out[i]);
      ++i;
    }
  }
  return res;
}

std::vector<std::string> split_words(const std::string& normalized) {
  std::vector<std::string> words;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= normalized.size(); ++i) {
    if (i == normalized.size() || normalized[i] == ' ') {
      if (i > start) words.push_back(normalized.substr(start, i - start));
      start = i + 1;
    }
  }
  return words;
}

}  // namespace modlm::text
