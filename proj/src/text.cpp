#include "mmtk/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace mmtk::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
char fold(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Scans a number starting at s[i]; returns the end position (== i when none).
std::size_t scan_number(std::string_view s, std::size_t i, std::string& digits) {
  digits.clear();
  std::size_t j = i;
  if (j < s.size() && (s[j] == '-' || s[j] == '+')) {
    digits += s[j];
    ++j;
  }
  const std::size_t int_start = j;
  while (j < s.size()) {
    if (is_digit(s[j])) {
      digits += s[j++];
    } else if (s[j] == ',' && j > int_start && j + 3 < s.size() && is_digit(s[j + 1]) && is_digit(s[j + 2]) && is_digit(s[j + 3]) &&
               (j + 4 >= s.size() || !is_digit(s[j + 4]))) {
      ++j;  // thousands separator
    } else {
      break;
    }
  }
  bool have_int = j > int_start;
  bool have_frac = false;
  if (j < s.size() && s[j] == '.' && j + 1 < s.size() && is_digit(s[j + 1])) {
    digits += '.';
    ++j;
    while (j < s.size() && is_digit(s[j])) {
      digits += s[j++];
      have_frac = true;
    }
  }
  if (!have_int && !have_frac) return i;
  if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
    std::size_t k = j + 1;
    if (k < s.size() && (s[k] == '-' || s[k] == '+')) ++k;
    if (k < s.size() && is_digit(s[k])) {
      digits += 'e';
      digits.append(s.substr(j + 1, k - j - 1));
      while (k < s.size() && is_digit(s[k])) digits += s[k++];
      j = k;
    }
  }
  return j;
}

double to_double(const std::string& digits) {
  // strtod accepts a leading '+', from_chars does not.
  return std::strtod(digits.c_str(), nullptr);
}

}  // namespace

std::string_view ltrim(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  return s.substr(i);
}

std::string_view rtrim(std::string_view s) {
  std::size_t n = s.size();
  while (n > 0 && is_space(s[n - 1])) --n;
  return s.substr(0, n);
}

std::string_view trim(std::string_view s) { return rtrim(ltrim(s)); }

std::string casefold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), fold);
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (fold(a[i]) != fold(b[i])) return false;
  }
  return true;
}

std::size_t rfind_icase(std::string_view hay, std::string_view needle) {
  if (needle.empty() || needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = hay.size() - needle.size() + 1; i-- > 0;) {
    if (iequals(hay.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) words.push_back(s.substr(start, i - start));
  }
  return words;
}

std::size_t osa_distance(std::string_view a, std::string_view b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[n][m];
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string digits;
  const std::size_t end = scan_number(s, 0, digits);
  if (end == 0 || end != s.size()) return std::nullopt;
  return to_double(digits);
}

std::vector<double> extract_numbers(std::string_view s) {
  std::vector<double> out;
  std::string digits;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool sign_ok = (s[i] == '-' || s[i] == '+') && (i == 0 || !is_digit(s[i - 1]));
    const bool starts = is_digit(s[i]) || sign_ok || (s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1]));
    if (starts && !(i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.'))) {
      const std::size_t end = scan_number(s, i, digits);
      if (end > i) {
        out.push_back(to_double(digits));
        i = end;
        continue;
      }
    }
    ++i;
  }
  return out;
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::trunc(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    std::string out = buf;
    return out == "-0" ? "0" : out;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace mmtk::text
