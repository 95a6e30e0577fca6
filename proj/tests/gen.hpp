// Random well-formed records for property tests.
#pragma once

#include <random>
#include <string>

#include "mmtk/record.hpp"

namespace gen {

inline bool has_protocol_token(const std::string& s) {
  return s.find("<think>") != std::string::npos || s.find("</think>") != std::string::npos ||
         s.find("<nothink>") != std::string::npos;
}

inline std::string random_text_once(std::mt19937_64& rng, std::size_t max_len, bool allow_edge_space) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789 .,:;!?()[]{}<>/\\'\"-+*=\n\t#%$";
  static const char* words[] = {"Answer:", "Final answer:", "\\boxed{3}", "<thin", "think>", "</th", "nothink",
                                "é", "日本", "<image_1>"};
  std::string s;
  const std::size_t len = rng() % (max_len + 1);
  while (s.size() < len) {
    if (rng() % 12 == 0) {
      s += words[rng() % std::size(words)];
    } else {
      s += alphabet[rng() % alphabet.size()];
    }
  }
  if (!allow_edge_space) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\t')) s.erase(s.begin());
  }
  return s;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool allow_edge_space) {
  std::string s;
  do {
    s = random_text_once(rng, max_len, allow_edge_space);
  } while (has_protocol_token(s));
  return s;
}

inline mmtk::SampleRecord random_record(std::mt19937_64& rng, std::size_t index) {
  mmtk::SampleRecord r;
  r.id = "gen-" + std::to_string(index);
  r.turns.push_back({mmtk::Role::User, "question " + std::to_string(index)});
  r.mode = rng() % 2 == 0 ? mmtk::Mode::Reason : mmtk::Mode::Direct;
  if (r.mode == mmtk::Mode::Reason) r.think = random_text(rng, 200, true);
  do {
    r.final = random_text(rng, 80, false);
  } while (r.final.empty());
  r.turns.push_back({mmtk::Role::Assistant, r.final});
  return r;
}

}  // namespace gen
