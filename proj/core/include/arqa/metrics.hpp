#pragma once

#include <string>
#include <vector>

namespace arqa {

// Case-folded tokens split on whitespace and punctuation.  ASCII letters
// are lowercased; non-ASCII UTF-8 runs are kept verbatim as token
// characters, so non-Latin text tokenizes deterministically.
std::vector<std::string> tokenize(const std::string& text);

// LCS-based F-measure, max over references; 0 when either side is empty.
double rouge_l(const std::string& candidate, const std::vector<std::string>& references);

// Sentence-level BLEU: geometric mean of clipped n-gram precisions for
// n = 1..min(4, |candidate|), a zero count smoothed to 1e-12, times the
// brevity penalty against the closest reference length (ties toward the
// shorter reference).  Empty candidate scores 0.
double bleu(const std::string& candidate, const std::vector<std::string>& references);

enum class YesNo { yes, no, unparsed };

const char* yesno_name(YesNo value);

// Final-answer cue extraction: prefers the first standalone yes/no after
// the last "answer" marker; otherwise the first standalone yes/no token;
// otherwise unparsed.
YesNo extract_yesno(const std::string& answer);

}  // namespace arqa
