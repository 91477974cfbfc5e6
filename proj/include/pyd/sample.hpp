#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pyd/errors.hpp"

namespace pyd {

/// Sparse frequency spectrum l -> m_l (keys >= 1, values > 0; real-valued so
/// it can also carry smoothed counts).
using FrequencySpectrum = std::map<long, double>;

/// A sample reduced to its sufficient statistics. Immutable after
/// construction; safe to share across threads.
class SampleSummary {
  public:
    static SampleSummary from_raw_tokens(const std::vector<std::string>& tokens) {
        if (tokens.empty()) throw EmptySample();
        std::unordered_map<std::string, long> counts;
        for (const auto& t : tokens) ++counts[t];
        SampleSummary s;
        s.n_ = static_cast<long>(tokens.size());
        s.k_ = static_cast<long>(counts.size());
        s.species_freqs_.reserve(counts.size());
        for (const auto& [label, c] : counts) {
            s.species_freqs_.push_back(c);
            s.spectrum_[c] += 1.0;
        }
        std::sort(s.species_freqs_.begin(), s.species_freqs_.end());
        s.has_freqs_ = true;
        return s;
    }

    /// expected_n, when nonnegative, is validated against the induced total.
    static SampleSummary from_spectrum(const std::vector<std::pair<long, long>>& pairs,
                                       bool with_freqs = false, long expected_n = -1) {
        SampleSummary s;
        for (const auto& [l, ml] : pairs) {
            if (l <= 0 || ml <= 0) throw InvalidSpectrum("spectrum entries must have l>=1, m_l>=1");
            if (s.spectrum_.count(l)) throw DuplicateFrequency(l);
            s.spectrum_[l] = static_cast<double>(ml);
            s.n_ += l * ml;
            s.k_ += ml;
        }
        if (s.k_ == 0) throw EmptySample();
        if (expected_n >= 0 && expected_n != s.n_)
            throw InvalidSpectrum("spectrum total " + std::to_string(s.n_) +
                                  " disagrees with supplied n=" + std::to_string(expected_n));
        if (with_freqs) {
            for (const auto& [l, ml] : s.spectrum_)
                for (long j = 0; j < static_cast<long>(ml); ++j) s.species_freqs_.push_back(l);
            s.has_freqs_ = true;
        }
        return s;
    }

    long n() const { return n_; }
    long k() const { return k_; }
    const FrequencySpectrum& spectrum() const { return spectrum_; }

    bool has_species_freqs() const { return has_freqs_; }
    const std::vector<long>& species_freqs() const {
        if (!has_freqs_) throw NeedsFrequencies();
        return species_freqs_;
    }

    double count_at(long l) const {
        auto it = spectrum_.find(l);
        return it == spectrum_.end() ? 0.0 : it->second;
    }

  private:
    long n_ = 0;
    long k_ = 0;
    FrequencySpectrum spectrum_;
    std::vector<long> species_freqs_;
    bool has_freqs_ = false;
};

// ---- file formats -----------------------------------------------------------

/// Spectrum CSV: header "l,count", one row per populated l.
inline SampleSummary load_spectrum_csv(const std::string& path, bool with_freqs = false) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw EmptySample();
    std::vector<std::pair<long, long>> pairs;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b)) throw InvalidSpectrum("bad row: " + line);
        pairs.emplace_back(std::stol(a), std::stol(b));
    }
    return SampleSummary::from_spectrum(pairs, with_freqs);
}

inline void save_spectrum_csv(const SampleSummary& s, std::ostream& out) {
    out << "l,count\n";
    for (const auto& [l, ml] : s.spectrum()) out << l << ',' << static_cast<long>(ml) << '\n';
}

/// Raw token file: newline-delimited opaque labels (no normalization).
inline SampleSummary load_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) tokens.push_back(line);
    return SampleSummary::from_raw_tokens(tokens);
}

}  // namespace pyd
