#pragma once

// Emotion -> nominal appraisal pattern table, the nominal -> distribution
// mapping, and synthetic labeled corpora drawn from them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "appraise_rl/appraisal.hpp"
#include "appraise_rl/rng.hpp"

namespace appraise_rl {

enum class Emotion { happiness, joy, pride, boredom, fear, sadness, shame, anxiety, despair, irritation, rage };
inline constexpr int kEmotionCount = 11;

const std::vector<Emotion>& all_emotions();
std::string_view emotion_name(Emotion e);
std::optional<Emotion> find_emotion(std::string_view name);
/// Throws DomainError for unknown names.
Emotion parse_emotion(std::string_view name);

enum class NominalLevel { obstruct, very_low, low, medium, high, very_high, open };
inline constexpr int kLevelCount = 7;

std::string_view level_name(NominalLevel l);
std::optional<NominalLevel> find_level(std::string_view name);

struct LevelDistribution {
  enum class Kind {
    above,    // a + |N(0, b)|
    below,    // a - |N(0, b)|
    normal,   // N(a, b)
    uniform,  // U(a, b)
  };
  Kind kind = Kind::uniform;
  double a = 0.0;
  double b = 1.0;
};

struct LevelMapping {
  std::array<LevelDistribution, kLevelCount> dist;
  const LevelDistribution& operator[](NominalLevel l) const { return dist[static_cast<std::size_t>(l)]; }
  LevelDistribution& operator[](NominalLevel l) { return dist[static_cast<std::size_t>(l)]; }
};

/// One check's nominal value; several levels form an equal-weight mixture ("high/medium").
using LevelMix = std::vector<NominalLevel>;

struct AppraisalPattern {
  Emotion emotion = Emotion::happiness;
  LevelMix suddenness, goal_relevance, conduciveness, power;
};

struct Knowledge {
  LevelMapping levels;
  std::vector<AppraisalPattern> patterns;
  /// Throws DomainError when the emotion has no pattern.
  const AppraisalPattern& pattern(Emotion e) const;
};

/// Built-in table; medium is centred at `medium_mean`.
Knowledge default_knowledge(double medium_mean = 0.5);

/// Reads scherer_patterns.csv and nominal_levels.csv from `dir`.
Knowledge load_knowledge(const std::filesystem::path& dir);
LevelMapping parse_level_mapping(std::string_view csv);
std::vector<AppraisalPattern> parse_patterns(std::string_view csv);

/// Draw clipped to [0, 1].
double sample_level(const LevelDistribution& d, Rng& rng);
double sample_level(const LevelMix& mix, const LevelMapping& m, Rng& rng);
AppraisalVector sample_pattern(const AppraisalPattern& p, const LevelMapping& m, Rng& rng);

struct LabeledSample {
  AppraisalVector vector;
  Emotion label = Emotion::happiness;
  bool operator==(const LabeledSample&) const = default;
};

/// `n_per` samples for each emotion, each class from its own sub-seed, then shuffled.
std::vector<LabeledSample> build_corpus(const Knowledge& k, const std::vector<Emotion>& emotions, int n_per,
                                        std::uint64_t seed);

std::string corpus_to_csv(const std::vector<LabeledSample>& corpus);
std::vector<LabeledSample> corpus_from_csv(std::string_view csv);

}  // namespace appraise_rl
