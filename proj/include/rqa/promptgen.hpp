#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rqa/corpus.hpp"

namespace rqa {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kScoreRequest = "Score this article:\n";
inline constexpr std::string_view kAbstractHeading = "\nAbstract\n";
inline constexpr std::string_view kExampleSeparator = "###\n";
inline constexpr std::string_view kSystemPromptOpening = "You are an academic expert";

/// Assessor instructions sent ahead of every user prompt.
class SystemPrompt {
 public:
  explicit SystemPrompt(std::string text);
  static SystemPrompt load(const std::filesystem::path& path);

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// One exemplar per star level, ascending.
struct FewShotSelection {
  std::array<ExemplarArticle, kStarLevels> exemplars;
  std::uint64_t seed = 0;
  std::uint64_t call_index = 0;
  /// Which of the two pool entries was drawn at each star level.
  std::array<int, kStarLevels> picks{};
};

enum class Role { system, user };

std::string_view to_string(Role role);

struct Message {
  Role role;
  std::string content;

  bool operator==(const Message&) const = default;
};

using MessageSequence = std::vector<Message>;

/// `Score this article:\n{title}\nAbstract\n{abstract}`, byte for byte.
std::string build_zero_shot_user(const Article& article);

/// Draws one of the two exemplars at each star level of the article's unit.
/// Deterministic in (seed, call_index, article id).
FewShotSelection select_fewshot(const Article& article, const FewShotPool& pool,
                                std::uint64_t seed, std::uint64_t call_index);

/// Four `This article scores {n}*:` example blocks, each closed by `###\n`,
/// followed by the zero-shot block for the target article.
std::string build_few_shot_user(const Article& article, const FewShotSelection& selection);

/// Uses a separate system message when the model supports one; otherwise
/// folds the instructions into a single user message.
MessageSequence compose_messages(const SystemPrompt& system, const std::string& user,
                                 bool supports_system_role);

}  // namespace rqa
