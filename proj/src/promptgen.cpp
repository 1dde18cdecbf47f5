#include "rqa/promptgen.hpp"

#include <fmt/format.h>

#include "rqa/io.hpp"
#include "rqa/rng.hpp"

namespace rqa {

SystemPrompt::SystemPrompt(std::string text) : text_(std::move(text)) {
  if (text_.empty()) throw PromptError("system prompt is empty");
  if (!std::string_view(text_).starts_with(kSystemPromptOpening))
    throw PromptError(fmt::format("system prompt must begin with \"{}\"", kSystemPromptOpening));
}

SystemPrompt SystemPrompt::load(const std::filesystem::path& path) {
  return SystemPrompt(read_text_file(path));
}

std::string_view to_string(Role role) { return role == Role::system ? "system" : "user"; }

std::string build_zero_shot_user(const Article& article) {
  if (article.title.empty())
    throw PromptError(fmt::format("article '{}' has an empty title", article.id));
  if (article.abstract.empty())
    throw PromptError(fmt::format("article '{}' has an empty abstract", article.id));
  std::string out;
  out.reserve(kScoreRequest.size() + article.title.size() + kAbstractHeading.size() +
              article.abstract.size());
  out += kScoreRequest;
  out += article.title;
  out += kAbstractHeading;
  out += article.abstract;
  return out;
}

FewShotSelection select_fewshot(const Article& article, const FewShotPool& pool,
                                std::uint64_t seed, std::uint64_t call_index) {
  if (!pool.units.contains(article.uoa))
    throw PromptError(fmt::format("few-shot pool has no exemplars for uoa {}", article.uoa));

  FewShotSelection sel;
  sel.seed = seed;
  sel.call_index = call_index;
  Rng rng(derive_seed(seed ^ stable_hash(article.id), "fewshot", call_index));
  for (int star = 1; star <= kStarLevels; ++star) {
    const auto& cell = pool.cell(article.uoa, star);
    const auto pick = static_cast<int>(uniform_index(rng, kExemplarsPerCell));
    sel.picks[static_cast<std::size_t>(star - 1)] = pick;
    sel.exemplars[static_cast<std::size_t>(star - 1)] = cell[static_cast<std::size_t>(pick)];
  }
  return sel;
}

std::string build_few_shot_user(const Article& article, const FewShotSelection& selection) {
  std::string out;
  for (const auto& ex : selection.exemplars) {
    out += fmt::format("This article scores {}*:\n", ex.star);
    out += ex.article.title;
    out += kAbstractHeading;
    out += ex.article.abstract;
    out += '\n';
    out += kExampleSeparator;
  }
  out += build_zero_shot_user(article);
  return out;
}

MessageSequence compose_messages(const SystemPrompt& system, const std::string& user,
                                 bool supports_system_role) {
  if (user.empty()) throw PromptError("user prompt is empty");
  if (supports_system_role) return {{Role::system, system.text()}, {Role::user, user}};
  return {{Role::user, system.text() + "\n" + user}};
}

}  // namespace rqa
