#include <doctest.h>

#include <filesystem>
#include <thread>

#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/prompt.hpp"

using namespace vale;

TEST_CASE("default template renders with the label quoted once") {
  const PromptRegistry reg;
  CHECK(render(reg.get("default-imagenet"), "bald_eagle").rendered == "Explain the object in the image: 'bald_eagle'?");
}

TEST_CASE("sonar template") {
  const PromptRegistry reg;
  CHECK(render(reg.get("sonar-custom"), "Airplane").rendered ==
        "Describe only the object in the image that represents the 'Airplane' as acquired through the use of "
        "synthetic aperture sonar, make sure to ignore the background?");
}

TEST_CASE("placeholder handling") {
  CHECK(render({"t", "Explain?"}, "cat").rendered == "Explain?");
  CHECK(render({"t", "Is this a {predicted label}?"}, "cat").rendered == "Is this a 'cat'?");
  CHECK(render({"t", "{predicted label} or {predicted label}"}, "dog").rendered == "'dog' or 'dog'");
  CHECK(render({"t", "A ‘{predicted label}’ here"}, "dog").rendered == "A ‘dog’ here");
  const auto b = render({"t", "x {predicted label}"}, "bald_eagle");
  CHECK(b.templateId == "t");
  CHECK(b.label == "bald_eagle");
  CHECK_THROWS_AS(render({"t", "x"}, ""), InputError);
}

TEST_CASE("registry contents and loading") {
  PromptRegistry reg;
  const auto builtins = reg.list();
  REQUIRE(builtins.size() == 3);
  CHECK(builtins[0].id == "default-imagenet");
  CHECK(builtins[1].id == "sonar-custom");
  CHECK(builtins[2].id == "bare");
  CHECK(builtins[2].text == "Explain?");
  reg.load_json(R"([{"id": "mine", "text": "What {predicted label}?"}])");
  CHECK(reg.list().size() == 4);
  CHECK(reg.list().back().id == "mine");
  CHECK_THROWS_AS(reg.load_json(R"([{"id": "mine", "text": "again"}])"), ConflictError);
  CHECK_THROWS_AS(reg.load_json(R"([{"id": "fresh", "text": "a"}, {"id": "bare", "text": "b"}])"), ConflictError);
  CHECK_FALSE(reg.contains("fresh"));  // all-or-nothing
  CHECK_THROWS_AS(reg.load_json(R"([{"id": "", "text": "a"}])"), InputError);
  CHECK_THROWS_AS(reg.load_json(R"({"id": "x"})"), InputError);
  CHECK_THROWS_AS(reg.get("nope"), InputError);
}

TEST_CASE("registry round trips through the template file format") {
  PromptRegistry reg;
  reg.load_json(R"([{"id": "a", "text": "A {predicted label}"}, {"id": "b", "text": "B"}])");
  PromptRegistry again;
  again.load_json(reg.user_templates_json());
  CHECK(again.list() == reg.list());
  const auto path = std::filesystem::temp_directory_path() / "vale_templates_test.json";
  write_text(path, templates_to_json(parse_templates(reg.user_templates_json())));
  PromptRegistry fromFile;
  fromFile.load_file(path);
  CHECK(fromFile.list() == reg.list());
  std::filesystem::remove(path);
}

TEST_CASE("concurrent readers") {
  PromptRegistry reg;
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 200; ++i) CHECK(render(reg.get("bare"), "x").rendered == "Explain?");
    });
}
