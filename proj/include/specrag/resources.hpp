#pragma once

#include <string_view>

// Text assets compiled into the library from prompts/ and data/. The bytes are
// identical to the shipped files.
namespace specrag::resources {

std::string_view query_reformulation_prompt();
std::string_view query_metadata_prompt();
std::string_view answer_generation_prompt();
std::string_view stopwords();
std::string_view default_glossary();

}  // namespace specrag::resources
