#pragma once

#include <string>
#include <vector>

#include "tripost/integer.hpp"
#include "tripost/task.hpp"

namespace testsupport {

// Contents of tests/data/<name>, minus one trailing newline.
std::string data(const std::string& name);
std::string data_path(const std::string& name);

// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& tag);

// Independent evaluator for "Q: <expr> =" questions: a shunting-yard pass
// over a hand tokenizer, sharing nothing with the library parser.
tripost::Integer brute_force_value(const std::string& question);

// Alphabetical order by plain string comparison.
std::string sorted_words(const std::vector<std::string>& words);

tripost::TaskInstance arithmetic_instance(const std::string& expr, int l, int d);
tripost::TaskInstance wordsort_instance(const std::vector<std::string>& words);

}  // namespace testsupport
