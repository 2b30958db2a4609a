#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace testsupport {

namespace fs = std::filesystem;
using tripost::Integer;

std::string data_path(const std::string& name) {
    return std::string(TRIPOST_TEST_DATA) + "/" + name;
}

std::string data(const std::string& name) {
    std::ifstream in(data_path(name), std::ios::binary);
    if (!in) throw std::runtime_error("missing test data " + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

std::string temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path p = fs::temp_directory_path() /
                 ("tripost-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

namespace {

struct Token {
    char kind;  // 'n' number, '(' ')' or an operator
    Integer value = 0;
};

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto prev_is_value = [&] { return !out.empty() && (out.back().kind == 'n' || out.back().kind == ')'); };
    while (i < s.size()) {
        const char c = s[i];
        if (c == ' ') {
            ++i;
        } else if (c == '(' || c == ')') {
            out.push_back({c});
            ++i;
        } else if (c == '-' && !prev_is_value()) {
            // Unary minus belongs to the literal that follows.
            std::size_t j = i + 1;
            Integer v = 0;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) v = v * 10 + (s[j++] - '0');
            if (j == i + 1) throw std::runtime_error("dangling minus in " + s);
            out.push_back({'n', -v});
            i = j;
        } else if (c == '+' || c == '-' || c == '*') {
            out.push_back({c});
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            Integer v = 0;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) v = v * 10 + (s[i++] - '0');
            out.push_back({'n', v});
        } else {
            throw std::runtime_error(std::string("unexpected character ") + c);
        }
    }
    return out;
}

int prec(char op) {
    return op == '*' ? 2 : 1;
}

void apply(std::vector<Integer>& vals, char op) {
    const Integer b = vals.back();
    vals.pop_back();
    Integer& a = vals.back();
    a = op == '*' ? a * b : op == '+' ? a + b : a - b;
}

}  // namespace

Integer brute_force_value(const std::string& question) {
    std::string expr = question;
    if (expr.rfind("Q: ", 0) == 0) expr = expr.substr(3);
    while (!expr.empty() && (expr.back() == '=' || expr.back() == ' ')) expr.pop_back();
    std::vector<Integer> vals;
    std::vector<char> ops;
    for (const Token& t : tokenize(expr)) {
        if (t.kind == 'n') {
            vals.push_back(t.value);
        } else if (t.kind == '(') {
            ops.push_back('(');
        } else if (t.kind == ')') {
            while (ops.back() != '(') {
                apply(vals, ops.back());
                ops.pop_back();
            }
            ops.pop_back();
        } else {
            while (!ops.empty() && ops.back() != '(' && prec(ops.back()) >= prec(t.kind)) {
                apply(vals, ops.back());
                ops.pop_back();
            }
            ops.push_back(t.kind);
        }
    }
    while (!ops.empty()) {
        apply(vals, ops.back());
        ops.pop_back();
    }
    if (vals.size() != 1) throw std::runtime_error("malformed expression " + expr);
    return vals.front();
}

std::string sorted_words(const std::vector<std::string>& words) {
    std::vector<std::string> w = words;
    std::sort(w.begin(), w.end());
    std::string out;
    for (const auto& x : w) out += (out.empty() ? "" : " ") + x;
    return out;
}

tripost::TaskInstance arithmetic_instance(const std::string& expr, int l, int d) {
    tripost::TaskInstance inst;
    inst.id = "msa-fixture";
    inst.kind = tripost::TaskKind::MultistepArithmetic;
    inst.params = {l, d};
    inst.question = "Q: " + expr + " =";
    inst.gold_answer = tripost::to_string(brute_force_value(inst.question));
    inst.split = tripost::classify_split(inst.kind, inst.params);
    return inst;
}

tripost::TaskInstance wordsort_instance(const std::vector<std::string>& words) {
    tripost::TaskInstance inst;
    inst.id = "ws-fixture";
    inst.kind = tripost::TaskKind::WordSorting;
    inst.params = {static_cast<int>(words.size()), std::nullopt};
    inst.question = tripost::wordsort_question(words);
    inst.gold_answer = sorted_words(words);
    // The generator refuses single-word lists, so classify only what it could produce.
    inst.split = words.size() < 2 ? tripost::Split::Unseen : tripost::classify_split(inst.kind, inst.params);
    return inst;
}

}  // namespace testsupport
