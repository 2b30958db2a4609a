#include "tripost/student.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tripost/errors.hpp"
#include "tripost/improve.hpp"

namespace tripost {

namespace {

constexpr int kMaxDefects = 3;

// One stream per (instance, purpose): the same instance sees the same draws
// in every iteration, so a better profile can only turn failures into successes.
Rng instance_rng(const StudentProfile& profile, const TaskInstance& inst, std::string_view purpose, int round = 0) {
    return Rng(derive_seed(mix_seed(profile.rng_seed, fnv1a(inst.id)),
                           std::string(purpose) + "/" + std::to_string(round)));
}

int random_delta(Rng& rng) {
    const int magnitude = rng.between(1, 9);
    return rng.bernoulli(0.5) ? magnitude : -magnitude;
}

int count_groups(const arith::Expr& e) {
    if (!e.is_group()) return 0;
    int n = 1;
    for (const auto& o : e.operands) n += count_groups(o);
    return n;
}

// --- arithmetic sites -------------------------------------------------------

struct ArithmeticLayout {
    ArithmeticPlan plan;
    std::size_t letters = 0;
    std::size_t final_step = 0;
};

ArithmeticLayout arithmetic_layout(const TaskInstance& inst) {
    ArithmeticLayout l;
    l.plan = plan_arithmetic(arith::parse(arithmetic_expression_of(inst.question)));
    l.letters = l.plan.letters.size();
    l.final_step = l.letters + 1;
    return l;
}

std::string arith_label(std::size_t step) {
    return std::to_string(step + 1);
}

// Dropping operand k from a flat group must change its value to be visible.
std::vector<std::size_t> droppable_operands(const arith::Expr& def) {
    std::vector<std::size_t> out;
    if (def.operands.size() <= 2) return out;
    const auto full = arith::evaluate(def);
    for (std::size_t k = 1; k < def.operands.size(); ++k) {
        arith::Expr d = def;
        d.operands.erase(d.operands.begin() + static_cast<std::ptrdiff_t>(k));
        d.ops.erase(d.ops.begin() + static_cast<std::ptrdiff_t>(k - 1));
        if (arith::evaluate(d) != full) out.push_back(k - 1);
    }
    return out;
}

std::optional<std::pair<ArithmeticDefect, std::size_t>> pick_arithmetic(const ArithmeticLayout& layout, ErrorKind kind,
                                                                       const std::set<std::size_t>& used, Rng& rng) {
    using Type = ArithmeticDefect::Type;
    const std::size_t fr_step = layout.final_step + 1;  // pseudo index for the final response
    auto free_steps = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> out;
        for (std::size_t s = lo; s <= hi; ++s) {
            if (!used.count(s)) out.push_back(s);
        }
        return out;
    };
    ArithmeticDefect d;
    d.delta = random_delta(rng);
    switch (kind) {
    case ErrorKind::Calculation: {
        auto steps = free_steps(1, layout.final_step);
        if (steps.empty()) return std::nullopt;
        d.type = Type::Calculation;
        d.step = steps[rng.below(steps.size())];
        int groups = 1;
        if (d.step <= layout.letters) {
            groups = count_groups(arith::parenthesize(layout.plan.definitions[d.step - 1]));
        } else {
            groups = count_groups(layout.plan.skeleton);
        }
        d.link = rng.below(static_cast<std::uint64_t>(std::max(groups, 1)));
        return std::make_pair(d, d.step);
    }
    case ErrorKind::Copy: {
        auto steps = free_steps(1, layout.final_step);
        if (steps.empty()) return std::nullopt;
        d.step = steps[rng.below(steps.size())];
        if (d.step == layout.final_step) {
            d.type = Type::CopySubstitution;
            d.link = rng.below(std::max<std::size_t>(layout.letters, 1));
            return std::make_pair(d, d.step);
        }
        const auto& def = layout.plan.definitions[d.step - 1];
        const auto droppable = droppable_operands(def);
        if (!droppable.empty() && rng.bernoulli(0.5)) {
            d.type = Type::CopyChain;
            d.link = droppable[rng.below(droppable.size())];
        } else {
            d.type = Type::CopyDefinition;
            d.link = rng.below(def.operands.size());
        }
        return std::make_pair(d, d.step);
    }
    case ErrorKind::Decomposition: {
        if (used.count(0) || layout.letters < 2) return std::nullopt;
        d.type = Type::Decomposition;
        d.step = 0;
        d.link = rng.below(layout.letters - 1);
        return std::make_pair(d, std::size_t{0});
    }
    case ErrorKind::FinalInconsistent:
        if (used.count(fr_step)) return std::nullopt;
        d.type = Type::FinalInconsistent;
        d.step = fr_step;
        return std::make_pair(d, fr_step);
    default:
        return std::nullopt;
    }
}

// --- word-sort sites --------------------------------------------------------

std::string mutate_word(const std::string& word, const std::set<std::string>& taken, Rng& rng) {
    for (int tries = 0; tries < 64; ++tries) {
        std::string w = word;
        const std::size_t at = rng.below(w.size());
        char c = static_cast<char>('a' + rng.below(26));
        if (c == w[at]) continue;
        w[at] = c;
        if (!taken.count(w)) return w;
    }
    return word + "s";
}

std::optional<std::pair<WordSortDefect, std::size_t>> pick_wordsort(const Attempt& gold, ErrorKind kind,
                                                                   const std::set<std::size_t>& used,
                                                                   const std::set<std::string>& words, Rng& rng) {
    using Type = WordSortDefect::Type;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < gold.steps.size(); ++i) {
        if (used.count(i)) continue;
        const Step& s = gold.steps[i];
        const bool listing = s.kind == StepKind::LetterIndex || s.kind == StepKind::Subsort;
        const auto* ord = std::get_if<Ordering>(&s.payload);
        switch (kind) {
        case ErrorKind::LetterIndex:
            if (listing) candidates.push_back(i);
            break;
        case ErrorKind::SortOrder:
            if (ord && ord->items.size() > 1) candidates.push_back(i);
            break;
        case ErrorKind::MissingItem:
            if (ord) candidates.push_back(i);
            break;
        case ErrorKind::Copy:
            if (listing || ord) candidates.push_back(i);
            break;
        case ErrorKind::FinalInconsistent:
            if (s.kind == StepKind::FinalResponse && words.size() > 1) candidates.push_back(i);
            break;
        default:
            break;
        }
    }
    if (candidates.empty()) return std::nullopt;
    const std::size_t at = candidates[rng.below(candidates.size())];
    const Step& s = gold.steps[at];
    WordSortDefect d;
    d.label = s.label;
    if (const auto* l = std::get_if<LetterListing>(&s.payload)) {
        const auto& e = l->entries[rng.below(l->entries.size())];
        d.word = e.word;
        d.position = l->position;
        if (kind == ErrorKind::LetterIndex) {
            d.type = Type::LetterIndex;
            char c = static_cast<char>('a' + rng.below(25));
            if (!e.letter.empty() && c >= e.letter[0]) ++c;
            d.letter = std::string(1, c);
            d.index = alphabet_index(c);
        }
    } else if (const auto* o = std::get_if<Ordering>(&s.payload)) {
        const auto& item = o->items[rng.below(o->items.size())];
        d.word = item.words[rng.below(item.words.size())];
        if (kind == ErrorKind::SortOrder) {
            d.type = Type::SortOrder;
            d.swap_at = rng.below(o->items.size() - 1);
        } else if (kind == ErrorKind::MissingItem) {
            d.type = Type::MissingItem;
        }
    } else {
        d.type = Type::FinalInconsistent;
        d.swap_at = rng.below(words.size() - 1);
    }
    if (kind == ErrorKind::Copy) {
        d.type = Type::Copy;
        d.replacement = mutate_word(d.word, words, rng);
    }
    return std::make_pair(d, at);
}

double clamp01(double v) {
    return std::min(1.0, std::max(0.0, v));
}

// Mislocalized feedback: blame some other numbered step.
Feedback wrong_feedback(const Attempt& attempt, const Feedback& truth, Rng& rng) {
    std::vector<const Step*> others;
    for (const auto& s : attempt.steps) {
        if (s.label == kFinalResponseLabel) continue;
        if (truth.error_step && *truth.error_step == s.label) continue;
        if (s.body().empty()) continue;
        others.push_back(&s);
    }
    if (others.empty()) return terminal_feedback(attempt);
    const Step& s = *others[rng.below(others.size())];
    std::string_view body = s.body();
    const auto nl = body.find('\n');
    if (nl != std::string_view::npos) body = body.substr(0, nl);
    return error_feedback(attempt, s.label, std::string(body), std::nullopt, "this step does not follow from the previous steps");
}

double mean_error_rate(const StudentProfile& profile, TaskKind kind) {
    const auto kinds = applicable_error_kinds(kind);
    if (kinds.empty()) return 0.0;
    double sum = 0.0;
    for (ErrorKind k : kinds) sum += profile.rate(k);
    return sum / static_cast<double>(kinds.size());
}

}  // namespace

double StudentProfile::competence_for(const TaskInstance& inst) const {
    auto it = competence.find(competence_key(inst));
    return it == competence.end() ? default_competence : it->second;
}

double StudentProfile::rate(ErrorKind kind) const {
    auto it = error_rate.find(kind);
    return it == error_rate.end() ? 0.0 : it->second;
}

StudentProfile initial_student_profile(std::uint64_t seed) {
    StudentProfile p;
    p.rng_seed = seed;
    p.error_rate = {{ErrorKind::Calculation, 0.45},  {ErrorKind::Copy, 0.30},
                    {ErrorKind::SortOrder, 0.30},    {ErrorKind::LetterIndex, 0.35},
                    {ErrorKind::Decomposition, 0.10}, {ErrorKind::FinalInconsistent, 0.10},
                    {ErrorKind::MissingItem, 0.15}};
    p.si_propensity = 0.0;
    p.default_competence = 0.3;
    return p;
}

std::string competence_key(const TaskInstance& inst) {
    return std::string(to_string(inst.kind)) + "/" + subtask_key(inst.kind, inst.params);
}

void validate(const StudentProfile& profile) {
    auto prob = [](double v, const std::string& what) {
        if (!(v >= 0.0 && v <= 1.0)) throw ParameterError(what + " must be in [0, 1]");
    };
    for (const auto& [k, v] : profile.error_rate) prob(v, "error rate for " + std::string(to_string(k)));
    for (const auto& [k, v] : profile.competence) prob(v, "competence for " + k);
    prob(profile.si_propensity, "si_propensity");
    prob(profile.default_competence, "default_competence");
}

nlohmann::ordered_json to_json(const StudentProfile& profile) {
    nlohmann::ordered_json j;
    j["version"] = profile.version;
    j["iteration"] = profile.iteration;
    j["rng_seed"] = profile.rng_seed;
    nlohmann::ordered_json rates = nlohmann::ordered_json::object();
    for (ErrorKind k : kAllErrorKinds) {
        if (profile.error_rate.count(k)) rates[std::string(to_string(k))] = profile.error_rate.at(k);
    }
    j["error_rate"] = std::move(rates);
    j["si_propensity"] = profile.si_propensity;
    nlohmann::ordered_json comp = nlohmann::ordered_json::object();
    for (const auto& [k, v] : profile.competence) comp[k] = v;
    j["competence"] = std::move(comp);
    j["default_competence"] = profile.default_competence;
    return j;
}

StudentProfile profile_from_json(const nlohmann::json& j) {
    StudentProfile p;
    try {
        p.version = j.value("version", 1);
        p.iteration = j.value("iteration", 0);
        p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        for (const auto& [k, v] : j.at("error_rate").items()) p.error_rate[error_kind_from_string(k)] = v.get<double>();
        p.si_propensity = j.value("si_propensity", 0.0);
        if (j.contains("competence")) {
            for (const auto& [k, v] : j.at("competence").items()) p.competence[k] = v.get<double>();
        }
        p.default_competence = j.value("default_competence", p.default_competence);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("student profile: ") + e.what());
    }
    validate(p);
    return p;
}

void save_profile(const std::string& path, const StudentProfile& profile) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << to_json(profile).dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

StudentProfile load_profile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    try {
        return profile_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::vector<ErrorKind> applicable_error_kinds(TaskKind kind) {
    switch (kind) {
    case TaskKind::MultistepArithmetic:
        return {ErrorKind::Calculation, ErrorKind::Copy, ErrorKind::Decomposition, ErrorKind::FinalInconsistent};
    case TaskKind::WordSorting:
        return {ErrorKind::LetterIndex, ErrorKind::SortOrder, ErrorKind::MissingItem, ErrorKind::Copy,
                ErrorKind::FinalInconsistent};
    default:
        return {};
    }
}

InjectedAttempt inject_defects(const TaskInstance& inst, const std::vector<ErrorKind>& kinds, Rng& rng) {
    InjectedAttempt out;
    std::vector<std::pair<std::size_t, DefectSite>> sites;
    if (inst.kind == TaskKind::MultistepArithmetic) {
        const auto layout = arithmetic_layout(inst);
        std::set<std::size_t> used;
        std::vector<ArithmeticDefect> defects;
        for (ErrorKind k : kinds) {
            auto picked = pick_arithmetic(layout, k, used, rng);
            if (!picked) continue;
            used.insert(picked->second);
            defects.push_back(picked->first);
            const std::string label =
                picked->second > layout.final_step ? std::string(kFinalResponseLabel) : arith_label(picked->second);
            sites.emplace_back(picked->second, DefectSite{label, k});
        }
        out.attempt = render_arithmetic(inst, defects);
    } else if (inst.kind == TaskKind::WordSorting) {
        const Attempt gold = gold_rationale_wordsort(inst);
        const auto list = wordsort_words_of(inst.question);
        const std::set<std::string> words(list.begin(), list.end());
        std::set<std::size_t> used;
        std::vector<WordSortDefect> defects;
        for (ErrorKind k : kinds) {
            auto picked = pick_wordsort(gold, k, used, words, rng);
            if (!picked) continue;
            used.insert(picked->second);
            defects.push_back(picked->first);
            sites.emplace_back(picked->second, DefectSite{gold.steps[picked->second].label, k});
        }
        out.attempt = render_wordsort(inst, defects);
    } else {
        throw KindError("the simulator only covers scriptable tasks");
    }
    std::sort(sites.begin(), sites.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& s : sites) out.sites.push_back(std::move(s.second));
    return out;
}

namespace {

InjectedAttempt draw_attempt(const TaskInstance& inst, const StudentProfile& profile, Rng& rng) {
    const double gate = rng.uniform();
    int slots = 1;
    while (slots < kMaxDefects && rng.bernoulli(0.5)) ++slots;
    // Threshold draws are taken for every (slot, kind) regardless of outcome,
    // so the stream position never depends on the profile.
    // Kinds with no usable site on this instance never fire, so a slot falls
    // through to the next kind that can actually be injected.
    const auto applicable = applicable_error_kinds(inst.kind);
    std::vector<bool> usable;
    for (ErrorKind k : applicable) {
        Rng probe(0);
        usable.push_back(!inject_defects(inst, {k}, probe).sites.empty());
    }
    std::vector<ErrorKind> kinds;
    for (int s = 0; s < kMaxDefects; ++s) {
        std::optional<ErrorKind> fired;
        for (std::size_t i = 0; i < applicable.size(); ++i) {
            const double u = rng.uniform();
            if (!fired && usable[i] && s < slots && u < profile.rate(applicable[i])) fired = applicable[i];
        }
        if (fired) kinds.push_back(*fired);
    }
    Rng site_rng(rng.next());
    if (gate < profile.competence_for(inst) || kinds.empty()) {
        return {gold_rationale(inst), {}};
    }
    return inject_defects(inst, kinds, site_rng);
}

}  // namespace

InjectedAttempt simulate_attempt(const TaskInstance& inst, const StudentProfile& profile) {
    Rng rng = instance_rng(profile, inst, "attempt");
    return draw_attempt(inst, profile, rng);
}

Attempt attempt(const TaskInstance& inst, const StudentProfile& profile) {
    return simulate_attempt(inst, profile).attempt;
}

Feedback self_feedback(const TaskInstance& inst, const Attempt& attempt, const StudentProfile& profile, int round) {
    Rng rng = instance_rng(profile, inst, "self_feedback", round);
    const double u_si = rng.uniform();
    const double u_right = rng.uniform();
    const double u_terminal = rng.uniform();
    Rng pick(rng.next());
    if (u_si >= profile.si_propensity) return terminal_feedback(attempt);
    const Feedback truth = scripted_feedback(inst, attempt);
    if (u_right < profile.competence_for(inst)) return truth;
    if (truth.terminal) {
        // Phantom errors on a correct attempt track how error-prone the student is.
        return u_terminal < mean_error_rate(profile, inst.kind) ? wrong_feedback(attempt, truth, pick) : truth;
    }
    return u_terminal < 0.5 ? terminal_feedback(attempt) : wrong_feedback(attempt, truth, pick);
}

Attempt self_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb, const StudentProfile& profile,
                     int round) {
    Rng rng = instance_rng(profile, inst, "self_improve", round);
    const double u_repair = rng.uniform();
    Rng fresh(rng.next());
    if (u_repair < profile.competence_for(inst)) {
        try {
            return scripted_improve(inst, prev, fb);
        } catch (const ImprovementImpossible&) {
        }
    }
    return draw_attempt(inst, profile, fresh).attempt;
}

StudentProfile train_update(const StudentProfile& profile, const std::vector<TrainingExample>& dataset,
                            const TrainConfig& config) {
    if (dataset.empty()) throw UpdateError("cannot train on an empty dataset");
    const double n = static_cast<double>(dataset.size());
    std::map<ErrorKind, double> corrective;  // sum of feedback-span weights per kind
    std::map<std::string, double> terminal_share;
    double improvements = 0;
    for (const auto& ex : dataset) {
        if (ex.is_improvement()) {
            improvements += 1;
            if (ex.reason_kind) {
                double w = 1.0;
                for (const auto& s : ex.spans) {
                    if (s.role == SpanRole::Feedback) w = s.weight;
                }
                corrective[*ex.reason_kind] += w;
            }
        } else {
            terminal_share[std::string(to_string(ex.task)) + "/" + ex.subtask] += 1;
        }
    }
    StudentProfile next = profile;
    for (auto& [kind, rate] : next.error_rate) {
        auto it = corrective.find(kind);
        if (it != corrective.end()) rate *= std::exp(-config.eta * it->second / n);
    }
    for (const auto& [key, count] : terminal_share) {
        auto it = next.competence.find(key);
        const double c = it == next.competence.end() ? profile.default_competence : it->second;
        next.competence[key] = clamp01(c + (1.0 - c) * std::min(1.0, config.eta * count / n));
    }
    next.si_propensity =
        clamp01(config.si_momentum * profile.si_propensity + (1.0 - config.si_momentum) * (improvements / n));
    next.iteration = profile.iteration + 1;
    return next;
}

Attempt remote_attempt(const TaskInstance& inst, ProviderClient& provider) {
    CompletionRequest req;
    req.prompt = fill_template(prompt_template(inst.kind, "attempt"), {{"question", inst.question}});
    const std::string text = provider.complete(req);
    if (strip_end_marker(text).empty()) throw ProviderFormatError("empty attempt completion");
    try {
        return parse_attempt(inst.kind, text);
    } catch (const ParseError& e) {
        throw ProviderFormatError(std::string("attempt completion: ") + e.what());
    }
}

Feedback remote_self_feedback(const TaskInstance& inst, const Attempt& attempt, ProviderClient& provider) {
    CompletionRequest req;
    req.prompt = fill_template(prompt_template(inst.kind, "self_feedback"),
                               {{"question", inst.question}, {"attempt", attempt.text()}});
    const std::string text = provider.complete(req);
    if (strip_end_marker(text).empty()) throw ProviderFormatError("empty feedback completion");
    Feedback fb;
    try {
        fb = parse_feedback_text(text);
    } catch (const ParseError& e) {
        throw ProviderFormatError(std::string("feedback completion: ") + e.what());
    }
    if (!fb.terminal) {
        const Step* step = attempt.find(*fb.error_step);
        if (!step || step->raw_text.find(fb.error_segment) == std::string::npos) {
            throw ProviderFormatError("self-feedback does not point into the attempt");
        }
    }
    return fb;
}

Attempt remote_self_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb, ProviderClient& provider) {
    CompletionRequest req;
    req.prompt = fill_template(prompt_template(inst.kind, "self_improve"), {{"question", inst.question},
                                                                            {"attempt", prev.text()},
                                                                            {"feedback", fb.rendered}});
    const std::string text = provider.complete(req);
    if (strip_end_marker(text).empty()) throw ProviderFormatError("empty improvement completion");
    Attempt out;
    try {
        out = parse_attempt(inst.kind, text);
    } catch (const ParseError& e) {
        throw ProviderFormatError(std::string("improvement completion: ") + e.what());
    }
    if (!out.final_answer) throw ProviderFormatError("improvement completion lacks a final response");
    return out;
}

}  // namespace tripost
