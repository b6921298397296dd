#include "qkg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkg/csv.hpp"
#include "qkg/text.hpp"

namespace qkg {

using nlohmann::json;

// ----------------------------------------------------------------- mcnemar

namespace {

// Minimal unsigned big integer: little-endian 64-bit limbs. Only the
// operations the binomial accumulation needs.
class BigUint {
public:
    BigUint() : limbs_{0} {}
    explicit BigUint(std::uint64_t v) : limbs_{v} {}

    void add(const BigUint& other) {
        limbs_.resize(std::max(limbs_.size(), other.limbs_.size()), 0);
        unsigned __int128 carry = 0;
        for (size_t i = 0; i < limbs_.size(); ++i) {
            unsigned __int128 sum = carry + limbs_[i];
            if (i < other.limbs_.size()) sum += other.limbs_[i];
            limbs_[i] = static_cast<std::uint64_t>(sum);
            carry = sum >> 64;
        }
        if (carry) limbs_.push_back(static_cast<std::uint64_t>(carry));
    }

    void mul_small(std::uint64_t m) {
        unsigned __int128 carry = 0;
        for (auto& limb : limbs_) {
            unsigned __int128 prod = static_cast<unsigned __int128>(limb) * m + carry;
            limb = static_cast<std::uint64_t>(prod);
            carry = prod >> 64;
        }
        while (carry) {
            limbs_.push_back(static_cast<std::uint64_t>(carry));
            carry >>= 64;
        }
    }

    // Exact division (the binomial recurrence guarantees divisibility).
    void div_small(std::uint64_t d) {
        unsigned __int128 rem = 0;
        for (size_t i = limbs_.size(); i-- > 0;) {
            unsigned __int128 cur = (rem << 64) | limbs_[i];
            limbs_[i] = static_cast<std::uint64_t>(cur / d);
            rem = cur % d;
        }
        trim();
    }

    // mantissa in [0.5, 1) and exponent such that value ~= mantissa * 2^exp.
    std::pair<long double, std::int64_t> frexp() const {
        size_t top = limbs_.size();
        while (top > 0 && limbs_[top - 1] == 0) --top;
        if (top == 0) return {0.0L, 0};
        long double mant = 0.0L;
        // Three limbs give 192 bits, more than long double precision.
        for (size_t i = top; i-- > 0 && i + 3 >= top;)
            mant = mant * 18446744073709551616.0L + static_cast<long double>(limbs_[i]);
        size_t skipped = top >= 3 ? top - 3 : 0;
        int e = 0;
        mant = std::frexp(mant, &e);
        return {mant, static_cast<std::int64_t>(e) + static_cast<std::int64_t>(skipped) * 64};
    }

private:
    void trim() {
        while (limbs_.size() > 1 && limbs_.back() == 0) limbs_.pop_back();
    }
    std::vector<std::uint64_t> limbs_;
};

}  // namespace

double mcnemar_exact(std::uint64_t b, std::uint64_t c) {
    const std::uint64_t n = b + c;
    if (n == 0) return 1.0;
    const std::uint64_t m = std::max(b, c);

    // C(n, m) via the multiplicative recurrence, exact at every step.
    BigUint coeff(1);
    for (std::uint64_t k = 0; k < m; ++k) {
        coeff.mul_small(n - k);
        coeff.div_small(k + 1);
    }
    // S = sum_{k=m}^{n} C(n, k)
    BigUint sum = coeff;
    for (std::uint64_t k = m; k < n; ++k) {
        coeff.mul_small(n - k);
        coeff.div_small(k + 1);
        sum.add(coeff);
    }

    auto [mant, exp] = sum.frexp();
    // p = 2 * S / 2^n
    long double p = std::ldexp(2.0L * mant, static_cast<int>(exp - static_cast<std::int64_t>(n)));
    if (p > 1.0L) p = 1.0L;
    return static_cast<double>(p);
}

// ----------------------------------------------------------------- signals

namespace {

// Shipped pattern content; conf/signal_patterns.json carries the identical
// JSON and a test pins the two together.
constexpr const char* kBuiltinPatternsJson = R"JSON({
  "version": 1,
  "kg_support": {
    "case_sensitive": [],
    "case_insensitive": [
      "\\bKG confirms\\b",
      "\\bKG explicitly links\\b",
      "\\bindication relation\\b",
      "\\bcontraindication relation\\b",
      "\\bKG shows a direct edge\\b",
      "\\bdirect edge in the KG\\b"
    ]
  },
  "kg_gap": {
    "case_sensitive": [],
    "case_insensitive": [
      "\\bKG lacks\\b",
      "\\breturned no\\b",
      "\\bempty list\\b",
      "\\bno edges? link",
      "\\bcontains no\\b",
      "\\bno clinical guideline data\\b",
      "\\bno scheduling data\\b",
      "\\bno relevant edge",
      "\\bno directly relevant edge",
      "\\bKG had no\\b"
    ]
  },
  "parametric": {
    "case_sensitive": [
      "\\bAHA\\b",
      "\\bCDC\\b",
      "\\bACIP\\b"
    ],
    "case_insensitive": [
      "\\bMedically,",
      "\\bClinically,",
      "\\bstandard of care\\b"
    ]
  },
  "context": {
    "case_sensitive": [
      "\\bAVOID\\b",
      "\\bRECOMMENDED\\b",
      "\\bCAUTION\\b"
    ],
    "case_insensitive": [
      "ConstraintItem",
      "safety judgment"
    ]
  }
})JSON";

}  // namespace

bool SignalPatterns::matches(const Family& family, const std::string& text) {
    for (const auto& re : family.patterns)
        if (std::regex_search(text, re)) return true;
    return false;
}

SignalPatterns SignalPatterns::from_json_text(const std::string& json_text,
                                              const std::string& what) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw Error("malformed signal pattern data: " + what);

    auto family = [&](const char* name) {
        if (!j.contains(name))
            throw Error(what + ": missing signal family '" + std::string(name) + "'");
        Family out;
        auto compile = [&](const std::string& pattern, std::regex::flag_type flags) {
            try {
                out.patterns.emplace_back(pattern, flags);
            } catch (const std::regex_error& e) {
                throw Error(what + ": bad pattern in family '" + std::string(name) + "': " +
                            pattern + " (" + e.what() + ")");
            }
        };
        for (const auto& p : j.at(name).value("case_sensitive", std::vector<std::string>{}))
            compile(p, std::regex::ECMAScript);
        for (const auto& p : j.at(name).value("case_insensitive", std::vector<std::string>{}))
            compile(p, std::regex::ECMAScript | std::regex::icase);
        return out;
    };

    SignalPatterns p;
    p.version_ = j.value("version", 0);
    p.kg_support_ = family("kg_support");
    p.kg_gap_ = family("kg_gap");
    p.parametric_ = family("parametric");
    p.context_ = family("context");
    return p;
}

const SignalPatterns& SignalPatterns::builtin() {
    static SignalPatterns instance = from_json_text(kBuiltinPatternsJson, "builtin patterns");
    return instance;
}

SignalPatterns SignalPatterns::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open signal pattern file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), path);
}

SignalSet SignalPatterns::detect(const std::string& evidence) const {
    SignalSet s;
    s.kg_support = matches(kg_support_, evidence);
    s.kg_gap = matches(kg_gap_, evidence);
    s.parametric = matches(parametric_, evidence);
    s.context = matches(context_, evidence);
    return s;
}

std::string to_string(EvidenceLabel label) {
    switch (label) {
        case EvidenceLabel::EvContext: return "EV_CONTEXT";
        case EvidenceLabel::EvLeakage: return "EV_LEAKAGE";
        case EvidenceLabel::EvKgGrounded: return "EV_KG_GROUNDED";
        case EvidenceLabel::EvUnclassified: return "EV_UNCLASSIFIED";
    }
    return "EV_UNCLASSIFIED";
}

EvidenceLabel label_evidence(const std::string& evidence, const SignalPatterns& patterns) {
    SignalSet s = patterns.detect(evidence);
    if (s.context) return EvidenceLabel::EvContext;
    if (s.kg_gap && s.parametric) return EvidenceLabel::EvLeakage;
    if (s.parametric && !s.kg_support && !s.kg_gap) return EvidenceLabel::EvLeakage;
    if (s.kg_support) return EvidenceLabel::EvKgGrounded;
    return EvidenceLabel::EvUnclassified;
}

// -------------------------------------------------------------- case labels

std::string to_string(CaseClass cls) {
    switch (cls) {
        case CaseClass::LikelyKgSupported: return "LIKELY_KG_SUPPORTED";
        case CaseClass::Mixed: return "MIXED";
        case CaseClass::LikelyLeakage: return "LIKELY_LEAKAGE";
        case CaseClass::Unclassified: return "UNCLASSIFIED";
    }
    return "UNCLASSIFIED";
}

std::optional<CaseClass> case_class_from_string(const std::string& s) {
    std::string u = to_lower(trim(s));
    std::string folded;
    for (char c : u)
        if (c != '_' && c != ' ' && c != '-') folded.push_back(c);
    if (folded == "likelykgsupported") return CaseClass::LikelyKgSupported;
    if (folded == "mixed") return CaseClass::Mixed;
    if (folded == "likelyleakage") return CaseClass::LikelyLeakage;
    if (folded == "unclassified") return CaseClass::Unclassified;
    return std::nullopt;
}

std::vector<const ClaimVerdict*> decisive_items(const ValidationReport& report,
                                                char initial_answer, char gold) {
    std::vector<const ClaimVerdict*> decisive;
    std::vector<const ClaimVerdict*> contradicted;
    for (const auto& verdict : report.verdicts) {
        if (verdict.status != ClaimStatus::Contradicted) continue;
        contradicted.push_back(&verdict);
        bool attacks_initial = verdict.claim.supports && verdict.claim.option_label == initial_answer;
        bool uneliminate_gold = !verdict.claim.supports && verdict.claim.option_label == gold;
        if (attacks_initial || uneliminate_gold) decisive.push_back(&verdict);
    }
    return decisive.empty() ? contradicted : decisive;
}

CaseLabel classify_case(const ValidationReport& report, char initial_answer, char gold,
                        const SignalPatterns& patterns) {
    CaseLabel out;
    out.source = LabelSource::Rules;

    std::set<EvidenceLabel> labels;
    for (const ClaimVerdict* item : decisive_items(report, initial_answer, gold))
        labels.insert(label_evidence(item->evidence, patterns));

    bool supp = labels.count(EvidenceLabel::EvContext) || labels.count(EvidenceLabel::EvKgGrounded);
    bool leak = labels.count(EvidenceLabel::EvLeakage);
    if (supp && leak)
        out.cls = CaseClass::Mixed;
    else if (supp)
        out.cls = CaseClass::LikelyKgSupported;
    else if (leak)
        out.cls = CaseClass::LikelyLeakage;
    else
        out.cls = CaseClass::Unclassified;
    out.ctx_driven = labels.count(EvidenceLabel::EvContext) > 0;

    std::string parts;
    for (EvidenceLabel l : labels) {
        if (!parts.empty()) parts += ", ";
        parts += to_string(l);
    }
    out.justification = "decisive evidence labels: " + (parts.empty() ? "none" : parts);
    return out;
}

// --------------------------------------------------------------- adjustment

double adjusted_accuracy(std::uint64_t final_correct, std::uint64_t n,
                         std::uint64_t n_leak_w2c, std::uint64_t n_ctx_c2w) {
    if (n_leak_w2c > final_correct)
        throw Error("leakage count exceeds final-correct count");
    if (n_leak_w2c + n_ctx_c2w >= n)
        throw Error("adjusted denominator is not positive");
    return static_cast<double>(final_correct - n_leak_w2c) /
           static_cast<double>(n - n_leak_w2c - n_ctx_c2w);
}

AdjustedPairedResult leakage_adjusted_paired_test(const std::vector<PairedOutcome>& pairs,
                                                  const std::vector<CaseExclusion>& labels_a,
                                                  const std::vector<CaseExclusion>& labels_b) {
    std::set<std::string> excluded;
    auto collect = [&](const std::vector<CaseExclusion>& labels) {
        for (const auto& entry : labels) {
            bool leak_w2c = entry.direction == FlipDirection::WrongToCorrect &&
                            entry.label.cls == CaseClass::LikelyLeakage;
            bool ctx_c2w = entry.direction == FlipDirection::CorrectToWrong &&
                           entry.label.cls == CaseClass::LikelyKgSupported &&
                           entry.label.ctx_driven;
            if (leak_w2c || ctx_c2w) excluded.insert(entry.sample_id);
        }
    };
    collect(labels_a);
    collect(labels_b);

    AdjustedPairedResult result;
    for (const auto& pair : pairs) {
        if (excluded.count(pair.sample_id)) {
            ++result.excluded;
            continue;
        }
        ++result.n;
        if (pair.correct_a && !pair.correct_b) ++result.b;
        if (!pair.correct_a && pair.correct_b) ++result.c;
    }
    result.p = mcnemar_exact(result.b, result.c);
    return result;
}

// ------------------------------------------------------------ per-case CSV

std::string to_string(FlipDirection direction) {
    return direction == FlipDirection::WrongToCorrect ? "W->C" : "C->W";
}

std::optional<FlipDirection> flip_direction_from_string(const std::string& s) {
    std::string t = to_lower(trim(s));
    if (t == "w->c" || t == "w2c" || t == "wrong_to_correct") return FlipDirection::WrongToCorrect;
    if (t == "c->w" || t == "c2w" || t == "correct_to_wrong") return FlipDirection::CorrectToWrong;
    return std::nullopt;
}

CaseClass final_case_class(const LeakageCaseRow& row) {
    if (row.label_source == LabelSource::Llm && row.llm_label) return *row.llm_label;
    return row.regex_label;
}

LeakageCaseRow build_leakage_case(const std::string& sample_id, FlipDirection direction,
                                  const ValidationReport& report, char initial_answer, char gold,
                                  const SignalPatterns& patterns) {
    LeakageCaseRow row;
    row.sample_id = sample_id;
    row.direction = direction;
    for (const ClaimVerdict* item : decisive_items(report, initial_answer, gold))
        row.decisive_evidence.push_back(item->evidence);
    CaseLabel label = classify_case(report, initial_answer, gold, patterns);
    row.regex_label = label.cls;
    row.ctx_driven = label.ctx_driven;
    row.label_source = LabelSource::Rules;
    row.justification = label.justification;
    return row;
}

void relabel_unclassified(std::vector<LeakageCaseRow>& cases, Gateway& gateway,
                          const std::string& role) {
    for (auto& row : cases) {
        if (row.regex_label != CaseClass::Unclassified) continue;
        json evidence = json::array();
        for (const auto& e : row.decisive_evidence) evidence.push_back(e);
        json payload = {{"direction", to_string(row.direction)},
                        {"decisive_evidence", evidence},
                        {"labels", {"LIKELY_KG_SUPPORTED", "MIXED", "LIKELY_LEAKAGE", "UNCLASSIFIED"}}};
        std::vector<Message> messages = {
            {"system",
             "You audit answer revisions in a knowledge-graph validation pipeline. "
             "Given the decisive CONTRADICTED evidence strings for one case, decide whether the "
             "revision was driven by retrieved graph evidence (LIKELY_KG_SUPPORTED), by the "
             "validator's own medical knowledge (LIKELY_LEAKAGE), by both (MIXED), or is "
             "undecidable (UNCLASSIFIED). Reply with one JSON object: "
             "{\"label\": \"...\", \"justification\": \"one sentence\"}."},
            {"user", payload.dump()}};
        try {
            std::string raw = gateway.complete(role, messages);
            json parsed = json::parse(extract_first_json_object(raw));
            auto cls = case_class_from_string(parsed.at("label").get<std::string>());
            if (!cls) throw ValidationError("unknown case label: " + parsed.at("label").dump());
            row.llm_label = *cls;
            row.label_source = LabelSource::Llm;
            row.justification = parsed.value("justification", "");
        } catch (const Error& e) {
            // Stays Unclassified, flagged for the audit trail.
            row.justification = std::string("llm relabel failed: ") + e.what();
        }
    }
}

void save_case_rows(const std::vector<LeakageCaseRow>& rows, const std::string& csv_path) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw Error("cannot write case csv: " + csv_path);
    out << "sample_id,direction,regex_label,llm_label,label_source,ctx_driven,justification\n";
    for (const auto& row : rows) {
        std::vector<std::string> fields = {
            row.sample_id,
            to_string(row.direction),
            to_string(row.regex_label),
            row.llm_label ? to_string(*row.llm_label) : "",
            row.label_source == LabelSource::Llm ? "llm" : "rules",
            row.ctx_driven ? "true" : "false",
            row.justification,
        };
        out << csv_join(fields) << "\n";
    }
}

std::vector<LeakageCaseRow> load_case_rows(const std::string& csv_path) {
    auto rows = read_csv(csv_path);
    if (rows.empty()) throw Error("empty case csv: " + csv_path);
    std::vector<LeakageCaseRow> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& fields = rows[i];
        if (fields.size() < 7)
            throw Error("case csv row " + std::to_string(i + 1) + ": expected 7 fields");
        LeakageCaseRow row;
        row.sample_id = fields[0];
        auto direction = flip_direction_from_string(fields[1]);
        if (!direction)
            throw Error("case csv row " + std::to_string(i + 1) + ": bad direction '" + fields[1] + "'");
        row.direction = *direction;
        auto regex_label = case_class_from_string(fields[2]);
        if (!regex_label)
            throw Error("case csv row " + std::to_string(i + 1) + ": bad regex_label '" + fields[2] + "'");
        row.regex_label = *regex_label;
        if (!fields[3].empty()) {
            auto llm_label = case_class_from_string(fields[3]);
            if (!llm_label)
                throw Error("case csv row " + std::to_string(i + 1) + ": bad llm_label '" + fields[3] + "'");
            row.llm_label = *llm_label;
        }
        row.label_source = fields[4] == "llm" ? LabelSource::Llm : LabelSource::Rules;
        row.ctx_driven = fields[5] == "true";
        row.justification = fields[6];
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace qkg
