#include "anamnesis/nlg.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "anamnesis/error.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/text.hpp"

namespace anamnesis {

namespace {

constexpr std::array<std::string_view, 8> kPromptKeys = {"AGE", "SEX", "RFE", "FINDINGS", "PREVQ", "PREVA", "NEXT", "EMOTE"};

std::string escape(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '|': out += "\\|"; break;
            case ';': out += "\\;"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string unescape(std::string_view value) {
    std::string out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] != '\\') {
            out.push_back(value[i]);
            continue;
        }
        if (++i == value.size()) {
            throw LoadError("prompt value ends with a dangling escape");
        }
        switch (value[i]) {
            case '\\': out.push_back('\\'); break;
            case '|': out.push_back('|'); break;
            case ';': out.push_back(';'); break;
            case 'n': out.push_back('\n'); break;
            default: throw LoadError(std::string("unknown escape \\") + value[i] + " in prompt");
        }
    }
    return out;
}

// Splits on `sep` where it is not escaped; pieces keep their escapes.
std::vector<std::string_view> split_unescaped(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\') {
            ++i;
        } else if (text[i] == sep) {
            parts.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    parts.push_back(text.substr(start));
    return parts;
}

std::string with_phrase(const std::string& phrase, const std::string& question) {
    return phrase.empty() ? question : surface_form(phrase) + " " + question;
}

std::string medcod_text(const NlgResources& r, const ControlCodes& codes, Rng& rng, bool emotes) {
    std::string phrase;
    if (emotes && codes.emote != EmoteCode::none) {
        phrase = sample_emote_phrase(r.lexicon, codes.emote, rng);
    }
    return with_phrase(phrase, sample_question(r.bank, codes.next_finding, rng, true));
}

}  // namespace

std::string render_prompt(const GenerationContext& context, const ControlCodes& codes) {
    std::string findings;
    for (std::size_t i = 0; i < context.prior_findings.size(); ++i) {
        if (i > 0) {
            findings.push_back(';');
        }
        findings += escape(context.prior_findings[i].first);
        findings.push_back(polarity_suffix(context.prior_findings[i].second));
    }
    std::string out;
    out += "AGE=" + escape(context.age_band);
    out += "|SEX=" + escape(context.gender);
    out += "|RFE=" + escape(context.rfe);
    out += "|FINDINGS=" + findings;
    out += "|PREVQ=" + escape(context.previous_question);
    out += "|PREVA=" + escape(context.previous_response);
    out += "|NEXT=" + escape(codes.next_finding);
    out += "|EMOTE=" + std::string(to_string(codes.emote));
    return out;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
    const auto fields = split_unescaped(prompt, '|');
    if (fields.size() != kPromptKeys.size()) {
        throw LoadError("prompt has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(kPromptKeys.size()));
    }
    std::array<std::string_view, kPromptKeys.size()> raw;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos || fields[i].substr(0, eq) != kPromptKeys[i]) {
            throw LoadError("prompt field " + std::to_string(i + 1) + " should be " + std::string(kPromptKeys[i]));
        }
        raw[i] = fields[i].substr(eq + 1);
    }
    ParsedPrompt p;
    p.context.age_band = unescape(raw[0]);
    p.context.gender = unescape(raw[1]);
    p.context.rfe = unescape(raw[2]);
    if (!raw[3].empty()) {
        for (auto item : split_unescaped(raw[3], ';')) {
            if (item.empty() || (item.back() != '+' && item.back() != '-')) {
                throw LoadError("prompt finding '" + std::string(item) + "' lacks a +/- suffix");
            }
            p.context.prior_findings.emplace_back(unescape(item.substr(0, item.size() - 1)),
                                                  item.back() == '+' ? Polarity::present : Polarity::absent);
        }
    }
    p.context.previous_question = unescape(raw[4]);
    p.context.previous_response = unescape(raw[5]);
    p.codes.next_finding = unescape(raw[6]);
    p.codes.emote = emote_code_from_string(unescape(raw[7]));
    return p;
}

std::string_view to_string(EngineVariant v) {
    switch (v) {
        case EngineVariant::expert: return "expert";
        case EngineVariant::medcod_no_emote: return "medcod_no_emote";
        case EngineVariant::medcod: return "medcod";
        case EngineVariant::external: return "external";
    }
    return "expert";
}

EngineVariant engine_variant_from_string(std::string_view text) {
    for (auto v : {EngineVariant::expert, EngineVariant::medcod_no_emote, EngineVariant::medcod,
                   EngineVariant::external}) {
        if (text == to_string(v)) {
            return v;
        }
    }
    throw LoadError("unknown engine variant '" + std::string(text) + "'");
}

bool validate_consistency(std::string_view question, std::string_view finding_id, const ParaphraseBank& bank,
                          const EmoteLexicon& lexicon, int threshold) {
    const std::string stripped = trim(question.substr(lexicon.leading_phrase_length(question)));
    if (stripped.empty()) {
        return false;
    }
    for (const auto& candidate : bank.serving_pool(finding_id)) {
        if (fuzzy_score(stripped, candidate) >= threshold) {
            return true;
        }
    }
    return false;
}

Generation generate(EngineVariant variant, const NlgResources& r, const GenerationContext& context,
                    const ControlCodes& codes, Rng& rng) {
    const Finding& finding = r.kb.finding(codes.next_finding);
    if (!r.bank.has_finding(finding.id)) {
        throw NotFoundError("paraphrase bank has no entries for finding '" + finding.id + "'");
    }
    Generation g;
    g.produced_by = variant;
    switch (variant) {
        case EngineVariant::expert:
            g.text = r.bank.expert_question(finding.id);
            return g;
        case EngineVariant::medcod_no_emote:
            g.text = medcod_text(r, codes, rng, false);
            return g;
        case EngineVariant::medcod:
            g.text = medcod_text(r, codes, rng, true);
            return g;
        case EngineVariant::external:
            break;
    }
    if (r.external == nullptr) {
        g.warnings.push_back("no external generator configured; using medcod");
    } else {
        try {
            std::string text = trim(r.external->generate(render_prompt(context, codes)));
            if (validate_consistency(text, finding.id, r.bank, r.lexicon, r.consistency_threshold)) {
                g.text = std::move(text);
                return g;
            }
            g.warnings.push_back("external question failed the consistency check; using medcod");
        } catch (const ExternalError& e) {
            g.warnings.push_back(std::string("external generator failed (") + e.what() + "); using medcod");
        }
    }
    g.produced_by = EngineVariant::medcod;
    g.text = medcod_text(r, codes, rng, true);
    return g;
}

MedconvBuild build_medconv_dataset(const std::vector<ClinicalCase>& cases, const KnowledgeBase& kb,
                                   const ParaphraseBank& bank, const EmoteLexicon& lexicon, std::uint64_t seed,
                                   const MedconvBuildOptions& options) {
    MedconvBuild build;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const ClinicalCase& c = cases[ci];
        auto problems = validate_case(kb, c, options.max_findings);
        for (const auto& a : c.findings) {
            if (kb.find_finding(a.finding_id) != nullptr && !bank.has_finding(a.finding_id)) {
                problems.push_back("no paraphrases for '" + a.finding_id + "'");
            }
        }
        if (!problems.empty()) {
            std::string line = "case " + std::to_string(c.id) + ":";
            for (const auto& p : problems) {
                line += " " + p + ";";
            }
            build.skipped.push_back(std::move(line));
            continue;
        }
        Rng rng(Rng::derive(seed, ci));
        GenerationContext ctx;
        ctx.age_band = c.age_band;
        ctx.gender = c.gender;
        ctx.rfe = kb.finding(c.rfe).name;
        for (std::size_t i = 1; i < c.findings.size(); ++i) {
            const Assertion& prev = c.findings[i - 1];
            const Finding& prev_f = kb.finding(prev.finding_id);
            ctx.prior_findings.emplace_back(prev_f.name, prev.polarity);
            ctx.previous_question = sample_question(bank, prev.finding_id, rng, true);
            ctx.previous_response = prev.polarity == Polarity::present ? "Yes" : "No";

            ControlCodes codes{c.findings[i].finding_id, EmoteCode::none};
            std::string phrase;
            if (options.with_emotes) {
                codes.emote = kEmoteCodes[rng.weighted_index(options.emote_weights)];
                if (codes.emote != EmoteCode::none) {
                    phrase = sample_emote_phrase(lexicon, codes.emote, rng);
                }
            }
            const std::string question = sample_question(bank, codes.next_finding, rng, true);
            build.instances.push_back({render_prompt(ctx, codes), with_phrase(phrase, question)});
        }
    }
    return build;
}

void write_training_instances(const std::vector<TrainingInstance>& instances, std::ostream& out) {
    for (const auto& inst : instances) {
        OrderedJson j{{"serialized_context", inst.serialized_context}, {"target_text", inst.target_text}};
        out << j.dump() << '\n';
    }
}

std::vector<TrainingInstance> read_training_instances(std::istream& in) {
    std::vector<TrainingInstance> out;
    for_each_record(in, [&](const Json& r, std::size_t line) {
        out.push_back({require_string(r, "serialized_context", line), require_string(r, "target_text", line)});
    });
    return out;
}

}  // namespace anamnesis
