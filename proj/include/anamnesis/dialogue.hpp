#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "anamnesis/classifier.hpp"
#include "anamnesis/emote.hpp"
#include "anamnesis/jsonl.hpp"
#include "anamnesis/kb.hpp"
#include "anamnesis/nlg.hpp"
#include "anamnesis/paraphrase.hpp"
#include "anamnesis/rng.hpp"

namespace anamnesis {

enum class ParsedAnswer { present, absent, unknown };

std::string_view to_string(ParsedAnswer a);

// Lowercased, punctuation-stripped text matched against small synonym
// tables, either whole or as a leading run of words.
ParsedAnswer parse_answer(std::string_view raw);

enum class EmoteMode { classifier, none };
std::string_view to_string(EmoteMode m);
EmoteMode emote_mode_from_string(std::string_view text);

struct EngineConfig {
    EngineVariant variant = EngineVariant::medcod;
    int max_questions = 10;
    double margin_threshold = 20.0;
    std::uint64_t seed = 0;
    EmoteMode emote_mode = EmoteMode::classifier;
    double temperature = kDefaultTemperature;

    void validate() const;  // throws ContractError
    bool operator==(const EngineConfig&) const = default;
};

enum class Termination { margin, max_questions, exhausted };
std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view text);

enum class SessionStatus { active, concluded };

struct Turn {
    std::string question;
    ControlCodes codes;
    EngineVariant produced_by = EngineVariant::expert;
    std::vector<std::string> clarifications;  // unparseable answers to this question
    std::optional<std::string> answer;         // raw text of the parsed answer
    std::optional<Polarity> parsed;

    bool operator==(const Turn&) const = default;
};

struct Conclusion {
    Termination reason = Termination::exhausted;
    double margin = 0.0;
    int question_count = 0;

    bool operator==(const Conclusion&) const = default;
};

struct ConversationState {
    std::string session_id;
    std::string age_band;
    std::string gender;
    std::string rfe;       // finding id
    std::string rfe_text;  // as typed
    EngineConfig config;
    std::vector<Assertion> assertions;  // rfe first
    std::vector<Turn> turns;
    SessionStatus status = SessionStatus::active;
    int question_count = 0;
    std::optional<Conclusion> conclusion;

    bool operator==(const ConversationState&) const = default;
};

struct StartRequest {
    std::string age_band;
    std::string gender;
    std::string rfe_text;
    std::optional<EngineVariant> variant;
    std::optional<std::uint64_t> seed;
};

enum class ReplyKind { question, clarification, conclusion };
std::string_view to_string(ReplyKind k);

struct Reply {
    ReplyKind kind = ReplyKind::question;
    std::string text;
    std::optional<ControlCodes> codes;           // question replies
    std::optional<Conclusion> conclusion;        // conclusion replies
    std::optional<DifferentialDiagnosis> differential;  // conclusion replies
    int question_count = 0;
    std::vector<std::string> warnings;
};

struct StartResult {
    std::string session_id;
    Reply reply;
};

// Append-only JSONL event log. Each event is one line carrying a sequence
// number; appends from different threads are serialized.
class Journal {
public:
    explicit Journal(std::ostream& out, std::uint64_t next_seq = 1) : out_(out), next_seq_(next_seq) {}
    void append(OrderedJson event);
    std::uint64_t next_seq() const;
    void resume_after(std::uint64_t last_seq);

private:
    std::ostream& out_;
    mutable std::mutex mutex_;
    std::uint64_t next_seq_;
};

struct ReplayResult {
    std::map<std::string, ConversationState> sessions;
    std::uint64_t last_seq = 0;
};

// Applies journal events without touching the KB or generators. Throws
// ReplayError naming the byte offset of the first bad record; a final line
// without its newline counts as truncated.
ReplayResult replay_journal(std::istream& in);

struct EngineResources {
    const KnowledgeBase& kb;
    const ParaphraseBank& bank;
    const EmoteLexicon& lexicon;
    const EmotionClassifier* classifier = nullptr;
    ExternalGenerator* external = nullptr;
    int consistency_threshold = kDefaultConsistencyThreshold;
};

// Conversation manager. Sessions run concurrently; operations on one session
// are serialized. Readers get whole snapshots.
class DialogueEngine {
public:
    DialogueEngine(EngineResources resources, EngineConfig defaults, Journal* journal = nullptr);

    // Throws NotFoundError (with suggestions) when the RFE does not resolve.
    StartResult start(const StartRequest& request);
    // Throws SessionError for unknown or concluded sessions.
    Reply answer(const std::string& session_id, std::string_view raw_text);

    ConversationState state(const std::string& session_id) const;
    DifferentialDiagnosis differential(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;
    bool has_session(const std::string& session_id) const;
    std::size_t session_count() const;

    // Rebuilds sessions from a journal by replaying it, then re-running every
    // session's answers through this engine so generation streams resume at
    // the right place. Throws ReplayError if the re-run disagrees with the log.
    void recover(std::istream& journal);

    const EngineConfig& defaults() const { return defaults_; }
    const EngineResources& resources() const { return resources_; }
    std::vector<std::string> warnings;

private:
    struct Session {
        std::mutex mutex;
        ConversationState state;
        Rng rng{0};
    };

    std::shared_ptr<Session> find(const std::string& session_id) const;
    std::string allocate_id();
    StartResult open(const std::string& id, const StartRequest& request, const std::string& rfe_id,
                     const EngineConfig& config, bool journal);
    Reply answer_locked(Session& s, std::string_view raw_text, bool journal);
    Reply step(Session& s, bool journal, std::vector<std::string> warnings);
    DifferentialDiagnosis differential_of(const ConversationState& st) const;
    void log(bool journal, OrderedJson event);

    EngineResources resources_;
    EngineConfig defaults_;
    Journal* journal_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
};

// JSON views shared by the HTTP API and the CLI.
OrderedJson differential_to_json(const KnowledgeBase& kb, const DifferentialDiagnosis& dd);
OrderedJson reply_to_json(const KnowledgeBase& kb, const Reply& reply);
OrderedJson state_to_json(const ConversationState& st);

}  // namespace anamnesis
