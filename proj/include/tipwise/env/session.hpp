#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tipwise/action/action.hpp"
#include "tipwise/core/types.hpp"
#include "tipwise/env/site_spec.hpp"

namespace tipwise {

struct EnvResult {
    bool ok = true;        // false: the action could not take effect (disabled element, bad tab, math error)
    bool changed = false;  // page or state changed
    std::string note;
    std::optional<std::string> value;  // calculate result
    std::string url;       // url after the step
};

void to_json(json& j, const EnvResult& r);
void from_json(const json& j, EnvResult& r);

/// One browsing session. TakeNote and Calculate never reach the concrete
/// environment; they are answered here and leave the page untouched.
class Session {
public:
    virtual ~Session() = default;

    /// Throws SessionLost.
    Observation observe(int step, std::size_t ax_tree_max_chars = 16000);
    /// Throws NavigationError, Timeout, InvalidBid, SessionLost.
    EnvResult step(const Action& a);

    const std::vector<std::string>& notes() const { return notes_; }
    void restore_notes(std::vector<std::string> notes) { notes_ = std::move(notes); }

    virtual std::string current_url() const = 0;
    /// `{url, page, state_vars, page_text}`; what programmatic checks read.
    virtual json final_state() const = 0;
    virtual std::vector<std::string> url_templates() const { return {}; }
    /// PNG bytes of the last observed page, when the backend renders one.
    virtual std::optional<std::string> screenshot() const { return std::nullopt; }

protected:
    virtual Observation do_observe(int step, std::size_t cap) = 0;
    virtual EnvResult do_step(const Action& a) = 0;

private:
    std::vector<std::string> notes_;
};

/// Failure schedule for the mock server: the n-th session call (observe or
/// step, counted across reopened sessions) fails with `code`.
struct FaultPlan {
    std::set<int> fail_calls;
    ErrorCode code = ErrorCode::SessionLost;
};

/// Server side of a mock site; state_vars survive session reopen.
class MockSite {
public:
    explicit MockSite(SiteSpec spec, FaultPlan faults = {});

    const SiteSpec& spec() const { return spec_; }
    json state() const;
    int calls() const;

private:
    friend class MockSession;
    void tick();  // counts a call and throws when the plan says so

    SiteSpec spec_;
    FaultPlan faults_;
    mutable std::mutex mu_;
    json state_;
    int calls_ = 0;
};

class MockSession final : public Session {
public:
    explicit MockSession(std::shared_ptr<MockSite> site);

    std::string current_url() const override;
    json final_state() const override;
    std::vector<std::string> url_templates() const override { return site_->spec().url_templates; }

protected:
    Observation do_observe(int step, std::size_t cap) override;
    EnvResult do_step(const Action& a) override;

private:
    struct Location {
        std::string page;
        std::map<std::string, std::string> params;
        std::string url;  // as navigated; unknown urls keep the raw text
    };
    struct Tab {
        std::vector<Location> history;
        std::size_t pos = 0;
        const Location& here() const { return history[pos]; }
    };

    Location resolve(const std::string& page, std::map<std::string, std::string> params) const;
    std::optional<Location> locate(const std::string& url) const;
    std::vector<const ElementSpec*> visible(const PageSpec& p) const;
    std::string render_tree(const Location& loc, std::vector<Mark>* marks) const;
    void navigate(Location loc);
    EnvResult result(bool ok, bool changed, std::string note) const;
    EnvResult apply_page_action(const Action& a);
    void apply_effects(const Transition& t, const std::string& typed);

    std::shared_ptr<MockSite> site_;
    std::vector<Tab> tabs_;
    std::size_t active_ = 0;
    bool lost_ = false;
};

inline constexpr std::string_view kNotFoundPage = "__not_found";

struct WatchdogConfig {
    int max_retries = 2;
};

/// Restores a session after SessionLost/Timeout: reopen, navigate back to
/// the last url, restore the notes ledger, retry the failed call.
class WatchdogSession final : public Session {
public:
    using Factory = std::function<std::unique_ptr<Session>()>;
    WatchdogSession(Factory factory, WatchdogConfig cfg = {});

    std::string current_url() const override { return inner_->current_url(); }
    json final_state() const override { return inner_->final_state(); }
    std::vector<std::string> url_templates() const override { return inner_->url_templates(); }
    std::optional<std::string> screenshot() const override { return inner_->screenshot(); }

    int recoveries() const { return recoveries_; }

protected:
    Observation do_observe(int step, std::size_t cap) override;
    EnvResult do_step(const Action& a) override;

private:
    template <typename Fn>
    auto guarded(Fn&& fn) -> decltype(fn());
    void reopen();

    Factory factory_;
    WatchdogConfig cfg_;
    std::unique_ptr<Session> inner_;
    std::string last_url_;
    int recoveries_ = 0;
};

enum class EvalMode { answer_based, programmatic };

struct EvalOutcome {
    bool success = false;
    EvalMode mode = EvalMode::answer_based;
    std::string detail;
};

std::string_view to_string(EvalMode m);
void to_json(json& j, const EvalOutcome& o);

/// The goal's reference answer wins over the site's answer_spec. Throws
/// SpecMissing when neither exists.
EvalOutcome evaluate_success(const Goal& goal, const std::optional<std::string>& answer, const json& final_state,
                             const std::optional<AnswerSpec>& site_spec = std::nullopt);

/// Answer normalization for matching: trimmed, lower-cased.
std::string normalize_answer(std::string_view s);

}  // namespace tipwise
