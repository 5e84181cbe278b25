#include "tipwise/summarizer/belief.hpp"

#include "tipwise/core/error.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

namespace {

std::string escape_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string unescape_line(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 == s.size()) {
            out.push_back(s[i]);
            continue;
        }
        char n = s[++i];
        switch (n) {
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            case 't': out.push_back('\t'); break;
            default: out.push_back(n);
        }
    }
    return out;
}

void put_list(std::string& out, std::string_view name, const std::vector<std::string>& items) {
    out += name;
    out += ":\n";
    for (const auto& it : items) {
        out += "- ";
        out += escape_line(it);
        out += '\n';
    }
}

[[noreturn]] void malformed(const std::string& why) {
    throw Error(ErrorCode::ParseError, "malformed belief state: " + why);
}

std::string join(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) out += '\n';
        out += lines[i];
    }
    return out;
}

}  // namespace

bool BeliefState::empty() const {
    return progress_and_knowledge_check.empty() && state_analysis.empty() && active_subgoal.empty() &&
           collapsed_history.empty() && details.empty() && notes.empty();
}

std::string sanitize_section(std::string_view text) {
    std::string out;
    for (const auto& raw : text::split_lines(text)) {
        std::string line = raw;
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (line.starts_with("## ") || line == "##" || line.starts_with("```")) line.insert(0, " ");
        out += line;
        out += '\n';
    }
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string render(const BeliefState& b) {
    std::string out;
    out += kProgressHeader;
    out += '\n';
    out += sanitize_section(b.progress_and_knowledge_check);
    out += "\n\n";
    out += kStateHeader;
    out += '\n';
    out += sanitize_section(b.state_analysis);
    out += "\n\n";
    if (b.next_step_guidance) {
        out += kGuidanceHeader;
        out += '\n';
        out += sanitize_section(*b.next_step_guidance);
        out += "\n\n";
    }
    out += "```meta\n";
    out += "subgoal: " + escape_line(b.active_subgoal) + "\n";
    out += "scope: " + escape_line(b.scope) + "\n";
    out += "url: " + escape_line(b.last_url) + "\n";
    if (b.deviation_flag) {
        out += "deviation: " + escape_line(b.deviation_flag->tip_id) + "\t" + escape_line(b.deviation_flag->reason) + "\n";
    } else {
        out += "deviation: none\n";
    }
    put_list(out, "history", b.collapsed_history);
    put_list(out, "details", b.details);
    put_list(out, "notes", b.notes);
    out += "```";
    return out;
}

BeliefState parse_belief(std::string_view input) {
    auto lines = text::split_lines(input);
    auto find = [&](std::string_view what, std::size_t from) {
        for (std::size_t i = from; i < lines.size(); ++i) {
            if (lines[i] == what) return i;
        }
        return lines.size();
    };
    std::size_t progress = find(kProgressHeader, 0);
    std::size_t state = find(kStateHeader, progress);
    std::size_t meta = find("```meta", state);
    if (progress != 0) malformed("progress section must come first");
    if (state == lines.size()) malformed("missing state analysis section");
    if (meta == lines.size()) malformed("missing meta block");
    std::size_t guidance = find(kGuidanceHeader, state);
    bool has_guidance = guidance < meta;

    // each section is followed by exactly one blank separator line
    auto section = [&](std::size_t header, std::size_t next) {
        if (next < header + 2 || !lines[next - 1].empty()) malformed("section separator missing");
        return join(lines, header + 1, next - 1);
    };
    BeliefState b;
    b.progress_and_knowledge_check = section(progress, state);
    b.state_analysis = section(state, has_guidance ? guidance : meta);
    if (has_guidance) b.next_step_guidance = section(guidance, meta);

    std::vector<std::string>* list = nullptr;
    bool closed = false;
    for (std::size_t i = meta + 1; i < lines.size(); ++i) {
        const auto& l = lines[i];
        if (l == "```") {
            closed = true;
            break;
        }
        if (l.starts_with("- ") && list) {
            list->push_back(unescape_line(std::string_view(l).substr(2)));
        } else if (l.starts_with("subgoal: ")) {
            b.active_subgoal = unescape_line(std::string_view(l).substr(9));
        } else if (l.starts_with("scope: ")) {
            b.scope = unescape_line(std::string_view(l).substr(7));
        } else if (l.starts_with("url: ")) {
            b.last_url = unescape_line(std::string_view(l).substr(5));
        } else if (l.starts_with("deviation: ")) {
            auto v = std::string_view(l).substr(11);
            if (v != "none") {
                auto tab = v.find('\t');
                if (tab == std::string_view::npos) malformed("deviation needs tip and reason");
                b.deviation_flag = DeviationFlag{unescape_line(v.substr(0, tab)), unescape_line(v.substr(tab + 1))};
            }
        } else if (l == "history:") {
            list = &b.collapsed_history;
        } else if (l == "details:") {
            list = &b.details;
        } else if (l == "notes:") {
            list = &b.notes;
        } else {
            malformed("unexpected meta line '" + l + "'");
        }
    }
    if (!closed) malformed("meta block is not closed");
    b.char_len = input.size();
    return b;
}

std::vector<std::string> collapse(const std::vector<std::string>& lines, std::size_t budget) {
    std::size_t total = 0;
    std::size_t first = lines.size();
    while (first > 0 && total + lines[first - 1].size() <= budget) {
        total += lines[first - 1].size();
        --first;
    }
    return {lines.begin() + static_cast<std::ptrdiff_t>(first), lines.end()};
}

void to_json(json& j, const BeliefState& b) {
    j = json{{"kind", "belief_state"},
             {"progress_and_knowledge_check", b.progress_and_knowledge_check},
             {"state_analysis", b.state_analysis},
             {"active_subgoal", b.active_subgoal},
             {"collapsed_history", b.collapsed_history},
             {"details", b.details},
             {"notes", b.notes},
             {"scope", b.scope},
             {"last_url", b.last_url},
             {"char_len", b.char_len}};
    if (b.next_step_guidance) j["next_step_guidance"] = *b.next_step_guidance;
    if (b.deviation_flag) {
        j["deviation_flag"] = json{{"tip_id", b.deviation_flag->tip_id}, {"reason", b.deviation_flag->reason}};
    }
}

void from_json(const json& j, BeliefState& b) {
    b = BeliefState{};
    b.progress_and_knowledge_check = j.value("progress_and_knowledge_check", "");
    b.state_analysis = j.value("state_analysis", "");
    if (j.contains("next_step_guidance")) b.next_step_guidance = j["next_step_guidance"].get<std::string>();
    b.active_subgoal = j.value("active_subgoal", "");
    b.collapsed_history = j.value("collapsed_history", std::vector<std::string>{});
    b.details = j.value("details", std::vector<std::string>{});
    b.notes = j.value("notes", std::vector<std::string>{});
    b.scope = j.value("scope", "");
    b.last_url = j.value("last_url", "");
    if (j.contains("deviation_flag")) {
        b.deviation_flag = DeviationFlag{j["deviation_flag"].value("tip_id", ""), j["deviation_flag"].value("reason", "")};
    }
    b.char_len = j.value("char_len", std::size_t{0});
}

}  // namespace tipwise
