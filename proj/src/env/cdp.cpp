#include "tipwise/env/cdp.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "tipwise/core/error.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;

bool cdp_available() { return true; }

struct CdpSession::Conn {
    asio::io_context ioc;
    websocket::stream<beast::tcp_stream> ws{ioc};
    std::mutex mu;  // one protocol exchange at a time per target
    int next_id = 1;
};

namespace {

struct WsUrl {
    std::string host;
    std::string port;
    std::string path;
};

WsUrl split_ws(const std::string& url) {
    auto rest = url.substr(url.find("://") + 3);
    auto slash = rest.find('/');
    auto hostport = rest.substr(0, slash);
    WsUrl out;
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    auto colon = hostport.rfind(':');
    out.host = hostport.substr(0, colon);
    out.port = colon == std::string::npos ? "80" : hostport.substr(colon + 1);
    return out;
}

json get_json(const std::string& endpoint, const std::string& path, int timeout_ms) {
    httplib::Client cli(endpoint);
    cli.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
    cli.set_read_timeout(std::chrono::milliseconds(timeout_ms));
    auto res = cli.Get(path);
    if (!res) throw Error(ErrorCode::SessionLost, "browser endpoint unreachable", endpoint + path);
    if (res->status != 200) {
        throw Error(ErrorCode::SessionLost, "browser endpoint returned " + std::to_string(res->status), res->body);
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Protocol, "malformed target list", e.what());
    }
}

std::string base64_decode(const std::string& in) {
    std::string out(3 * in.size() / 4 + 3, '\0');
    int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(in.data()), static_cast<int>(in.size()));
    if (n < 0) throw Error(ErrorCode::Protocol, "screenshot is not base64");
    std::size_t pad = 0;
    if (!in.empty() && in.back() == '=') ++pad;
    if (in.size() > 1 && in[in.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

const std::set<std::string>& interactive_roles() {
    static const std::set<std::string> roles = {
        "button",   "link",     "textbox",  "searchbox", "combobox", "checkbox", "radio",  "menuitem",
        "tab",      "option",   "switch",   "slider",    "spinbutton", "gridcell", "listbox", "treeitem",
    };
    return roles;
}

std::string ax_value(const json& node, const char* key) {
    if (!node.contains(key) || !node[key].is_object()) return {};
    const auto& v = node[key];
    if (!v.contains("value")) return {};
    return v["value"].is_string() ? v["value"].get<std::string>() : v["value"].dump();
}

struct KeySpec {
    std::string key;
    std::string code;
    int modifiers = 0;
};

KeySpec parse_combo(const std::string& combo) {
    KeySpec k;
    std::size_t start = 0;
    while (true) {
        auto plus = combo.find('+', start);
        auto part = combo.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
        if (plus == std::string::npos || part.empty()) {
            k.key = part.empty() ? "+" : part;
            break;
        }
        if (part == "Alt") k.modifiers |= 1;
        else if (part == "Control" || part == "Ctrl") k.modifiers |= 2;
        else if (part == "Meta") k.modifiers |= 4;
        else if (part == "Shift") k.modifiers |= 8;
        start = plus + 1;
    }
    k.code = k.key.size() == 1 ? std::string("Key") + static_cast<char>(std::toupper(k.key[0])) : k.key;
    return k;
}

}  // namespace

CdpSession::CdpSession(CdpConfig cfg) : cfg_(std::move(cfg)) {
    auto list = get_json(cfg_.endpoint, "/json/list", cfg_.command_timeout_ms);
    for (const auto& t : list) {
        if (t.value("type", "") == "page") targets_.push_back(t.value("id", ""));
    }
    if (targets_.empty()) {
        auto created = get_json(cfg_.endpoint, "/json/new?about:blank", cfg_.command_timeout_ms);
        targets_.push_back(created.value("id", ""));
    }
    attach(targets_.front());
}

CdpSession::~CdpSession() {
    if (conn_) {
        beast::error_code ec;
        conn_->ws.close(websocket::close_code::normal, ec);
    }
}

void CdpSession::attach(const std::string& target_id) {
    auto list = get_json(cfg_.endpoint, "/json/list", cfg_.command_timeout_ms);
    std::string ws_url;
    for (const auto& t : list) {
        if (t.value("id", "") == target_id) ws_url = t.value("webSocketDebuggerUrl", "");
    }
    if (ws_url.empty()) throw Error(ErrorCode::SessionLost, "browser target disappeared", target_id);
    auto conn = std::make_unique<Conn>();
    auto u = split_ws(ws_url);
    try {
        asio::ip::tcp::resolver resolver(conn->ioc);
        beast::get_lowest_layer(conn->ws).expires_after(std::chrono::milliseconds(cfg_.command_timeout_ms));
        beast::get_lowest_layer(conn->ws).connect(resolver.resolve(u.host, u.port));
        conn->ws.handshake(u.host + ":" + u.port, u.path);
        conn->ws.read_message_max(64u << 20);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::SessionLost, "cannot open DevTools websocket", e.what());
    }
    conn_ = std::move(conn);
    call("Page.enable");
    call("Accessibility.enable");
}

json CdpSession::call(const std::string& method, json params, int timeout_ms) {
    if (!conn_) throw Error(ErrorCode::SessionLost, "no DevTools connection");
    if (timeout_ms <= 0) timeout_ms = cfg_.command_timeout_ms;
    std::lock_guard lk(conn_->mu);
    const int id = conn_->next_id++;
    auto& ws = conn_->ws;
    auto& ioc = conn_->ioc;
    beast::error_code ec;
    ws.write(asio::buffer(json{{"id", id}, {"method", method}, {"params", std::move(params)}}.dump()), ec);
    if (ec) throw Error(ErrorCode::SessionLost, "DevTools write failed", ec.message());

    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        beast::flat_buffer buf;
        bool done = false;
        ws.async_read(buf, [&](beast::error_code e, std::size_t) {
            ec = e;
            done = true;
        });
        ioc.restart();
        ioc.run_until(deadline);
        if (!done) {
            beast::get_lowest_layer(ws).cancel();
            ioc.restart();
            ioc.run();
            throw Error(ErrorCode::Timeout, "DevTools command timed out", method);
        }
        if (ec) throw Error(ErrorCode::SessionLost, "DevTools connection dropped", ec.message());
        json msg;
        try {
            msg = json::parse(beast::buffers_to_string(buf.data()));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Protocol, "malformed DevTools message", e.what());
        }
        if (!msg.contains("id") || msg["id"] != id) continue;  // events and stale replies
        if (msg.contains("error")) {
            throw Error(ErrorCode::Protocol, method + " failed", msg["error"].dump());
        }
        return msg.value("result", json::object());
    }
}

void CdpSession::wait_loaded() {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg_.navigation_timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        auto r = call("Runtime.evaluate", {{"expression", "document.readyState"}, {"returnByValue", true}});
        if (r.contains("result") && r["result"].value("value", "") == "complete") return;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    throw Error(ErrorCode::Timeout, "page load timed out", current_url());
}

std::string CdpSession::current_url() const {
    auto* self = const_cast<CdpSession*>(this);
    auto r = self->call("Runtime.evaluate", {{"expression", "location.href"}, {"returnByValue", true}});
    return r.contains("result") ? r["result"].value("value", "") : std::string();
}

std::string CdpSession::render(std::vector<Mark>* marks) {
    auto tree = call("Accessibility.getFullAXTree");
    std::map<std::string, const json*> by_id;
    for (const auto& n : tree["nodes"]) by_id[n.value("nodeId", "")] = &n;
    std::string title;
    std::string out;
    std::function<void(const json&, int)> walk = [&](const json& n, int depth) {
        bool ignored = n.value("ignored", false);
        auto role = ax_value(n, "role");
        auto name = ax_value(n, "name");
        int child_depth = depth;
        if (!ignored && role == "RootWebArea") {
            title = name;
        } else if (!ignored && !role.empty() && role != "none" && role != "generic") {
            std::string indent(static_cast<std::size_t>(depth) + 1, '\t');
            if (interactive_roles().count(role) && n.contains("backendDOMNodeId")) {
                auto bid = std::to_string(n["backendDOMNodeId"].get<long long>());
                out += "\n" + indent + "[" + bid + "] " + role + " '" + name + "'";
                bool disabled = false;
                for (const auto& p : n.value("properties", json::array())) {
                    if (p.value("name", "") == "disabled" && p["value"].value("value", false)) disabled = true;
                }
                if (disabled) out += " disabled";
                if (marks) marks->push_back(Mark{bid, role, name, !disabled});
                child_depth = depth + 1;
            } else if (!name.empty()) {
                out += "\n" + indent + role + " '" + name + "'";
                child_depth = depth + 1;
            }
        }
        for (const auto& c : n.value("childIds", json::array())) {
            auto it = by_id.find(c.get<std::string>());
            if (it != by_id.end()) walk(*it->second, child_depth);
        }
    };
    if (!tree["nodes"].empty()) walk(tree["nodes"][0], 0);
    return "RootWebArea '" + title + "'" + out;
}

Observation CdpSession::do_observe(int step, std::size_t cap) {
    std::vector<Mark> marks;
    last_tree_ = render(&marks);
    auto shot = call("Page.captureScreenshot", {{"format", "png"}});
    screenshot_ = base64_decode(shot.value("data", ""));
    return make_observation(step, current_url(), last_tree_, std::move(marks), cap);
}

std::pair<double, double> CdpSession::center_of(const std::string& bid) {
    long long node = 0;
    try {
        node = std::stoll(bid);
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidBid, "bid is not a DOM node id", bid);
    }
    json box;
    try {
        call("DOM.scrollIntoViewIfNeeded", {{"backendNodeId", node}});
        box = call("DOM.getBoxModel", {{"backendNodeId", node}});
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Protocol) throw Error(ErrorCode::InvalidBid, "element not found", bid);
        throw;
    }
    const auto& q = box["model"]["content"];
    double x = (q[0].get<double>() + q[2].get<double>() + q[4].get<double>() + q[6].get<double>()) / 4;
    double y = (q[1].get<double>() + q[3].get<double>() + q[5].get<double>() + q[7].get<double>()) / 4;
    return {x, y};
}

EnvResult CdpSession::do_step(const Action& a) {
    const auto before = current_url();
    auto mouse = [&](const char* type, double x, double y, int clicks) {
        call("Input.dispatchMouseEvent",
             {{"type", type}, {"x", x}, {"y", y}, {"button", "left"}, {"clickCount", clicks}});
    };
    auto key = [&](const KeySpec& k) {
        for (const char* type : {"keyDown", "keyUp"}) {
            call("Input.dispatchKeyEvent", {{"type", type}, {"key", k.key}, {"code", k.code}, {"modifiers", k.modifiers}});
        }
    };
    std::string note;
    std::visit(
        [&](const auto& act) {
            using T = std::decay_t<decltype(act)>;
            if constexpr (std::is_same_v<T, Click>) {
                auto [x, y] = center_of(act.bid);
                mouse("mouseMoved", x, y, 0);
                mouse("mousePressed", x, y, 1);
                mouse("mouseReleased", x, y, 1);
            } else if constexpr (std::is_same_v<T, Hover>) {
                auto [x, y] = center_of(act.bid);
                mouse("mouseMoved", x, y, 0);
            } else if constexpr (std::is_same_v<T, Type>) {
                call("DOM.focus", {{"backendNodeId", std::stoll(act.bid)}});
                call("Runtime.evaluate", {{"expression", "document.activeElement && document.activeElement.select "
                                                         "&& document.activeElement.select()"}});
                call("Input.insertText", {{"text", act.text}});
                if (act.press_enter) key(parse_combo("Enter"));
            } else if constexpr (std::is_same_v<T, Press>) {
                key(parse_combo(act.key_combo));
            } else if constexpr (std::is_same_v<T, Scroll>) {
                double dx = 0;
                double dy = 0;
                double px = 600.0 * act.amount;
                if (act.direction == ScrollDirection::down) dy = px;
                if (act.direction == ScrollDirection::up) dy = -px;
                if (act.direction == ScrollDirection::right) dx = px;
                if (act.direction == ScrollDirection::left) dx = -px;
                call("Input.dispatchMouseEvent", {{"type", "mouseWheel"}, {"x", 400}, {"y", 300}, {"deltaX", dx}, {"deltaY", dy}});
            } else if constexpr (std::is_same_v<T, GoTo>) {
                auto r = call("Page.navigate", {{"url", act.url}}, cfg_.navigation_timeout_ms);
                auto err = r.value("errorText", std::string());
                if (!err.empty()) {
                    throw Error(ErrorCode::NavigationError, "navigation failed", err);
                }
                wait_loaded();
            } else if constexpr (std::is_same_v<T, GoBack> || std::is_same_v<T, GoForward>) {
                auto h = call("Page.getNavigationHistory");
                int idx = h.value("currentIndex", 0) + (std::is_same_v<T, GoBack> ? -1 : 1);
                if (idx < 0 || idx >= static_cast<int>(h["entries"].size())) {
                    note = "no page in that direction of history";
                    return;
                }
                call("Page.navigateToHistoryEntry", {{"entryId", h["entries"][idx]["id"]}});
                wait_loaded();
            } else if constexpr (std::is_same_v<T, NewTab>) {
                auto r = call("Target.createTarget", {{"url", "about:blank"}});
                targets_.push_back(r.value("targetId", ""));
                active_ = targets_.size() - 1;
                attach(targets_[active_]);
            } else if constexpr (std::is_same_v<T, TabFocus>) {
                if (act.index < 0 || static_cast<std::size_t>(act.index) >= targets_.size()) {
                    note = "no tab " + std::to_string(act.index);
                    return;
                }
                active_ = static_cast<std::size_t>(act.index);
                call("Target.activateTarget", {{"targetId", targets_[active_]}});
                attach(targets_[active_]);
            } else if constexpr (std::is_same_v<T, TabClose>) {
                if (targets_.size() == 1) {
                    note = "cannot close the last tab";
                    return;
                }
                call("Target.closeTarget", {{"targetId", targets_[active_]}});
                targets_.erase(targets_.begin() + static_cast<std::ptrdiff_t>(active_));
                active_ = std::min(active_, targets_.size() - 1);
                attach(targets_[active_]);
            }
        },
        a);
    EnvResult r;
    r.url = current_url();
    r.ok = note.empty() || note.rfind("no page", 0) == 0;
    r.note = note;
    std::vector<Mark> ignore;
    auto tree = render(&ignore);
    r.changed = r.url != before || tree != last_tree_;
    return r;
}

json CdpSession::final_state() const {
    auto* self = const_cast<CdpSession*>(this);
    return json{{"url", current_url()}, {"page", ""}, {"state_vars", json::object()}, {"page_text", self->render(nullptr)}};
}

}  // namespace tipwise
