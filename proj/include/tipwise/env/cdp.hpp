#pragma once

#include <memory>
#include <string>

#include "tipwise/env/session.hpp"

namespace tipwise {

struct CdpConfig {
    std::string endpoint = "http://127.0.0.1:9222";  // browser remote-debugging address
    int navigation_timeout_ms = 30000;
    int command_timeout_ms = 10000;
    std::vector<std::string> url_templates;
};

/// Real-browser session over the Chrome DevTools wire protocol. Bids are
/// backend DOM node ids of interactive accessibility nodes. Throws
/// SessionLost when the browser cannot be reached.
class CdpSession final : public Session {
public:
    explicit CdpSession(CdpConfig cfg);
    ~CdpSession() override;

    std::string current_url() const override;
    json final_state() const override;
    std::vector<std::string> url_templates() const override { return cfg_.url_templates; }
    std::optional<std::string> screenshot() const override { return screenshot_; }

protected:
    Observation do_observe(int step, std::size_t cap) override;
    EnvResult do_step(const Action& a) override;

private:
    struct Conn;

    json call(const std::string& method, json params = json::object(), int timeout_ms = 0);
    void attach(const std::string& target_id);
    void wait_loaded();
    std::pair<double, double> center_of(const std::string& bid);
    std::string render(std::vector<Mark>* marks);

    CdpConfig cfg_;
    std::unique_ptr<Conn> conn_;
    std::vector<std::string> targets_;
    std::size_t active_ = 0;
    std::optional<std::string> screenshot_;
    std::string last_tree_;
};

/// Whether the library was built with the DevTools adapter.
bool cdp_available();

}  // namespace tipwise
