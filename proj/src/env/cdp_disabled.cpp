#include "tipwise/core/error.hpp"
#include "tipwise/env/cdp.hpp"

namespace tipwise {

bool cdp_available() { return false; }

struct CdpSession::Conn {};

CdpSession::CdpSession(CdpConfig cfg) : cfg_(std::move(cfg)) {
    throw Error(ErrorCode::SessionLost, "built without the DevTools adapter", cfg_.endpoint);
}
CdpSession::~CdpSession() = default;
std::string CdpSession::current_url() const { return {}; }
json CdpSession::final_state() const { return json::object(); }
Observation CdpSession::do_observe(int, std::size_t) { throw Error(ErrorCode::SessionLost, "no browser"); }
EnvResult CdpSession::do_step(const Action&) { throw Error(ErrorCode::SessionLost, "no browser"); }

}  // namespace tipwise
