#include "debh/packet.hpp"

namespace debh {

const char* to_string(TrustState t) {
  switch (t) {
    case TrustState::Null: return "null";
    case TrustState::Untrusted: return "0";
    case TrustState::Trusted: return "1";
  }
  return "?";
}

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace

bool is_data_class(const Payload& p) {
  return std::holds_alternative<Data>(p) || std::holds_alternative<DataControl>(p);
}

const char* kind_name(const Payload& p) {
  return std::visit(Overloaded{
                        [](const Rreq&) { return "rreq"; },
                        [](const Rrep&) { return "rrep"; },
                        [](const DataControl&) { return "dcp"; },
                        [](const DataControlReply&) { return "dcp_reply"; },
                        [](const OrdinalProbe&) { return "ordinal_probe"; },
                        [](const PathAck&) { return "ack"; },
                        [](const NhnQuery&) { return "nhn_query"; },
                        [](const NhnClaim&) { return "nhn_claim"; },
                        [](const SuspectReport&) { return "suspect_report"; },
                        [](const PathBreak&) { return "path_break"; },
                        [](const BchQuery&) { return "bch_query"; },
                        [](const BchReply&) { return "bch_reply"; },
                        [](const Data&) { return "data"; },
                        [](const RouteError&) { return "route_error"; },
                        [](const Alarm&) { return "alarm"; },
                    },
                    p);
}

}  // namespace debh
