#include "ppdem/transcript.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "ppdem/errors.hpp"

namespace ppdem {

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kDualInit: return "dual_init";
    case MessageKind::kPrimalBroadcast: return "primal_broadcast";
    case MessageKind::kLocalUpdateUpload: return "local_update_upload";
    case MessageKind::kGlobalBroadcast: return "global_broadcast";
    case MessageKind::kRingRelay: return "ring_relay";
    case MessageKind::kSumBroadcast: return "sum_broadcast";
  }
  return "unknown";
}

MessageKind message_kind_from_string(std::string_view s) {
  if (s == "dual_init") return MessageKind::kDualInit;
  if (s == "primal_broadcast") return MessageKind::kPrimalBroadcast;
  if (s == "local_update_upload") return MessageKind::kLocalUpdateUpload;
  if (s == "global_broadcast") return MessageKind::kGlobalBroadcast;
  if (s == "ring_relay") return MessageKind::kRingRelay;
  if (s == "sum_broadcast") return MessageKind::kSumBroadcast;
  throw InvalidArgument("unknown message kind: " + std::string(s));
}

bool Message::involves(int node) const {
  if (from == node) return true;
  return std::find(to.begin(), to.end(), node) != to.end();
}

void Transcript::append(const Transcript& other) {
  messages_.insert(messages_.end(), other.messages_.begin(), other.messages_.end());
}

std::string Transcript::to_jsonl() const {
  std::ostringstream out;
  for (const Message& m : messages_) {
    nlohmann::json line;
    line["em_iter"] = m.em_iter;
    line["round"] = m.round;
    line["from"] = m.from;
    line["to"] = m.to;
    line["kind"] = std::string(to_string(m.kind));
    line["encrypted"] = m.encrypted;
    std::vector<double> payload(m.payload.data(), m.payload.data() + m.payload.size());
    line["payload"] = payload;
    out << line.dump() << '\n';
  }
  return out.str();
}

Transcript Transcript::from_jsonl(const std::string& text) {
  Transcript t;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("bad transcript line: ") + e.what(), line_no, 1);
    }
    Message m;
    m.em_iter = j.at("em_iter").get<int>();
    m.round = j.at("round").get<int>();
    m.from = j.at("from").get<int>();
    m.to = j.at("to").get<std::vector<int>>();
    m.kind = message_kind_from_string(j.at("kind").get<std::string>());
    m.encrypted = j.at("encrypted").get<bool>();
    const auto payload = j.at("payload").get<std::vector<double>>();
    m.payload = Eigen::Map<const Eigen::VectorXd>(payload.data(), payload.size());
    t.record(std::move(m));
  }
  return t;
}

}  // namespace ppdem
