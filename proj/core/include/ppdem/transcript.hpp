#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace ppdem {

// All node-to-node traffic in a simulated run is recorded as Messages.
// Encryption is modeled as a boolean flag; an eavesdropper sees exactly the
// messages with encrypted == false.
enum class MessageKind {
  kDualInit,           // consensus dual initialization (encrypted channel)
  kPrimalBroadcast,    // consensus primal broadcast to neighbors
  kLocalUpdateUpload,  // federated: node -> server intermediate updates
  kGlobalBroadcast,    // federated: server -> nodes global parameters
  kRingRelay,          // ring summation: masked partial sum to the next node
  kSumBroadcast,       // ring summation: unmasked total to all nodes
};

std::string_view to_string(MessageKind kind);
MessageKind message_kind_from_string(std::string_view s);

// The federated server; data nodes are labeled 1..n.
constexpr int kServerNode = 0;

struct Message {
  int em_iter = -1;  // enclosing EM iteration, -1 outside an EM loop
  int round = 0;     // non-decreasing within one protocol phase
  int from = 0;
  std::vector<int> to;  // receivers; broadcasts list every receiver
  MessageKind kind = MessageKind::kPrimalBroadcast;
  bool encrypted = false;
  Eigen::VectorXd payload;

  bool involves(int node) const;
};

class Transcript {
 public:
  void record(Message m) { messages_.push_back(std::move(m)); }
  void append(const Transcript& other);
  const std::vector<Message>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }
  bool empty() const { return messages_.empty(); }

  // One JSON object per line with fields
  // (em_iter, round, from, to, kind, encrypted, payload).
  std::string to_jsonl() const;
  static Transcript from_jsonl(const std::string& text);

 private:
  std::vector<Message> messages_;
};

enum class TranscriptPolicy { kFull, kOff };

}  // namespace ppdem
