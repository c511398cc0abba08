#pragma once
#include <string>
#include <variant>

#include "drflex/solver.hpp"

namespace drflex {

// Line-delimited coordinator/agent protocol. One JSON object per line, keys
// in the documented order, numbers rendered with 12 significant digits.
struct MsgBroadcastLambda {
  int k = 0;
  Eigen::VectorXd lambda;
};
struct MsgLocalResult {
  int agent_id = 0;
  Eigen::VectorXd l;
  double value = 0.0;
};
struct MsgCommit {
  int agent_id = 0;
};

using WireMessage = std::variant<MsgBroadcastLambda, MsgLocalResult, MsgCommit>;

std::string encode(const MsgBroadcastLambda& m);
std::string encode(const MsgLocalResult& m);
std::string encode(const MsgCommit& m);
WireMessage decode(const std::string& line);  // throws std::invalid_argument

// Blocking line IO over a file descriptor (stream socket or socketpair).
bool write_line(int fd, const std::string& line);   // appends '\n'
bool read_line(int fd, std::string& line);          // strips '\n'; false on EOF

// Coordinator-side endpoint speaking the wire protocol to a remote agent.
class WireAgentEndpoint : public AgentEndpoint {
 public:
  WireAgentEndpoint(int fd, int agent_id) : fd_(fd), agent_id_(agent_id) {}
  LocalResult solve_local(const Eigen::VectorXd& lambda) override;
  void commit() override;

 private:
  int fd_;
  int agent_id_;
  int k_ = 0;
};

// Agent-side loop: answers BROADCAST_LAMBDA with LOCAL_RESULT and echoes
// COMMIT; returns on EOF.
void serve_agent(int fd, LocalAgent& agent);

}  // namespace drflex
