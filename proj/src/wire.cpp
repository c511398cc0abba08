#include "drflex/wire.hpp"

#include <unistd.h>

#include <cstdio>
#include <nlohmann/json.hpp>

namespace drflex {

namespace {

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_array(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt12(v[i]);
  }
  out += "]";
  return out;
}

Eigen::VectorXd as_vector(const nlohmann::json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

}  // namespace

std::string encode(const MsgBroadcastLambda& m) {
  return "{\"type\":\"BROADCAST_LAMBDA\",\"k\":" + std::to_string(m.k) +
         ",\"lambda\":" + fmt_array(m.lambda) + "}";
}

std::string encode(const MsgLocalResult& m) {
  return "{\"type\":\"LOCAL_RESULT\",\"agent_id\":" + std::to_string(m.agent_id) +
         ",\"l\":" + fmt_array(m.l) + ",\"value\":" + fmt12(m.value) + "}";
}

std::string encode(const MsgCommit& m) {
  return "{\"type\":\"COMMIT\",\"agent_id\":" + std::to_string(m.agent_id) + "}";
}

WireMessage decode(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("wire: malformed message: ") + e.what());
  }
  const std::string type = j.value("type", "");
  if (type == "BROADCAST_LAMBDA") return MsgBroadcastLambda{j.at("k").get<int>(), as_vector(j.at("lambda"))};
  if (type == "LOCAL_RESULT")
    return MsgLocalResult{j.at("agent_id").get<int>(), as_vector(j.at("l")),
                          j.at("value").get<double>()};
  if (type == "COMMIT") return MsgCommit{j.at("agent_id").get<int>()};
  throw std::invalid_argument("wire: unknown message type '" + type + "'");
}

bool write_line(int fd, const std::string& line) {
  std::string buf = line;
  buf += '\n';
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t n = ::write(fd, buf.data() + off, buf.size() - off);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

bool read_line(int fd, std::string& line) {
  line.clear();
  char c;
  for (;;) {
    const ssize_t n = ::read(fd, &c, 1);
    if (n <= 0) return false;
    if (c == '\n') return true;
    line += c;
  }
}

LocalResult WireAgentEndpoint::solve_local(const Eigen::VectorXd& lambda) {
  ++k_;
  if (!write_line(fd_, encode(MsgBroadcastLambda{k_, lambda})))
    throw std::runtime_error("wire: agent unreachable");
  std::string reply;
  if (!read_line(fd_, reply)) throw std::runtime_error("wire: agent closed connection");
  const WireMessage msg = decode(reply);
  const auto* res = std::get_if<MsgLocalResult>(&msg);
  if (!res) throw std::runtime_error("wire: expected LOCAL_RESULT");
  return {res->l, res->value};
}

void WireAgentEndpoint::commit() {
  if (!write_line(fd_, encode(MsgCommit{agent_id_})))
    throw std::runtime_error("wire: agent unreachable");
  std::string reply;
  if (!read_line(fd_, reply)) throw std::runtime_error("wire: agent closed connection");
  const WireMessage msg = decode(reply);
  if (!std::holds_alternative<MsgCommit>(msg))
    throw std::runtime_error("wire: expected COMMIT ack");
}

void serve_agent(int fd, LocalAgent& agent) {
  std::string line;
  while (read_line(fd, line)) {
    const WireMessage msg = decode(line);
    if (const auto* bc = std::get_if<MsgBroadcastLambda>(&msg)) {
      const LocalResult r = agent.solve_local(bc->lambda);
      if (!write_line(fd, encode(MsgLocalResult{agent.id(), r.l, r.value}))) return;
    } else if (std::holds_alternative<MsgCommit>(msg)) {
      agent.commit();
      if (!write_line(fd, encode(MsgCommit{agent.id()}))) return;
    }
  }
}

}  // namespace drflex
