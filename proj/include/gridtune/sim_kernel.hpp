#pragma once

// Deterministic discrete-event kernel. Agents are actors living in one logical
// thread; physical distribution is modelled as latency between mailboxes.
// Events are processed in lexicographic (at, seq) order and every processed
// event is appended to the EventLog.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gridtune/error.hpp"
#include "gridtune/grid_model.hpp"

namespace gridtune {

using Json = nlohmann::ordered_json;

// Append-only run log. Each record starts with "n" (position) and "t" (sim
// time) followed by "type" and type-specific fields in insertion order.
class EventLog {
 public:
  const Json& append(SimTime t, std::string_view type, Json fields = Json::object()) {
    Json rec = Json::object();
    rec["n"] = records_.size();
    rec["t"] = t;
    rec["type"] = type;
    for (auto& [k, v] : fields.items()) rec[k] = std::move(v);
    records_.push_back(std::move(rec));
    return records_.back();
  }

  const std::vector<Json>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  // JSON Lines, one record per line, keys in insertion order.
  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
      out += r.dump();
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<Json> records_;
};

struct Location {
  std::string site;
  std::string resource;
  std::string node;
};

struct LatencyModel {
  double intra_node = 0.0;
  double intra_site = 0.01;
  double inter_site = 0.1;

  double between(const Location& a, const Location& b) const {
    if (!a.node.empty() && a.node == b.node) return intra_node;
    if (!a.site.empty() && a.site == b.site) return intra_site;
    return inter_site;
  }

  bool operator==(const LatencyModel&) const = default;
};

template <class Payload>
struct AgentMessage {
  std::string from;
  std::string to;
  SimTime sent_at = 0.0;
  double latency = 0.0;
  Payload payload;
};

template <class Payload>
struct Deliver {
  AgentMessage<Payload> message;
};

struct Timer {
  std::string agent_id;
  std::string tag;
};

struct JobPhase {
  std::string job_id;
  std::string kind;
  std::uint64_t token = 0;  // lets the owner ignore phases made stale by replanning
};

template <class Payload>
struct Event {
  SimTime at = 0.0;
  std::uint64_t seq = 0;  // assigned by the kernel
  std::variant<Deliver<Payload>, Timer, JobPhase> payload;
};

template <class Payload>
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void on_message(const AgentMessage<Payload>& msg) = 0;
  virtual void on_timer(const std::string& tag) = 0;
};

// Per-agent random stream. The engine is fully specified by the standard, and
// the [0,1) mapping uses the top 53 bits, so streams are portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x00000100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline Rng stream_for(std::uint64_t seed, std::string_view stream_id) {
  return Rng(splitmix64(seed ^ fnv1a64(stream_id)));
}

// Payload types must provide, findable by ADL:
//   std::string log_type(const Payload&);
//   Json log_fields(const Payload&);
template <class Payload>
class Kernel {
 public:
  using Message = AgentMessage<Payload>;
  using EventT = Event<Payload>;

  explicit Kernel(LatencyModel latency = {}, std::uint64_t seed = 0) : latency_(latency), seed_(seed) {}

  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  void register_agent(const std::string& id, Location where, Actor<Payload>& actor) {
    if (!agents_.emplace(id, Entry{std::move(where), &actor}).second)
      throw Error(Errc::DuplicateId, "agent '" + id + "'");
  }

  bool has_agent(std::string_view id) const { return agents_.find(std::string(id)) != agents_.end(); }

  void on_job_phase(std::function<void(const JobPhase&)> handler) { job_phase_handler_ = std::move(handler); }

  SimTime now() const noexcept { return now_; }

  void schedule(EventT event) {
    if (event.at < now_)
      throw Error(Errc::PastEvent, "event at " + std::to_string(event.at) + " < now " + std::to_string(now_));
    event.seq = next_seq_++;
    queue_.push(std::move(event));
  }

  void schedule_timer(SimTime at, const std::string& agent_id, std::string tag) {
    if (!has_agent(agent_id)) throw Error(Errc::UnknownAgent, agent_id);
    schedule(EventT{at, 0, Timer{agent_id, std::move(tag)}});
  }

  void schedule_job_phase(SimTime at, std::string job_id, std::string kind, std::uint64_t token) {
    schedule(EventT{at, 0, JobPhase{std::move(job_id), std::move(kind), token}});
  }

  double latency_between(const std::string& from, const std::string& to) const {
    return latency_.between(entry(from).where, entry(to).where);
  }

  // Sends with the latency implied by the agents' locations.
  void send(const std::string& from, const std::string& to, Payload payload) {
    send(Message{from, to, now_, latency_between(from, to), std::move(payload)});
  }

  void send(Message msg) {
    entry(msg.from);
    entry(msg.to);
    if (msg.latency < 0.0) throw Error(Errc::ValidationError, "negative latency");
    SimTime at = msg.sent_at + msg.latency;
    if (at < now_) at = now_;
    // Per-pair FIFO even if latencies of a pair ever differ.
    auto& last = last_delivery_[{msg.from, msg.to}];
    if (at < last) at = last;
    last = at;
    Json fields = Json::object();
    fields["from"] = msg.from;
    fields["to"] = msg.to;
    fields["deliver_at"] = at;
    fields["msg"] = log_type(msg.payload);
    fields["body"] = log_fields(msg.payload);
    log_.append(now_, "send", std::move(fields));
    schedule(EventT{at, 0, Deliver<Payload>{std::move(msg)}});
  }

  const EventLog& run_until(SimTime t_end) {
    while (!queue_.empty() && queue_.top().at <= t_end) {
      EventT ev = queue_.top();
      queue_.pop();
      now_ = ev.at;
      dispatch(ev);
    }
    return log_;
  }

  // True if events remain (possibly beyond the last run_until horizon).
  bool pending() const noexcept { return !queue_.empty(); }

  EventLog& log() noexcept { return log_; }
  const EventLog& log() const noexcept { return log_; }

  Rng rng(std::string_view agent_id) const { return stream_for(seed_, agent_id); }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  struct Entry {
    Location where;
    Actor<Payload>* actor;
  };

  struct Later {
    bool operator()(const EventT& a, const EventT& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  const Entry& entry(const std::string& id) const {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw Error(Errc::UnknownAgent, "agent '" + id + "' is not registered");
    return it->second;
  }

  void dispatch(const EventT& ev) {
    if (const auto* d = std::get_if<Deliver<Payload>>(&ev.payload)) {
      const auto& m = d->message;
      Json fields = Json::object();
      fields["seq"] = ev.seq;
      fields["from"] = m.from;
      fields["to"] = m.to;
      fields["msg"] = log_type(m.payload);
      log_.append(now_, "deliver", std::move(fields));
      entry(m.to).actor->on_message(m);
    } else if (const auto* t = std::get_if<Timer>(&ev.payload)) {
      log_.append(now_, "timer", Json{{"seq", ev.seq}, {"agent", t->agent_id}, {"tag", t->tag}});
      entry(t->agent_id).actor->on_timer(t->tag);
    } else {
      const auto& p = std::get<JobPhase>(ev.payload);
      log_.append(now_, "job_phase", Json{{"seq", ev.seq}, {"job", p.job_id}, {"kind", p.kind}});
      if (job_phase_handler_) job_phase_handler_(p);
    }
  }

  LatencyModel latency_;
  std::uint64_t seed_;
  SimTime now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<EventT, std::vector<EventT>, Later> queue_;
  std::map<std::string, Entry> agents_;
  std::map<std::pair<std::string, std::string>, SimTime> last_delivery_;
  std::function<void(const JobPhase&)> job_phase_handler_;
  EventLog log_;
};

}  // namespace gridtune
