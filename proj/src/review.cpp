#include "physkit/review.hpp"

#include <chrono>
#include <fstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "physkit/error.hpp"

namespace physkit {

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::Pending: return "pending";
    case ReviewStatus::VlmDone: return "vlm_done";
    case ReviewStatus::HumanApproved: return "human_approved";
    case ReviewStatus::HumanEdited: return "human_edited";
    case ReviewStatus::Rejected: return "rejected";
  }
  return "pending";
}

std::optional<ReviewStatus> parse_review_status(std::string_view text) {
  for (ReviewStatus s : {ReviewStatus::Pending, ReviewStatus::VlmDone, ReviewStatus::HumanApproved,
                         ReviewStatus::HumanEdited, ReviewStatus::Rejected}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool transition_allowed(ReviewStatus from, ReviewStatus to) {
  switch (from) {
    case ReviewStatus::Pending: return to == ReviewStatus::VlmDone;
    case ReviewStatus::VlmDone:
      return to == ReviewStatus::HumanApproved || to == ReviewStatus::HumanEdited || to == ReviewStatus::Rejected;
    case ReviewStatus::Rejected: return to == ReviewStatus::Pending;
    case ReviewStatus::HumanApproved:
    case ReviewStatus::HumanEdited: return false;
  }
  return false;
}

std::string utc_now_iso() {
  const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}Z", now);
}

nlohmann::json event_to_json(const ReviewEvent& e) {
  return nlohmann::json{{"seq", e.seq},
                        {"type", e.type == EventType::Transition ? "transition" : "selection"},
                        {"from", to_string(e.from)},
                        {"to", to_string(e.to)},
                        {"editor", e.editor},
                        {"timestamp", e.timestamp},
                        {"payload", e.payload}};
}

ReviewEvent event_from_json(const nlohmann::json& j) {
  try {
    ReviewEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    const std::string type = j.at("type").get<std::string>();
    if (type == "transition") e.type = EventType::Transition;
    else if (type == "selection") e.type = EventType::Selection;
    else throw Error(Errc::SchemaViolation, "review event type '" + type + "'");
    const auto from = parse_review_status(j.at("from").get<std::string>());
    const auto to = parse_review_status(j.at("to").get<std::string>());
    if (!from || !to) throw Error(Errc::SchemaViolation, "unknown review status in event");
    e.from = *from;
    e.to = *to;
    e.editor = j.at("editor").get<std::string>();
    e.timestamp = j.at("timestamp").get<std::string>();
    e.payload = j.value("payload", nlohmann::json());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::SchemaViolation, std::string("review event: ") + ex.what());
  }
}

ReviewState replay(const std::vector<ReviewEvent>& events) {
  ReviewState s;
  for (const ReviewEvent& e : events) {
    if (e.seq != s.version + 1) {
      throw Error(Errc::InvalidTransition, fmt::format("review log gap: expected seq {}, found {}", s.version + 1, e.seq));
    }
    if (e.from != s.status) {
      throw Error(Errc::InvalidTransition,
                  fmt::format("event {} starts from {} but state is {}", e.seq, to_string(e.from), to_string(s.status)));
    }
    if (e.type == EventType::Transition) {
      if (!transition_allowed(e.from, e.to)) {
        throw Error(Errc::InvalidTransition, fmt::format("{} -> {}", to_string(e.from), to_string(e.to)));
      }
      s.status = e.to;
    } else if (e.to != e.from) {
      throw Error(Errc::InvalidTransition, "selection events cannot change status");
    }
    s.editor = e.editor;
    s.timestamp = e.timestamp;
    s.version = e.seq;
  }
  return s;
}

std::vector<ReviewEvent> ReviewLog::read_events(const std::filesystem::path& file) {
  std::vector<ReviewEvent> events;
  std::ifstream in(file);
  if (!in) return events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::SchemaViolation, file.string() + ": malformed review log line");
    events.push_back(event_from_json(j));
  }
  return events;
}

ReviewLog::ReviewLog(std::filesystem::path file, Clock clock) : file_(std::move(file)), clock_(std::move(clock)) {
  events_ = read_events(file_);
  state_ = replay(events_);
}

const ReviewEvent& ReviewLog::append(ReviewEvent e) {
  e.seq = state_.version + 1;
  e.timestamp = clock_();
  if (e.type == EventType::Transition && !transition_allowed(state_.status, e.to)) {
    throw Error(Errc::InvalidTransition, fmt::format("{} -> {}", to_string(state_.status), to_string(e.to)));
  }
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::app);
  if (!out) throw Error(Errc::IoError, "cannot append to " + file_.string());
  out << event_to_json(e).dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::IoError, "failed writing " + file_.string());
  if (e.type == EventType::Transition) state_.status = e.to;
  state_.editor = e.editor;
  state_.timestamp = e.timestamp;
  state_.version = e.seq;
  events_.push_back(std::move(e));
  return events_.back();
}

const ReviewEvent& ReviewLog::transition(ReviewStatus to, const std::string& editor, nlohmann::json payload) {
  ReviewEvent e;
  e.type = EventType::Transition;
  e.from = state_.status;
  e.to = to;
  e.editor = editor;
  e.payload = std::move(payload);
  return append(std::move(e));
}

const ReviewEvent& ReviewLog::record_selection(const std::string& editor, nlohmann::json payload) {
  ReviewEvent e;
  e.type = EventType::Selection;
  e.from = state_.status;
  e.to = state_.status;
  e.editor = editor;
  e.payload = std::move(payload);
  return append(std::move(e));
}

}  // namespace physkit
