#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace physkit {

enum class ReviewStatus { Pending, VlmDone, HumanApproved, HumanEdited, Rejected };

std::string_view to_string(ReviewStatus s);
std::optional<ReviewStatus> parse_review_status(std::string_view text);

/// pending -> vlm_done -> {human_approved, human_edited, rejected}; rejected -> pending.
bool transition_allowed(ReviewStatus from, ReviewStatus to);

/// Returns an ISO-8601 UTC timestamp; injectable for tests.
using Clock = std::function<std::string()>;
std::string utc_now_iso();

enum class EventType { Transition, Selection };

struct ReviewEvent {
  std::uint64_t seq = 0;  // 1-based, equals the asset version after the event
  EventType type = EventType::Transition;
  ReviewStatus from = ReviewStatus::Pending;
  ReviewStatus to = ReviewStatus::Pending;
  std::string editor;
  std::string timestamp;
  nlohmann::json payload;  // null, an edited annotation, or a selected constraint

  bool operator==(const ReviewEvent&) const = default;
};

nlohmann::json event_to_json(const ReviewEvent& e);
ReviewEvent event_from_json(const nlohmann::json& j);

struct ReviewState {
  ReviewStatus status = ReviewStatus::Pending;
  std::string editor;
  std::string timestamp;
  std::uint64_t version = 0;

  bool operator==(const ReviewState&) const = default;
};

/// Folds events in order; throws InvalidTransition on an illegal step or a
/// sequence gap.
ReviewState replay(const std::vector<ReviewEvent>& events);

/// Append-only JSONL log, one event per line. Single writer per asset.
class ReviewLog {
 public:
  explicit ReviewLog(std::filesystem::path file, Clock clock = utc_now_iso);

  const ReviewState& state() const { return state_; }
  const std::vector<ReviewEvent>& events() const { return events_; }

  /// Throws InvalidTransition when the step is not allowed.
  const ReviewEvent& transition(ReviewStatus to, const std::string& editor, nlohmann::json payload = nullptr);
  /// Records a kinematic selection without changing the status.
  const ReviewEvent& record_selection(const std::string& editor, nlohmann::json payload);

  static std::vector<ReviewEvent> read_events(const std::filesystem::path& file);

 private:
  const ReviewEvent& append(ReviewEvent e);

  std::filesystem::path file_;
  Clock clock_;
  std::vector<ReviewEvent> events_;
  ReviewState state_;
};

}  // namespace physkit
