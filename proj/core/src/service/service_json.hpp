#pragma once
// JSON forms of service records, shared by the store and the handlers.
#include "facedose/service.hpp"
#include "json_io.hpp"

namespace facedose::service {

std::string_view origin_name(Origin o);
io::json to_json(const HistoryEntry& h);
io::json to_json(const FeedbackRecord& f);
FeedbackRecord feedback_from(const io::json& j, const std::string& path);

} // namespace facedose::service
