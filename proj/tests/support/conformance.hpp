#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "twindelta/adapter.hpp"

namespace twindelta::testing {

/// Replaces {"$blank_png": [w, h, value]} objects with wire images.
nlohmann::json expand_placeholders(const nlohmann::json& j);

/// Checks one reply against an expectation; returns an empty string on success.
std::string check_reply(const nlohmann::json& reply, const nlohmann::json& expect);

struct FixtureResult {
  std::string name;
  std::size_t steps = 0;
  std::vector<std::string> failures;
};

/// Runs every line of a fixture file against the adapter, in order.
FixtureResult run_fixture(AdapterClient& client, const std::filesystem::path& fixture);

}  // namespace twindelta::testing
