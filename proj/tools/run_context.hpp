#pragma once
// Shared plumbing of the facedose subcommands: the data directory jail,
// world loading and run manifests.

#include <facedose/faceworld.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace facedose::cli {

namespace fs = std::filesystem;

struct Common
{
    std::string data_dir = ".";
    std::string world; ///< empty: <data_dir>/cohort/world.json
    std::uint64_t seed = 0;
};

/// `name` resolved under data_dir; absolute paths and ".." are refused so
/// nothing is written outside the data directory. Creates the directory.
fs::path output_dir(const Common& c, const std::string& name);

SyntheticWorld load_world_for(const Common& c);
fs::path world_path(const Common& c);

/// Comma-separated numbers, exactly `n` of them.
std::vector<double> parse_list(const std::string& text, std::size_t n, const std::string& flag);

/// Machine-readable record of a run. Deliberately free of wall-clock time so
/// a rerun with the same inputs reproduces it byte for byte.
class Manifest
{
public:
    Manifest(std::string command, const Common& c);

    void arg(const std::string& key, nlohmann::json value);
    /// Hashes a file, or every regular file of a directory in name order.
    void input(const fs::path& path);
    void output(const fs::path& path);
    void note(const std::string& key, nlohmann::json value);
    /// Writes <dir>/manifest-<command>.json.
    fs::path write(const fs::path& dir) const;

private:
    std::string command_;
    nlohmann::json doc_;
    std::string data_dir_;
};

} // namespace facedose::cli
