#include "run_context.hpp"

#include <facedose/error.hpp>
#include <facedose/hashing.hpp>
#include <facedose/serialization.hpp>

#include <algorithm>
#include <charconv>
#include <sstream>

namespace facedose::cli {

fs::path output_dir(const Common& c, const std::string& name)
{
    const fs::path rel(name);
    if (rel.empty() || rel.is_absolute()) {
        throw Error(Errc::invalid_config, "output names are relative to --data-dir", name);
    }
    for (const fs::path& part : rel) {
        if (part == "..") throw Error(Errc::invalid_config, "output may not leave --data-dir", name);
    }
    const fs::path dir = fs::path(c.data_dir) / rel;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::io_error, "cannot create output directory: " + ec.message(), dir.string());
    return dir;
}

fs::path world_path(const Common& c)
{
    return c.world.empty() ? fs::path(c.data_dir) / "cohort" / "world.json" : fs::path(c.world);
}

SyntheticWorld load_world_for(const Common& c)
{
    const fs::path path = world_path(c);
    if (!fs::exists(path)) {
        throw Error(Errc::io_error, "no world file; run cohort-gen first or pass --world", path.string());
    }
    return load_world(read_text_file(path));
}

std::vector<double> parse_list(const std::string& text, std::size_t n, const std::string& flag)
{
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || end != item.data() + item.size()) {
            throw Error(Errc::invalid_config, "'" + item + "' is not a number", flag);
        }
        out.push_back(v);
    }
    if (out.size() != n) {
        throw Error(Errc::invalid_config,
                    "expected " + std::to_string(n) + " comma-separated values, got " + std::to_string(out.size()),
                    flag);
    }
    return out;
}

Manifest::Manifest(std::string command, const Common& c) : command_(std::move(command)), data_dir_(c.data_dir)
{
    doc_ = {{"schema", "facedose.manifest/1"},
            {"command", command_},
            {"version", FACEDOSE_VERSION},
            {"seed", c.seed},
            {"args", nlohmann::json::object()},
            {"inputs", nlohmann::json::array()},
            {"outputs", nlohmann::json::array()}};
}

void Manifest::arg(const std::string& key, nlohmann::json value)
{
    doc_["args"][key] = std::move(value);
}

namespace {

std::string hash_path(const fs::path& path)
{
    if (!fs::is_directory(path)) return sha256_hex(read_text_file(path));
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string joined;
    for (const fs::path& f : files) {
        joined += f.filename().string() + ":" + sha256_hex(read_text_file(f)) + "\n";
    }
    return sha256_hex(joined);
}

std::string display(const fs::path& path, const std::string& data_dir)
{
    const fs::path rel = path.lexically_relative(data_dir);
    return !rel.empty() && *rel.begin() != ".." ? rel.generic_string() : path.generic_string();
}

} // namespace

void Manifest::input(const fs::path& path)
{
    doc_["inputs"].push_back({{"path", display(path, data_dir_)}, {"sha256", hash_path(path)}});
}

void Manifest::output(const fs::path& path)
{
    doc_["outputs"].push_back({{"path", display(path, data_dir_)}, {"sha256", hash_path(path)}});
}

void Manifest::note(const std::string& key, nlohmann::json value)
{
    doc_[key] = std::move(value);
}

fs::path Manifest::write(const fs::path& dir) const
{
    std::string name = command_;
    std::replace(name.begin(), name.end(), ' ', '-');
    const fs::path path = dir / ("manifest-" + name + ".json");
    write_text_file(path, doc_.dump(1) + "\n");
    return path;
}

} // namespace facedose::cli
