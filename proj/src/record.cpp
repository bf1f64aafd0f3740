// SPDX-License-Identifier: Apache-2.0
#include "qcal/record.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "qcal/autorabi.hpp" // utc_now
#include "qcal/errors.hpp"

namespace qcal::rec {

using nlohmann::json;

json CalibrationRecord::payload() const {
    json j;
    j["id"] = id;
    j["stage"] = stage;
    j["version"] = version;
    j["run_id"] = prov.run_id;
    j["seed"] = prov.seed;
    j["software"] = prov.software;
    j["data"] = data;
    return j;
}

std::string CalibrationRecord::payload_text() const { return payload().dump(); }

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty()) throw std::invalid_argument("RecordStore: empty path");
}

namespace {

bool parse_line(const std::string& line, CalibrationRecord& out) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("payload")) return false;
    const json& p = j["payload"];
    if (!p.is_object() || !p.contains("id") || !p.contains("stage") || !p.contains("version"))
        return false;
    try {
        out.id = p.at("id").get<std::string>();
        out.stage = p.at("stage").get<std::string>();
        out.version = p.at("version").get<int>();
        out.prov.run_id = p.value("run_id", std::string{});
        out.prov.seed = p.value("seed", std::uint64_t{0});
        out.prov.software = p.value("software", std::string{});
        out.data = p.value("data", json::object());
    } catch (const json::exception&) {
        return false;
    }
    return true;
}

} // namespace

std::vector<CalibrationRecord> RecordStore::read_all(std::vector<std::string>* warnings) const {
    std::vector<CalibrationRecord> out;
    std::ifstream in(path_);
    if (!in.is_open()) return out; // store not created yet: empty
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        CalibrationRecord rec;
        if (parse_line(line, rec)) {
            out.push_back(std::move(rec));
        } else {
            std::string msg = "record store " + path_.string() + ": skipping corrupt line " +
                              std::to_string(lineno);
            if (warnings != nullptr)
                warnings->push_back(std::move(msg));
            else
                std::fprintf(stderr, "warning: %s\n", msg.c_str());
        }
    }
    return out;
}

std::optional<CalibrationRecord> RecordStore::latest(const std::string& id) const {
    std::optional<CalibrationRecord> best;
    std::vector<std::string> sink;
    for (CalibrationRecord& r : read_all(&sink))
        if (r.id == id && (!best || r.version > best->version)) best = std::move(r);
    return best;
}

std::optional<CalibrationRecord> RecordStore::latest(const std::string& id,
                                                     const std::string& stage) const {
    std::optional<CalibrationRecord> best;
    std::vector<std::string> sink;
    for (CalibrationRecord& r : read_all(&sink))
        if (r.id == id && r.stage == stage && (!best || r.version > best->version))
            best = std::move(r);
    return best;
}

CalibrationRecord RecordStore::append(const std::string& id, const std::string& stage,
                                      const Provenance& prov, nlohmann::json data) {
    if (id.empty() || stage.empty())
        throw std::invalid_argument("RecordStore::append: id and stage are required");

    CalibrationRecord rec;
    rec.id = id;
    rec.stage = stage;
    rec.prov = prov;
    rec.data = std::move(data);
    const auto prior = latest(id);
    rec.version = prior ? prior->version + 1 : 1;

    json line;
    line["envelope"] = json{{"written_at", ar::utc_now()}};
    line["payload"] = rec.payload();

    // rebuild + rename: the store is never observable half-written
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    const std::filesystem::path tmp = path_.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out.is_open())
            throw IoError("record store: cannot open temp file " + tmp.string());
        std::ifstream in(path_);
        std::string existing;
        while (std::getline(in, existing))
            if (!existing.empty()) out << existing << '\n';
        out << line.dump() << '\n';
        out.flush();
        if (!out.good()) throw IoError("record store: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path_, ec);
    if (ec) throw IoError("record store: rename failed: " + ec.message());
    return rec;
}

} // namespace qcal::rec
