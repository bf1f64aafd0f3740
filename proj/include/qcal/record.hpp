// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace qcal::rec {

// Deterministic origin of a record: no wall-clock content, so payloads stay
// reproducible. Wall-clock timestamps live only in the line envelope.
struct Provenance {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string software = "qcal 0.1.0";
};

struct CalibrationRecord {
    std::string id;      // "q0", "q1", "q0q1", ...
    std::string stage;   // "autorabi", "finetune", "crsweep", "xyfit", "rb", "pipeline"
    int version = 0;     // monotone per id, assigned by the store
    Provenance prov;
    nlohmann::json data; // stage-specific results

    // The deterministic part of the stored line (everything but the envelope).
    nlohmann::json payload() const;
    std::string payload_text() const; // canonical serialization used on disk
};

// Append-only JSON-lines store. Each line is one object:
//   {"envelope":{"written_at":...},"payload":{...}}
// Writes go through a temp file + rename so a crashed or concurrent writer
// can never leave a half-written line behind. Reads skip corrupt lines with
// a warning instead of failing.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path path);

    const std::filesystem::path& path() const { return path_; }

    // Assigns version = latest(id).version + 1 and appends atomically.
    CalibrationRecord append(const std::string& id, const std::string& stage,
                             const Provenance& prov, nlohmann::json data);

    // All readable records, oldest first. Corrupt lines are skipped; a note
    // per skip lands in *warnings (and on stderr when warnings == nullptr).
    std::vector<CalibrationRecord> read_all(std::vector<std::string>* warnings = nullptr) const;

    std::optional<CalibrationRecord> latest(const std::string& id) const;
    std::optional<CalibrationRecord> latest(const std::string& id,
                                            const std::string& stage) const;

private:
    std::filesystem::path path_;
};

} // namespace qcal::rec
