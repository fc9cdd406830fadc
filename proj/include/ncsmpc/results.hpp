#pragma once

#include <iosfwd>
#include <string>

#include "ncsmpc/auditor.hpp"
#include "ncsmpc/scenario.hpp"

namespace ncsmpc {

/// printf("%.17g"); enough digits to round-trip any double.
std::string fmt17(double v);

void write_states_csv(const RunTrace& trace, std::ostream& os);
void write_timeline_csv(const RunTrace& trace, std::ostream& os);
/// One row per measurement: time until the first packet computed from it
/// reached the plant, or "lost".
void write_rtt_csv(const RunTrace& trace, std::ostream& os);
void write_summary_json(const RunSummary& summary, const AuditReport& report, std::ostream& os);

/// states.csv, timeline.csv, rtt.csv, summary.json, trace.jsonl and
/// packets.bin (the issued control packets in wire format) under `dir`.
void emit_results(const RunTrace& trace, const RunSummary& summary, const AuditReport& report,
                  const std::string& dir);

}  // namespace ncsmpc
