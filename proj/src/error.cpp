#include "flowlet/error.hpp"

namespace flowlet {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_uri: return "InvalidUri";
    case Errc::invalid_timeout: return "InvalidTimeout";
    case Errc::unknown_kind: return "UnknownKind";
    case Errc::missing_param: return "MissingParam";
    case Errc::unknown_param: return "UnknownParam";
    case Errc::empty_pipeline: return "EmptyPipeline";
    case Errc::no_input_format: return "NoInputFormat";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::malformed: return "Malformed";
    case Errc::format_error: return "FormatError";
    case Errc::missing_chunk: return "MissingChunk";
    case Errc::no_chunks: return "NoChunks";
    case Errc::empty_map_table: return "EmptyMapTable";
    case Errc::empty_sample: return "EmptySample";
    case Errc::unknown_application: return "UnknownApplication";
    case Errc::kernel_error: return "KernelError";
    case Errc::key_exists: return "KeyExists";
    case Errc::not_found: return "NotFound";
    case Errc::duplicate_event: return "DuplicateEvent";
    case Errc::input_missing: return "InputMissing";
    case Errc::bad_state: return "BadState";
    case Errc::unknown_job: return "UnknownJob";
    case Errc::underdetermined: return "Underdetermined";
    case Errc::infeasible: return "Infeasible";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

void raise(Errc code, const std::string& detail) { throw Error(code, detail); }

}  // namespace flowlet
