#pragma once

#include <stdexcept>
#include <string>

namespace flowlet {

enum class Errc {
  invalid_uri,
  invalid_timeout,
  unknown_kind,
  missing_param,
  unknown_param,
  empty_pipeline,
  no_input_format,
  schema_mismatch,
  malformed,
  format_error,
  missing_chunk,
  no_chunks,
  empty_map_table,
  empty_sample,
  unknown_application,
  kernel_error,
  key_exists,
  not_found,
  duplicate_event,
  input_missing,
  bad_state,
  unknown_job,
  underdetermined,
  infeasible,
};

const char* errc_name(Errc c);

// Single exception type for the whole library. Callers branch on code(),
// humans read what().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& detail = "");

}  // namespace flowlet
