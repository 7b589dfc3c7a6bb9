#include "flowlet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "flowlet/error.hpp"

namespace flowlet {

namespace {

std::string format_of(const KernelInput& in) {
  return in.format.empty() ? "new_line" : in.format;
}

const Format& fmt_of(const KernelInput& in) {
  static const FormatRegistry fallback;
  const FormatRegistry* reg = in.formats ? in.formats : &fallback;
  return reg->get(format_of(in));
}

std::string concat_inputs(const KernelInput& in) {
  std::string all;
  for (const auto& [key, bytes] : in.inputs) all += bytes;
  return all;
}

std::string_view first_token(std::string_view line) {
  size_t a = 0;
  while (a < line.size() && (line[a] == ' ' || line[a] == '\t')) a++;
  size_t b = a;
  while (b < line.size() && line[b] != ' ' && line[b] != '\t') b++;
  return line.substr(a, b - a);
}

std::vector<std::string_view> tsv_fields(std::string_view line) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (true) {
    size_t t = line.find('\t', pos);
    if (t == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, t - pos));
    pos = t + 1;
  }
  return out;
}

double field_number(std::string_view f, const char* what) {
  auto v = parse_number(f);
  if (!v) raise(Errc::kernel_error, std::string(what) + ": bad number '" + std::string(f) + "'");
  return *v;
}

KernelResult kernel_identity(const KernelInput& in) {
  KernelResult r;
  std::string all = concat_inputs(in);
  r.work_units = static_cast<double>(all.size());
  r.outputs.emplace_back("out", std::move(all));
  return r;
}

KernelResult kernel_compress(const KernelInput& in) {
  KernelResult r;
  std::string all = concat_inputs(in);
  r.work_units = static_cast<double>(all.size());
  r.outputs.emplace_back("out", rle_encode(all));
  return r;
}

// One line per record: "<first token>\t<byte sum of the record>".
KernelResult kernel_score(const KernelInput& in) {
  KernelResult r;
  std::string all = concat_inputs(in);
  r.work_units = static_cast<double>(all.size());
  std::string out;
  for (auto item : fmt_of(in).items(all)) {
    auto line = strip_newline(item);
    if (line.empty()) continue;
    int64_t sum = 0;
    for (unsigned char c : line) sum += c;
    auto id = first_token(line);
    out.append(id);
    out.push_back('\t');
    out.append(std::to_string(sum));
    out.push_back('\n');
  }
  r.outputs.emplace_back("out", std::move(out));
  return r;
}

// Nearest neighbour of every test row in the bound training chunk. Test rows
// are "id\tx1..xd", training rows "id\tx1..xd\tlabel"; output rows carry the
// squared distance so a later reduce can pick the global minimum.
KernelResult kernel_knn(const KernelInput& in) {
  auto test_name = in.params.value("test_key", std::string("test"));
  auto train_name = in.params.value("train_key", std::string("train"));
  std::string test_bytes;
  if (in.bindings.count(test_name)) {
    test_bytes = in.bindings.at(test_name);
  } else {
    test_bytes = concat_inputs(in);
  }
  auto train_it = in.bindings.find(train_name);
  if (train_it == in.bindings.end())
    raise(Errc::kernel_error, "toy_knn needs a '" + train_name + "' binding");

  static const TsvFormat tsv;
  struct Row {
    std::string_view id;
    std::vector<double> x;
    std::string_view label;
  };
  auto parse = [](std::string_view blob, bool labeled) {
    std::vector<Row> rows;
    for (auto item : tsv.items(blob)) {
      auto line = strip_newline(item);
      if (line.empty()) continue;
      auto fields = tsv_fields(line);
      size_t want = labeled ? 3 : 2;
      if (fields.size() < want)
        raise(Errc::kernel_error, "toy_knn: short row '" + std::string(line) + "'");
      Row row;
      row.id = fields[0];
      size_t last = labeled ? fields.size() - 1 : fields.size();
      for (size_t i = 1; i < last; i++)
        row.x.push_back(field_number(fields[i], "toy_knn"));
      if (labeled) row.label = fields.back();
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto tests = parse(test_bytes, false);
  auto train = parse(train_it->second, true);
  if (train.empty()) raise(Errc::kernel_error, "toy_knn: empty training chunk");

  KernelResult r;
  r.work_units = static_cast<double>(tests.size()) * static_cast<double>(train.size());
  std::string out;
  char buf[64];
  for (const auto& t : tests) {
    double best = 0;
    const Row* best_row = nullptr;
    for (const auto& g : train) {
      size_t d = std::min(t.x.size(), g.x.size());
      double dist = 0;
      for (size_t i = 0; i < d; i++) {
        double diff = t.x[i] - g.x[i];
        dist += diff * diff;
      }
      if (!best_row || dist < best) {
        best = dist;
        best_row = &g;
      }
    }
    snprintf(buf, sizeof(buf), "%.9g", best);
    out.append(t.id);
    out.push_back('\t');
    out.append(buf);
    out.push_back('\t');
    out.append(best_row->label);
    out.push_back('\n');
  }
  r.outputs.emplace_back("out", std::move(out));
  return r;
}

// Collapses "id\tdist\tlabel" rows to the minimum-distance label per id,
// emitted in first-appearance order.
KernelResult kernel_knn_reduce(const KernelInput& in) {
  static const TsvFormat tsv;
  std::string all = concat_inputs(in);
  KernelResult r;
  r.work_units = static_cast<double>(all.size());
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::string>> best;
  for (auto item : tsv.items(all)) {
    auto line = strip_newline(item);
    if (line.empty()) continue;
    auto fields = tsv_fields(line);
    if (fields.size() < 3)
      raise(Errc::kernel_error, "toy_knn_reduce: short row '" + std::string(line) + "'");
    std::string id(fields[0]);
    double dist = field_number(fields[1], "toy_knn_reduce");
    auto it = best.find(id);
    if (it == best.end()) {
      order.push_back(id);
      best.emplace(std::move(id), std::make_pair(dist, std::string(fields[2])));
    } else if (dist < it->second.first) {
      it->second = {dist, std::string(fields[2])};
    }
  }
  std::string out;
  for (const auto& id : order) {
    out.append(id);
    out.push_back('\t');
    out.append(best.at(id).second);
    out.push_back('\n');
  }
  r.outputs.emplace_back("out", std::move(out));
  return r;
}

}  // namespace

std::string rle_encode(std::string_view bytes) {
  std::string out;
  size_t i = 0;
  while (i < bytes.size()) {
    char c = bytes[i];
    size_t n = 1;
    while (i + n < bytes.size() && bytes[i + n] == c && n < 255) n++;
    out.push_back(static_cast<char>(static_cast<unsigned char>(n)));
    out.push_back(c);
    i += n;
  }
  return out;
}

std::string rle_decode(std::string_view bytes) {
  if (bytes.size() % 2 != 0) raise(Errc::kernel_error, "rle: odd length");
  std::string out;
  for (size_t i = 0; i < bytes.size(); i += 2) {
    size_t n = static_cast<unsigned char>(bytes[i]);
    if (n == 0) raise(Errc::kernel_error, "rle: zero run");
    out.append(n, bytes[i + 1]);
  }
  return out;
}

KernelRegistry::KernelRegistry() {
  add("identity", kernel_identity);
  add("toy_compress", kernel_compress);
  add("toy_score", kernel_score);
  add("toy_knn", kernel_knn);
  add("toy_knn_reduce", kernel_knn_reduce);
}

void KernelRegistry::add(const std::string& name, KernelFn fn) {
  kernels_[name] = std::move(fn);
}

bool KernelRegistry::has(const std::string& name) const {
  return kernels_.count(name) != 0;
}

KernelResult KernelRegistry::invoke(const std::string& name,
                                    const KernelInput& in) const {
  auto it = kernels_.find(name);
  if (it == kernels_.end()) raise(Errc::unknown_application, name);
  calls_[name]++;
  if (probe_) probe_(name, in);
  KernelResult r = it->second(in);
  if (r.work_units == 0) {
    for (const auto& [key, bytes] : in.inputs)
      r.work_units += static_cast<double>(bytes.size());
    for (const auto& [key, bytes] : in.bindings)
      r.work_units += static_cast<double>(bytes.size());
  }
  return r;
}

int64_t KernelRegistry::calls(const std::string& name) const {
  auto it = calls_.find(name);
  return it == calls_.end() ? 0 : it->second;
}

void KernelRegistry::reset_calls() { calls_.clear(); }

void KernelRegistry::set_probe(
    std::function<void(const std::string&, const KernelInput&)> probe) {
  probe_ = std::move(probe);
}

double DurationModel::duration_ms(const std::string& type, double work_units) const {
  auto it = overrides.find(type);
  const Coef& c = it == overrides.end() ? fallback : it->second;
  return std::max(1.0, c.base_ms + c.per_unit_ms * work_units);
}

json DurationModel::to_json() const {
  json doc;
  doc["default"] = {{"base_ms", fallback.base_ms}, {"per_unit_ms", fallback.per_unit_ms}};
  json types = json::object();
  for (const auto& [k, c] : overrides)
    types[k] = {{"base_ms", c.base_ms}, {"per_unit_ms", c.per_unit_ms}};
  doc["types"] = types;
  return doc;
}

DurationModel DurationModel::from_json(const json& doc) {
  DurationModel m;
  if (!doc.is_object()) raise(Errc::malformed, "duration config must be an object");
  auto read = [](const json& j) {
    Coef c;
    if (!j.is_object()) raise(Errc::malformed, "duration coefficient must be an object");
    c.base_ms = j.value("base_ms", 20.0);
    c.per_unit_ms = j.value("per_unit_ms", 0.00002);
    return c;
  };
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "default") {
      m.fallback = read(it.value());
    } else if (it.key() == "types") {
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
        m.overrides[jt.key()] = read(jt.value());
    } else {
      raise(Errc::unknown_param, "duration config does not take '" + it.key() + "'");
    }
  }
  return m;
}

}  // namespace flowlet
