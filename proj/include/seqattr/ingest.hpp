#pragma once

// Bundle I/O. A bundle is a JSON manifest plus delimited-text tensor files:
//
//   values.csv      id,label,<feature names...>     T consecutive rows per instance
//   attention.csv   id,label,attention              same row layout
//   feature_attention.csv (optional)  id,label,<feature names...>
//   attributes.csv  (optional)  id,<attribute names...>   one row per instance
//   embedding.csv   (optional)  id,x,y                    one row per instance

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqattr/core.hpp"

namespace seqattr {

inline constexpr std::string_view kSchemaVersion = "1.0";

struct DatasetManifest {
  std::string schema_version{kSchemaVersion};
  std::size_t T = 0;
  std::size_t F = 0;
  std::size_t L = 0;
  std::vector<std::string> class_names;
  std::vector<FeatureSpec> features;
  std::vector<std::string> attributes;
  std::string dataset_path = "values.csv";
  std::string attention_path = "attention.csv";
  std::string feature_attention_path;
  std::string attributes_path;
  std::string embedding_path;
};

struct Bundle {
  DatasetManifest manifest;
  SequenceDataset dataset;
  AttentionTensor attention;
};

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string(), {path.string(), {}, {}});
  CsvTable table;
  table.file = path.string();
  std::string line;
  bool have_header = false;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      for (auto c : cells) table.header.emplace_back(c);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw Error(ErrorCode::kParseError,
                  "expected " + std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(cells.size()),
                  {table.file, record, {}});
    std::vector<std::string> row;
    row.reserve(cells.size());
    for (auto c : cells) row.emplace_back(c);
    table.rows.push_back(std::move(row));
    ++record;
  }
  if (!have_header) throw Error(ErrorCode::kParseError, "empty file", {table.file, {}, {}});
  return table;
}

inline double parse_real(const CsvTable& t, std::size_t record, std::size_t col) {
  const std::string& s = t.rows[record][col];
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v))
    throw Error(ErrorCode::kParseError, s.empty() ? "missing value" : "not a number: '" + s + "'",
                {t.file, record, t.header[col]});
  return v;
}

inline std::size_t parse_index(const CsvTable& t, std::size_t record, std::size_t col) {
  const std::string& s = t.rows[record][col];
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::kParseError, "not a non-negative integer: '" + s + "'",
                {t.file, record, t.header[col]});
  return v;
}

inline void expect_header(const CsvTable& t, const std::vector<std::string>& expected) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::kSchemaMismatch, "header must be '" + want + "'", {t.file, {}, {}});
  }
}

// Rows grouped per instance: T consecutive rows sharing id and label.
struct InstanceBlock {
  std::string id;
  std::size_t label = 0;
  std::size_t first_record = 0;
};

inline std::vector<InstanceBlock> instance_blocks(const CsvTable& t, std::size_t T) {
  std::vector<InstanceBlock> blocks;
  for (std::size_t r = 0; r < t.rows.size();) {
    InstanceBlock b{t.rows[r][0], parse_index(t, r, 1), r};
    std::size_t end = r;
    while (end < t.rows.size() && t.rows[end][0] == b.id) {
      if (parse_index(t, end, 1) != b.label)
        throw Error(ErrorCode::kSchemaMismatch, "instance " + b.id + " changes label mid-block",
                    {t.file, end, "label"});
      ++end;
    }
    if (end - r != T)
      throw Error(ErrorCode::kSchemaMismatch,
                  "instance " + b.id + " has " + std::to_string(end - r) + " rows, expected T=" +
                      std::to_string(T),
                  {t.file, r, "id"});
    blocks.push_back(std::move(b));
    r = end;
  }
  return blocks;
}

inline std::string feature_kind_name(FeatureKind k) { return k == FeatureKind::kNumeric ? "numeric" : "categorical"; }

}  // namespace detail

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open manifest " + path.string(), {path.string(), {}, {}});
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), {path.string(), {}, {}});
  }
  const std::string file = path.string();
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw Error(ErrorCode::kParseError, "missing key", {file, {}, name});
    return j.at(name);
  };
  DatasetManifest m;
  try {
    m.schema_version = field("schema_version").get<std::string>();
    if (m.schema_version.substr(0, m.schema_version.find('.')) != "1")
      throw Error(ErrorCode::kVersionUnsupported, "schema_version " + m.schema_version + " (supported: 1.x)",
                  {file, {}, "schema_version"});
    m.T = field("T").get<std::size_t>();
    m.F = field("F").get<std::size_t>();
    m.L = field("L").get<std::size_t>();
    m.dataset_path = field("dataset_path").get<std::string>();
    m.attention_path = field("attention_path").get<std::string>();
    m.feature_attention_path = j.value("feature_attention_path", "");
    m.attributes_path = j.value("attributes_path", "");
    m.embedding_path = j.value("embedding_path", "");
    m.class_names = j.value("class_names", std::vector<std::string>{});
    m.attributes = j.value("attributes", std::vector<std::string>{});
    const auto& feats = field("features");
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const auto& f = feats.at(i);
      FeatureSpec spec;
      spec.id = f.at("id").get<std::size_t>();
      spec.name = f.at("name").get<std::string>();
      spec.value_min = f.at("min").get<double>();
      spec.value_max = f.at("max").get<double>();
      std::string kind = f.value("kind", "numeric");
      if (kind != "numeric" && kind != "categorical")
        throw Error(ErrorCode::kParseError, "unknown feature kind '" + kind + "'", {file, i, "features.kind"});
      spec.kind = kind == "numeric" ? FeatureKind::kNumeric : FeatureKind::kCategorical;
      m.features.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what(), {file, {}, {}});
  }
  std::sort(m.features.begin(), m.features.end(),
            [](const FeatureSpec& a, const FeatureSpec& b) { return a.id < b.id; });
  if (m.features.size() != m.F)
    throw Error(ErrorCode::kSchemaMismatch,
                "feature table lists " + std::to_string(m.features.size()) + " features, F=" + std::to_string(m.F),
                {file, {}, "features"});
  for (std::size_t f = 0; f < m.F; ++f)
    if (m.features[f].id != f)
      throw Error(ErrorCode::kSchemaMismatch, "feature ids must be exactly 0..F-1", {file, f, "features.id"});
  return m;
}

/// Loads and validates a bundle. Either everything loads or an Error is thrown.
inline Bundle load_bundle(const std::filesystem::path& manifest_path) {
  using namespace detail;
  Bundle b;
  b.manifest = read_manifest(manifest_path);
  const auto& m = b.manifest;
  const auto dir = manifest_path.parent_path();

  std::vector<std::string> names{"id", "label"};
  for (const auto& f : m.features) names.push_back(f.name);

  // Values.
  const auto values = read_csv(dir / m.dataset_path);
  expect_header(values, names);
  const auto blocks = instance_blocks(values, m.T);
  SequenceDataset& ds = b.dataset;
  ds.T = m.T;
  ds.F = m.F;
  ds.L = m.L;
  ds.features = m.features;
  std::map<std::string, std::size_t> index_of;
  for (const auto& blk : blocks) {
    InstanceRecord inst;
    inst.id = blk.id;
    inst.label = blk.label;
    if (inst.label >= m.L)
      throw Error(ErrorCode::kSchemaMismatch, "label " + std::to_string(inst.label) + " outside [0,L)",
                  {values.file, blk.first_record, "label"});
    if (!index_of.emplace(inst.id, ds.instances.size()).second)
      throw Error(ErrorCode::kSchemaMismatch, "duplicate instance id " + inst.id, {values.file, blk.first_record, "id"});
    inst.values = Matrix(m.T, m.F);
    for (std::size_t t = 0; t < m.T; ++t)
      for (std::size_t f = 0; f < m.F; ++f) {
        const std::size_t rec = blk.first_record + t;
        double v = parse_real(values, rec, f + 2);
        const auto& spec = m.features[f];
        if (!(v >= spec.value_min && v <= spec.value_max))
          throw Error(ErrorCode::kValueOutOfRange,
                      "instance " + inst.id + " t=" + std::to_string(t) + " value " + format_double(v) +
                          " outside [" + format_double(spec.value_min) + "," + format_double(spec.value_max) + "]",
                      {values.file, rec, spec.name});
        inst.values(t, f) = v;
      }
    ds.instances.push_back(std::move(inst));
  }

  // Event attention, aligned to the values file instance order.
  auto check_alignment = [&](const CsvTable& t, const std::vector<InstanceBlock>& blks) {
    if (blks.size() != ds.instances.size())
      throw Error(ErrorCode::kSchemaMismatch,
                  "holds " + std::to_string(blks.size()) + " instances, values file holds " +
                      std::to_string(ds.instances.size()),
                  {t.file, {}, {}});
    for (std::size_t i = 0; i < blks.size(); ++i)
      if (blks[i].id != ds.instances[i].id || blks[i].label != ds.instances[i].label)
        throw Error(ErrorCode::kSchemaMismatch,
                    "instance " + blks[i].id + " does not match values instance " + ds.instances[i].id,
                    {t.file, blks[i].first_record, "id"});
  };
  auto check_attention = [&](const CsvTable& t, std::size_t rec, std::size_t col, double a) {
    if (!(a >= 0.0 && a <= 1.0))
      throw Error(ErrorCode::kValueOutOfRange, "attention " + format_double(a) + " outside [0,1]",
                  {t.file, rec, t.header[col]});
  };

  const auto att = read_csv(dir / m.attention_path);
  expect_header(att, {"id", "label", "attention"});
  const auto att_blocks = instance_blocks(att, m.T);
  check_alignment(att, att_blocks);
  for (const auto& blk : att_blocks) {
    std::vector<double> row(m.T);
    for (std::size_t t = 0; t < m.T; ++t) {
      row[t] = parse_real(att, blk.first_record + t, 2);
      check_attention(att, blk.first_record + t, 2, row[t]);
    }
    b.attention.event_level.push_back(std::move(row));
  }

  if (!m.feature_attention_path.empty()) {
    const auto fa = read_csv(dir / m.feature_attention_path);
    expect_header(fa, names);
    const auto fa_blocks = instance_blocks(fa, m.T);
    check_alignment(fa, fa_blocks);
    std::vector<Matrix> mats;
    for (const auto& blk : fa_blocks) {
      Matrix a(m.T, m.F);
      for (std::size_t t = 0; t < m.T; ++t)
        for (std::size_t f = 0; f < m.F; ++f) {
          a(t, f) = parse_real(fa, blk.first_record + t, f + 2);
          check_attention(fa, blk.first_record + t, f + 2, a(t, f));
        }
      mats.push_back(std::move(a));
    }
    b.attention.feature_level = std::move(mats);
  }

  auto per_instance = [&](const CsvTable& t) {
    if (t.rows.size() != ds.instances.size())
      throw Error(ErrorCode::kSchemaMismatch,
                  "holds " + std::to_string(t.rows.size()) + " rows, expected one per instance (" +
                      std::to_string(ds.instances.size()) + ")",
                  {t.file, {}, {}});
    std::vector<std::size_t> order;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      auto it = index_of.find(t.rows[r][0]);
      if (it == index_of.end())
        throw Error(ErrorCode::kSchemaMismatch, "unknown instance " + t.rows[r][0], {t.file, r, "id"});
      order.push_back(it->second);
    }
    return order;
  };

  if (!m.attributes_path.empty()) {
    const auto at = read_csv(dir / m.attributes_path);
    std::vector<std::string> hdr{"id"};
    hdr.insert(hdr.end(), m.attributes.begin(), m.attributes.end());
    expect_header(at, hdr);
    auto order = per_instance(at);
    for (std::size_t r = 0; r < at.rows.size(); ++r)
      for (std::size_t c = 0; c < m.attributes.size(); ++c)
        ds.instances[order[r]].attributes[m.attributes[c]] = at.rows[r][c + 1];
  }

  if (!m.embedding_path.empty()) {
    const auto em = read_csv(dir / m.embedding_path);
    expect_header(em, {"id", "x", "y"});
    auto order = per_instance(em);
    for (std::size_t r = 0; r < em.rows.size(); ++r)
      ds.instances[order[r]].embedding2d = std::array<double, 2>{parse_real(em, r, 1), parse_real(em, r, 2)};
  }

  auto report = validate_dataset(ds, b.attention);
  if (!report.empty()) {
    const auto& v = report.front();
    ErrorCode code = (v.kind == ViolationKind::kValueRange || v.kind == ViolationKind::kAttentionRange)
                         ? ErrorCode::kValueOutOfRange
                         : ErrorCode::kSchemaMismatch;
    throw Error(code, describe(v), {manifest_path.string(), {}, {}});
  }
  return b;
}

inline nlohmann::ordered_json manifest_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = m.schema_version;
  j["T"] = m.T;
  j["F"] = m.F;
  j["L"] = m.L;
  if (!m.class_names.empty()) j["class_names"] = m.class_names;
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : m.features)
    j["features"].push_back({{"id", f.id},
                             {"name", f.name},
                             {"min", f.value_min},
                             {"max", f.value_max},
                             {"kind", detail::feature_kind_name(f.kind)}});
  j["attributes"] = m.attributes;
  j["dataset_path"] = m.dataset_path;
  j["attention_path"] = m.attention_path;
  if (!m.feature_attention_path.empty()) j["feature_attention_path"] = m.feature_attention_path;
  if (!m.attributes_path.empty()) j["attributes_path"] = m.attributes_path;
  if (!m.embedding_path.empty()) j["embedding_path"] = m.embedding_path;
  return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
}

}  // namespace detail

/// Writes a bundle in canonical form; returns the manifest path.
inline std::filesystem::path save_bundle(const SequenceDataset& ds, const AttentionTensor& att,
                                         const std::filesystem::path& dir,
                                         std::vector<std::string> class_names = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.T = ds.T;
  m.F = ds.F;
  m.L = ds.L;
  m.class_names = std::move(class_names);
  m.features = ds.features;
  if (!ds.instances.empty())
    for (const auto& [k, v] : ds.instances.front().attributes) m.attributes.push_back(k);

  std::string header = "id,label";
  for (const auto& f : ds.features) header += "," + f.name;

  std::ostringstream values, att_out;
  values << header << '\n';
  att_out << "id,label,attention\n";
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& inst = ds.instances[i];
    for (std::size_t t = 0; t < ds.T; ++t) {
      values << inst.id << ',' << inst.label;
      for (std::size_t f = 0; f < ds.F; ++f) values << ',' << format_double(inst.values(t, f));
      values << '\n';
      att_out << inst.id << ',' << inst.label << ',' << format_double(att.event_level.at(i).at(t)) << '\n';
    }
  }
  detail::write_text(dir / m.dataset_path, values.str());
  detail::write_text(dir / m.attention_path, att_out.str());

  if (att.feature_level) {
    m.feature_attention_path = "feature_attention.csv";
    std::ostringstream fa;
    fa << header << '\n';
    for (std::size_t i = 0; i < ds.instances.size(); ++i)
      for (std::size_t t = 0; t < ds.T; ++t) {
        fa << ds.instances[i].id << ',' << ds.instances[i].label;
        for (std::size_t f = 0; f < ds.F; ++f) fa << ',' << format_double((*att.feature_level)[i](t, f));
        fa << '\n';
      }
    detail::write_text(dir / m.feature_attention_path, fa.str());
  }
  if (!m.attributes.empty()) {
    m.attributes_path = "attributes.csv";
    std::ostringstream at;
    at << "id";
    for (const auto& a : m.attributes) at << ',' << a;
    at << '\n';
    for (const auto& inst : ds.instances) {
      at << inst.id;
      for (const auto& a : m.attributes) at << ',' << inst.attributes.at(a);
      at << '\n';
    }
    detail::write_text(dir / m.attributes_path, at.str());
  }
  if (ds.has_embedding()) {
    m.embedding_path = "embedding.csv";
    std::ostringstream em;
    em << "id,x,y\n";
    for (const auto& inst : ds.instances)
      em << inst.id << ',' << format_double((*inst.embedding2d)[0]) << ',' << format_double((*inst.embedding2d)[1])
         << '\n';
    detail::write_text(dir / m.embedding_path, em.str());
  }
  const auto manifest_path = dir / "manifest.json";
  detail::write_text(manifest_path, manifest_json(m).dump(2) + "\n");
  return manifest_path;
}

}  // namespace seqattr
