#include "memetrn/data/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "memetrn/errors.hpp"

namespace memetrn {
namespace {

using nlohmann::json;

std::string where(std::size_t line_no) { return line_no ? "line " + std::to_string(line_no) + ": " : ""; }

const json& require(const json& obj, const char* field, std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(where(line_no) + "missing field '" + field + "'");
  return *it;
}

template <class T>
T get_as(const json& obj, const char* field, std::size_t line_no) {
  try {
    return require(obj, field, line_no).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where(line_no) + "field '" + field + "' has wrong type: " + e.what());
  }
}

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(where(line_no) + "record is not a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(where(line_no) + "malformed JSON: " + e.what());
  }
}

json region_to_json(const RegionFeature& r) {
  return json{{"feat", r.feat}, {"box", r.box}, {"label", r.label}, {"score", r.score}};
}

RegionFeature region_from_json(const json& j, std::size_t line_no) {
  RegionFeature r;
  r.feat = get_as<std::vector<double>>(j, "feat", line_no);
  const auto box = get_as<std::vector<double>>(j, "box", line_no);
  if (box.size() != 4) throw ParseError(where(line_no) + "field 'box' must hold 4 values");
  std::copy(box.begin(), box.end(), r.box.begin());
  if (!valid_box(r.box)) throw IntegrityError(where(line_no) + "region box outside [0,1] or degenerate");
  r.label = get_as<std::string>(j, "label", line_no);
  r.score = get_as<double>(j, "score", line_no);
  return r;
}

std::vector<RegionFeature> regions_from_json(const json& obj, std::size_t line_no) {
  const json& arr = require(obj, "regions", line_no);
  if (!arr.is_array()) throw ParseError(where(line_no) + "field 'regions' must be an array");
  std::vector<RegionFeature> out;
  for (const auto& r : arr) out.push_back(region_from_json(r, line_no));
  return out;
}

json regions_to_json(const std::vector<RegionFeature>& regions) {
  json arr = json::array();
  for (const auto& r : regions) arr.push_back(region_to_json(r));
  return arr;
}

// Calls fn(line, line_no) for every non-blank line.
template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(line, line_no);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    } catch (const IntegrityError& e) {
      throw IntegrityError(path.string() + ": " + e.what());
    }
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void check_unique(std::set<std::string>& seen, const std::string& id, std::size_t line_no) {
  if (!seen.insert(id).second) throw IntegrityError(where(line_no) + "duplicate id '" + id + "'");
}

}  // namespace

bool valid_box(const std::array<double, 4>& b) {
  return 0.0 <= b[0] && b[0] < b[2] && b[2] <= 1.0 && 0.0 <= b[1] && b[1] < b[3] && b[3] <= 1.0;
}

std::string meme_to_json_line(const MemeSample& s) {
  json j{{"id", s.id}, {"text", s.text}, {"label", s.label}, {"regions", regions_to_json(s.regions)}};
  if (s.caption) j["caption"] = *s.caption;
  if (!s.origin.empty()) j["origin"] = s.origin;
  return j.dump();
}

MemeSample meme_from_json_line(const std::string& line, std::size_t line_no) {
  const json j = parse_line(line, line_no);
  MemeSample s;
  s.id = get_as<std::string>(j, "id", line_no);
  s.text = get_as<std::string>(j, "text", line_no);
  s.label = get_as<int>(j, "label", line_no);
  if (s.label != 0 && s.label != 1) throw ParseError(where(line_no) + "field 'label' must be 0 or 1");
  s.regions = regions_from_json(j, line_no);
  if (j.contains("caption") && !j["caption"].is_null()) s.caption = get_as<std::string>(j, "caption", line_no);
  if (j.contains("origin")) s.origin = get_as<std::string>(j, "origin", line_no);
  return s;
}

void save_memes(const std::vector<MemeSample>& samples, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& s : samples) out << meme_to_json_line(s) << '\n';
}

std::vector<MemeSample> load_memes(const std::filesystem::path& path) {
  std::vector<MemeSample> out;
  std::set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    out.push_back(meme_from_json_line(line, no));
    check_unique(seen, out.back().id, no);
  });
  return out;
}

void save_caption_samples(const std::vector<CaptionSample>& samples, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& s : samples) {
    out << json{{"id", s.id}, {"regions", regions_to_json(s.regions)}, {"references", s.references}}.dump() << '\n';
  }
}

std::vector<CaptionSample> load_caption_samples(const std::filesystem::path& path) {
  std::vector<CaptionSample> out;
  std::set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    const json j = parse_line(line, no);
    CaptionSample s;
    s.id = get_as<std::string>(j, "id", no);
    s.regions = regions_from_json(j, no);
    s.references = get_as<std::vector<std::string>>(j, "references", no);
    if (s.references.empty()) throw ParseError(where(no) + "field 'references' is empty");
    for (const auto& r : s.references) {
      if (r.empty()) throw ParseError(where(no) + "empty reference caption");
    }
    check_unique(seen, s.id, no);
    out.push_back(std::move(s));
  });
  return out;
}

void save_provenance(const std::vector<Provenance>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& p : records) {
    out << json{{"id", p.id},
                {"text_trigger", p.text_trigger},
                {"visual_trigger", p.visual_trigger},
                {"flipped", p.flipped},
                {"rule", to_string(p.rule)},
                {"concepts", p.concepts}}
               .dump()
        << '\n';
  }
}

std::vector<Provenance> load_provenance(const std::filesystem::path& path) {
  std::vector<Provenance> out;
  std::set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    const json j = parse_line(line, no);
    Provenance p;
    p.id = get_as<std::string>(j, "id", no);
    p.text_trigger = get_as<bool>(j, "text_trigger", no);
    p.visual_trigger = get_as<bool>(j, "visual_trigger", no);
    p.flipped = get_as<bool>(j, "flipped", no);
    try {
      p.rule = parse_rule(get_as<std::string>(j, "rule", no));
    } catch (const InputError& e) {
      throw ParseError(where(no) + e.what());
    }
    p.concepts = get_as<std::vector<std::string>>(j, "concepts", no);
    check_unique(seen, p.id, no);
    out.push_back(std::move(p));
  });
  return out;
}

void save_caption_cache(const std::vector<CaptionRecord>& records, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) {
    json j{{"id", r.id}, {"caption", r.caption}, {"log_prob", r.log_prob}};
    if (!r.error.empty()) j["error"] = r.error;
    out << j.dump() << '\n';
  }
}

std::vector<CaptionRecord> load_caption_cache(const std::filesystem::path& path) {
  std::vector<CaptionRecord> out;
  std::set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    const json j = parse_line(line, no);
    CaptionRecord r;
    r.id = get_as<std::string>(j, "id", no);
    r.caption = get_as<std::string>(j, "caption", no);
    r.log_prob = get_as<double>(j, "log_prob", no);
    if (j.contains("error")) r.error = get_as<std::string>(j, "error", no);
    check_unique(seen, r.id, no);
    out.push_back(std::move(r));
  });
  return out;
}

void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "id,proba,label\n";
  char buf[64];
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof buf, "%.6f", p.proba);
    out << p.id << ',' << buf << ',' << p.label << '\n';
  }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,proba,label") {
    throw ParseError(path.string() + ": line 1: expected header 'id,proba,label'");
  }
  std::vector<Prediction> out;
  std::set<std::string> seen;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw ParseError(path.string() + ": line " + std::to_string(no) + ": expected 3 fields");
    Prediction p;
    p.id = line.substr(0, c1);
    try {
      std::size_t used = 0;
      const std::string proba = line.substr(c1 + 1, c2 - c1 - 1);
      p.proba = std::stod(proba, &used);
      if (used != proba.size()) throw std::invalid_argument("trailing characters");
      const std::string label = line.substr(c2 + 1);
      p.label = std::stoi(label, &used);
      if (used != label.size() || (p.label != 0 && p.label != 1)) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": line " + std::to_string(no) + ": malformed proba/label");
    }
    if (!seen.insert(p.id).second) {
      throw IntegrityError(path.string() + ": line " + std::to_string(no) + ": duplicate id '" + p.id + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
}

}  // namespace memetrn
