#include "losscost_tools/model_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace losscost::tools {

namespace {

using nlohmann::json;

// Forward iterator over the text that publishes how far the parser has read,
// so SAX events can be tied to a line.
class CountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  CountingIterator() = default;
  CountingIterator(const char* p, const char* base, std::size_t* offset)
      : p_(p), base_(base), offset_(offset) {}

  reference operator*() const { return *p_; }
  CountingIterator& operator++() {
    ++p_;
    if (offset_ != nullptr) *offset_ = static_cast<std::size_t>(p_ - base_);
    return *this;
  }
  CountingIterator operator++(int) {
    auto copy = *this;
    ++*this;
    return copy;
  }
  bool operator==(const CountingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const CountingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_ = nullptr;
  const char* base_ = nullptr;
  std::size_t* offset_ = nullptr;
};

// Records the line of every value by JSON pointer.
class LineMapper : public nlohmann::json_sax<json> {
 public:
  LineMapper(const std::string& text, const std::size_t* offset) : offset_(offset) {
    for (std::size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') newlines_.push_back(i);
  }

  std::map<std::string, int> lines;

  int line_at(std::size_t offset) const {
    // offset is one past the last consumed character
    const std::size_t pos = offset == 0 ? 0 : offset - 1;
    return 1 + static_cast<int>(std::lower_bound(newlines_.begin(), newlines_.end(), pos) -
                                newlines_.begin());
  }

  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }
  bool start_object(std::size_t) override {
    value();
    stack_.push_back({false, {}, 0});
    return true;
  }
  bool key(string_t& k) override {
    stack_.back().key = k;
    lines[pointer_with(k)] = line_at(*offset_);
    return true;
  }
  bool end_object() override {
    stack_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    value();
    stack_.push_back({true, {}, 0});
    return true;
  }
  bool end_array() override {
    stack_.pop_back();
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override {
    return false;
  }

 private:
  struct Frame {
    bool array;
    std::string key;
    std::size_t index;
  };

  static std::string escape(const std::string& k) {
    std::string out;
    for (char c : k) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  std::string prefix() const {
    std::string p;
    for (std::size_t i = 0; i < stack_.size(); ++i) {
      // every frame but the innermost contributes its current member
      if (i + 1 == stack_.size()) break;
      const auto& f = stack_[i];
      p += "/" + (f.array ? std::to_string(f.index - 1) : escape(f.key));
    }
    return p;
  }

  std::string pointer_with(const std::string& k) const { return prefix() + "/" + escape(k); }

  bool value() {
    if (stack_.empty()) {
      lines[""] = line_at(*offset_);
      return true;
    }
    auto& top = stack_.back();
    if (top.array) {
      ++top.index;
      lines[prefix() + "/" + std::to_string(top.index - 1)] = line_at(*offset_);
    }
    return true;
  }

  const std::size_t* offset_;
  std::vector<std::size_t> newlines_;
  std::vector<Frame> stack_;
};

class Reader {
 public:
  Reader(std::string source, const std::map<std::string, int>& lines)
      : source_(std::move(source)), lines_(lines) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    int line = 0;
    // fall back to the closest enclosing value that has a line
    std::string p = pointer;
    while (true) {
      if (auto it = lines_.find(p); it != lines_.end()) {
        line = it->second;
        break;
      }
      const auto cut = p.rfind('/');
      if (cut == std::string::npos) break;
      p = p.substr(0, cut);
    }
    throw ModelError(source_, line, field_name(pointer), message);
  }

  static std::string field_name(const std::string& pointer) {
    // "/classes/0/mu" -> "classes[0].mu"
    std::string out;
    std::size_t pos = 1;
    while (pos <= pointer.size() && pos > 0) {
      const auto next = pointer.find('/', pos);
      const auto token = pointer.substr(pos, next == std::string::npos ? std::string::npos
                                                                        : next - pos);
      if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) {
        out += "[" + token + "]";
      } else {
        if (!out.empty()) out += ".";
        out += token;
      }
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return out.empty() ? "(document)" : out;
  }

  void require_object(const json& j, const std::string& ptr) const {
    if (!j.is_object()) fail(ptr, "must be an object");
  }

  void only_keys(const json& j, const std::string& ptr,
                 std::initializer_list<const char*> allowed) const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) {
        std::string list;
        for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(ptr + "/" + it.key(), fmt::format("unknown key (expected one of: {})", list));
      }
    }
  }

  const json& member(const json& j, const std::string& ptr, const char* key) const {
    if (!j.contains(key)) fail(ptr + "/" + key, "is required");
    return j.at(key);
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "must be a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(ptr, "must be finite");
    return x;
  }

  int integer(const json& j, const std::string& ptr) const {
    if (j.is_number_integer()) {
      const auto v = j.get<long long>();
      if (v < -2147483647LL || v > 2147483647LL) fail(ptr, "is out of range");
      return static_cast<int>(v);
    }
    if (j.is_number_float()) {
      const double x = j.get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 2147483647.0)
        return static_cast<int>(x);
      fail(ptr, "must be an integer");
    }
    fail(ptr, "must be an integer");
  }

 private:
  std::string source_;
  const std::map<std::string, int>& lines_;
};

}  // namespace

ModelError::ModelError(std::string source, int line, std::string field,
                       const std::string& message)
    : ValidationError(line > 0 ? fmt::format("{}:{}: {}: {}", source, line, field, message)
                               : fmt::format("{}: {}: {}", source, field, message)),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

Model parse_model(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size() + 1) && i < text.size(); ++i)
      if (text[i] == '\n' && i + 1 < e.byte) ++line;
    std::string what = e.what();
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    throw ModelError(source, line, "(syntax)", what);
  }

  std::size_t offset = 0;
  LineMapper mapper(text, &offset);
  CountingIterator first(text.data(), text.data(), &offset);
  CountingIterator last(text.data() + text.size(), text.data(), nullptr);
  json::sax_parse(first, last, &mapper);
  const Reader rd(source, mapper.lines);

  rd.require_object(doc, "");
  rd.only_keys(doc, "", {"classes", "policy"});

  Model model;
  const json& classes = rd.member(doc, "", "classes");
  if (!classes.is_array()) rd.fail("/classes", "must be an array");
  if (classes.empty()) rd.fail("/classes", "must contain at least one class");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string ptr = "/classes/" + std::to_string(i);
    const json& c = classes[i];
    rd.require_object(c, ptr);
    rd.only_keys(c, ptr, {"lambda", "mu", "bandwidth", "omega"});
    TrafficClass tc;
    tc.lambda = rd.number(rd.member(c, ptr, "lambda"), ptr + "/lambda");
    if (tc.lambda < 0.0) rd.fail(ptr + "/lambda", "must be non-negative");
    tc.mu = rd.number(rd.member(c, ptr, "mu"), ptr + "/mu");
    if (!(tc.mu > 0.0)) rd.fail(ptr + "/mu", "must be positive");
    tc.bandwidth = rd.integer(rd.member(c, ptr, "bandwidth"), ptr + "/bandwidth");
    if (tc.bandwidth < 1) rd.fail(ptr + "/bandwidth", "must be at least 1");
    tc.omega = rd.integer(rd.member(c, ptr, "omega"), ptr + "/omega");
    if (tc.omega < 0) rd.fail(ptr + "/omega", "must be non-negative");
    model.classes.push_back(tc);
  }
  if (model.classes.size() > 16) rd.fail("/classes", "at most 16 classes are supported");

  const json& policy = rd.member(doc, "", "policy");
  rd.require_object(policy, "/policy");
  const json& type = rd.member(policy, "/policy", "type");
  if (!type.is_string()) rd.fail("/policy/type", "must be a string");
  const auto kind = type.get<std::string>();
  if (kind == "full_sharing") {
    rd.only_keys(policy, "/policy", {"type", "capacity"});
    const int cap = rd.integer(rd.member(policy, "/policy", "capacity"), "/policy/capacity");
    if (cap < 0) rd.fail("/policy/capacity", "must be non-negative");
    model.policy = FullSharing{cap};
  } else if (kind == "per_class") {
    rd.only_keys(policy, "/policy", {"type", "thresholds"});
    const json& th = rd.member(policy, "/policy", "thresholds");
    if (!th.is_array()) rd.fail("/policy/thresholds", "must be an array");
    if (th.size() != model.classes.size())
      rd.fail("/policy/thresholds",
              fmt::format("has {} entries for {} classes", th.size(), model.classes.size()));
    PerClassThreshold p;
    for (std::size_t i = 0; i < th.size(); ++i) {
      const std::string ptr = "/policy/thresholds/" + std::to_string(i);
      const int v = rd.integer(th[i], ptr);
      if (v < 0) rd.fail(ptr, "must be non-negative");
      p.thresholds.push_back(v);
    }
    model.policy = std::move(p);
  } else {
    rd.fail("/policy/type", fmt::format("unknown policy \"{}\" (expected full_sharing or "
                                        "per_class)",
                                        kind));
  }

  validate_classes(model.classes);
  validate_policy(model.policy, model.classes.size());
  model.document = std::move(doc);
  return model;
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(path, 0, "(file)", "cannot open model file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str(), path);
}

nlohmann::json model_to_json(const std::vector<TrafficClass>& classes,
                             const AdmissionPolicy& policy) {
  json doc;
  doc["classes"] = json::array();
  for (const auto& c : classes)
    doc["classes"].push_back(
        {{"lambda", c.lambda}, {"mu", c.mu}, {"bandwidth", c.bandwidth}, {"omega", c.omega}});
  if (const auto* fs = std::get_if<FullSharing>(&policy)) {
    doc["policy"] = {{"type", "full_sharing"}, {"capacity", fs->capacity}};
  } else {
    doc["policy"] = {{"type", "per_class"},
                     {"thresholds", std::get<PerClassThreshold>(policy).thresholds}};
  }
  return doc;
}

}  // namespace losscost::tools
