#include "fcpipe/augment.hpp"

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "fcpipe/common.hpp"

namespace fcpipe::augment {

namespace {

using unified::ToolCall;

// --- shared token helpers ---------------------------------------------------

std::string js(const std::string& s) { return Json(s).dump(); }

std::string jv(const Json& v) { return dump_pyjson(v); }

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto tail = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  if (!head(s[0])) return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!tail(s[i])) return false;
  return true;
}

// Bare name when it is identifier-shaped, JSON string literal otherwise.
std::string name_token(const std::string& s) {
  return is_identifier(s) ? s : js(s);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string xml_unescape(std::string_view s, std::size_t offset) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    auto end = s.find(';', i);
    if (end == std::string_view::npos)
      throw ParseError(offset + i, "unterminated XML entity");
    auto ent = s.substr(i, end - i + 1);
    if (ent == "&amp;") out += '&';
    else if (ent == "&lt;") out += '<';
    else if (ent == "&gt;") out += '>';
    else if (ent == "&quot;") out += '"';
    else if (ent == "&#10;") out += '\n';
    else if (ent == "&#13;") out += '\r';
    else throw ParseError(offset + i, "unknown XML entity " + std::string(ent));
    i = end + 1;
  }
  return out;
}

// --- cursor scanning over the full input ------------------------------------

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;

  bool at_end() const { return pos >= text.size(); }
  char peek() const { return pos < text.size() ? text[pos] : '\0'; }

  [[noreturn]] void fail(const std::string& why) const { throw ParseError(pos, why); }

  void expect(std::string_view lit) {
    if (text.substr(pos, lit.size()) != lit)
      fail("expected \"" + std::string(lit) + "\"");
    pos += lit.size();
  }

  bool consume(std::string_view lit) {
    if (text.substr(pos, lit.size()) != lit) return false;
    pos += lit.size();
    return true;
  }

  void expect_end() {
    if (!at_end()) fail("trailing content");
  }
};

// Scans one JSON string literal starting at c.pos and decodes it.
std::string scan_json_string(Cursor& c) {
  if (c.peek() != '"') c.fail("expected JSON string");
  std::size_t start = c.pos;
  std::size_t i = c.pos + 1;
  while (i < c.text.size()) {
    char ch = c.text[i];
    if (ch == '\\') {
      i += 2;
      continue;
    }
    if (ch == '"') break;
    ++i;
  }
  if (i >= c.text.size()) throw ParseError(start, "unterminated string");
  auto token = c.text.substr(start, i + 1 - start);
  Json parsed;
  try {
    parsed = Json::parse(token);
  } catch (const Json::parse_error& e) {
    throw ParseError(start + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
  c.pos = i + 1;
  return parsed.get<std::string>();
}

// Scans one balanced JSON value (string, number, literal, array or object)
// and parses the covered slice.
Json scan_json_value(Cursor& c) {
  std::size_t start = c.pos;
  if (c.at_end()) c.fail("expected JSON value");
  char first = c.peek();
  std::size_t i = c.pos;
  if (first == '"') {
    Cursor probe{c.text, c.pos};
    scan_json_string(probe);
    i = probe.pos;
  } else if (first == '{' || first == '[') {
    int depth = 0;
    bool in_string = false;
    for (; i < c.text.size(); ++i) {
      char ch = c.text[i];
      if (in_string) {
        if (ch == '\\') ++i;
        else if (ch == '"') in_string = false;
        continue;
      }
      if (ch == '"') in_string = true;
      else if (ch == '{' || ch == '[') ++depth;
      else if (ch == '}' || ch == ']') {
        --depth;
        if (depth == 0) {
          ++i;
          break;
        }
      }
    }
    if (depth != 0) throw ParseError(start, "unbalanced JSON value");
  } else {
    auto scalar = [](char ch) {
      return std::isalnum(static_cast<unsigned char>(ch)) || ch == '+' || ch == '-' || ch == '.';
    };
    while (i < c.text.size() && scalar(c.text[i])) ++i;
    if (i == start) c.fail("expected JSON value");
  }
  auto token = c.text.substr(start, i - start);
  Json parsed;
  try {
    parsed = Json::parse(token);
  } catch (const Json::parse_error& e) {
    throw ParseError(start + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
  c.pos = i;
  return parsed;
}

// Call or argument name: bare identifier or a JSON string literal.
std::string scan_name_token(Cursor& c) {
  if (c.peek() == '"') return scan_json_string(c);
  std::size_t start = c.pos;
  auto tail = [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; };
  while (!c.at_end() && tail(c.peek())) ++c.pos;
  auto tok = std::string(c.text.substr(start, c.pos - start));
  if (!is_identifier(tok)) throw ParseError(start, "expected name");
  return tok;
}

// --- shared JSON shape <-> StepOutput ---------------------------------------

Json call_payload_json(const ToolCall& call) {
  Json o = Json::object();
  o["name"] = call.name;
  o["arguments"] = call.arguments;
  return o;
}

Json output_to_json(const StepOutput& out) {
  Json calls = Json::array();
  for (const auto& c : out.tool_calls) calls.push_back(call_payload_json(c));
  Json o = Json::object();
  o["thought"] = out.thought;
  o["tool_calls"] = std::move(calls);
  return o;
}

ToolCall call_from_json(const Json& j, std::size_t offset) {
  if (!j.is_object()) throw ParseError(offset, "call must be an object");
  if (j.size() != 2 || !j.contains("name") || !j.contains("arguments"))
    throw ParseError(offset, "call must have exactly the keys name and arguments");
  if (!j.at("name").is_string()) throw ParseError(offset, "call name must be a string");
  if (!j.at("arguments").is_object())
    throw ParseError(offset, "call arguments must be an object");
  ToolCall c;
  c.name = j.at("name").get<std::string>();
  c.arguments = j.at("arguments");
  return c;
}

StepOutput output_from_json(const Json& j, std::size_t offset) {
  if (!j.is_object()) throw ParseError(offset, "output must be an object");
  if (j.size() != 2 || !j.contains("thought") || !j.contains("tool_calls"))
    throw ParseError(offset, "output must have exactly the keys thought and tool_calls");
  if (!j.at("thought").is_string()) throw ParseError(offset, "thought must be a string");
  if (!j.at("tool_calls").is_array()) throw ParseError(offset, "tool_calls must be an array");
  StepOutput out;
  out.thought = j.at("thought").get<std::string>();
  for (const auto& c : j.at("tool_calls")) out.tool_calls.push_back(call_from_json(c, offset));
  return out;
}

Json parse_whole_json(std::string_view text, std::size_t base_offset) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(base_offset + (e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
}

struct Line {
  std::string body;
  std::size_t offset;
};

std::vector<Line> lines_of(std::string_view text) {
  std::vector<Line> out;
  for (const auto& [body, offset] : split_lines(text)) out.push_back({body, offset});
  return out;
}

Cursor line_cursor(const Line& ln) {
  // Scans within one line but reports absolute offsets.
  Cursor c{ln.body, 0};
  return c;
}

[[noreturn]] void fail_at(const Line& ln, std::size_t col, const std::string& why) {
  throw ParseError(ln.offset + col, why);
}

// Rebases a ParseError thrown by a line-local cursor to the whole input.
template <typename Fn>
auto with_line_offsets(const Line& ln, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(ln.offset + e.offset(), e.what());
  }
}

// --- json_compact / json_pretty / json_fenced --------------------------------

std::string convert_json_compact(const StepOutput& out) { return jv(output_to_json(out)); }

std::string convert_json_pretty(const StepOutput& out) { return output_to_json(out).dump(2); }

std::string convert_json_fenced(const StepOutput& out) {
  return "```json\n" + output_to_json(out).dump(2) + "\n```";
}

StepOutput parse_json_whole(std::string_view text, std::size_t base_offset) {
  return output_from_json(parse_whole_json(text, base_offset), base_offset);
}

StepOutput parse_json_fenced(std::string_view text) {
  constexpr std::string_view open = "```json\n";
  constexpr std::string_view close = "\n```";
  if (text.substr(0, open.size()) != open) throw ParseError(0, "expected ```json fence");
  if (text.size() < open.size() + close.size() ||
      text.substr(text.size() - close.size()) != close)
    throw ParseError(text.size(), "expected closing ``` fence");
  auto inner = text.substr(open.size(), text.size() - open.size() - close.size());
  return parse_json_whole(inner, open.size());
}

// --- xml ----------------------------------------------------------------------

std::string convert_xml(const StepOutput& out) {
  std::string s = "<output>\n";
  s += "  <thought>" + xml_escape(out.thought) + "</thought>\n";
  if (out.tool_calls.empty()) {
    s += "  <tool_calls></tool_calls>\n";
  } else {
    s += "  <tool_calls>\n";
    for (const auto& call : out.tool_calls) {
      std::string open = "    <call name=\"" + xml_escape(call.name) + "\">";
      if (call.arguments.empty()) {
        s += open + "</call>\n";
      } else {
        s += open + "\n";
        for (const auto& [k, v] : call.arguments.items())
          s += "      <arg name=\"" + xml_escape(k) + "\">" + xml_escape(jv(v)) + "</arg>\n";
        s += "    </call>\n";
      }
    }
    s += "  </tool_calls>\n";
  }
  s += "</output>";
  return s;
}

// Extracts the payload of `<prefix...>payload</tag>` on one line; payload is
// entity-escaped so it never contains a literal '<'.
std::string_view between(const Line& ln, std::string_view head, std::string_view tail) {
  if (ln.body.substr(0, head.size()) != head)
    fail_at(ln, 0, "expected \"" + std::string(head) + "\"");
  auto end = ln.body.rfind(tail);
  if (end == std::string_view::npos || end < head.size() ||
      end + tail.size() != ln.body.size())
    fail_at(ln, ln.body.size(), "expected \"" + std::string(tail) + "\"");
  return std::string_view(ln.body).substr(head.size(), end - head.size());
}

StepOutput parse_xml(std::string_view text) {
  auto lines = lines_of(text);
  std::size_t i = 0;
  auto need = [&](const char* why) -> const Line& {
    if (i >= lines.size()) throw ParseError(text.size(), why);
    return lines[i];
  };
  if (need("expected <output>").body != "<output>") fail_at(lines[i], 0, "expected <output>");
  ++i;
  StepOutput out;
  {
    const Line& ln = need("expected <thought>");
    auto payload = between(ln, "  <thought>", "</thought>");
    out.thought = xml_unescape(payload, ln.offset + 11);
    ++i;
  }
  {
    const Line& ln = need("expected <tool_calls>");
    if (ln.body == "  <tool_calls></tool_calls>") {
      ++i;
    } else if (ln.body == "  <tool_calls>") {
      ++i;
      while (need("expected </tool_calls>").body != "  </tool_calls>") {
        const Line& call_ln = lines[i];
        ToolCall call;
        Cursor c = line_cursor(call_ln);
        with_line_offsets(call_ln, [&] {
          c.expect("    <call name=\"");
          auto quote = call_ln.body.find('"', c.pos);
          if (quote == std::string_view::npos) c.fail("unterminated name attribute");
          call.name = xml_unescape(call_ln.body.substr(c.pos, quote - c.pos), 0);
          c.pos = quote + 1;
          c.expect(">");
          return 0;
        });
        call.arguments = Json::object();
        if (call_ln.body.substr(c.pos) == "</call>") {
          ++i;
        } else {
          with_line_offsets(call_ln, [&] { c.expect_end(); return 0; });
          ++i;
          while (need("expected </call>").body != "    </call>") {
            const Line& arg_ln = lines[i];
            auto payload = between(arg_ln, "      <arg name=\"", "</arg>");
            auto quote = payload.find('"');
            if (quote == std::string_view::npos)
              fail_at(arg_ln, 17, "unterminated name attribute");
            if (payload.substr(quote + 1, 1) != ">")
              fail_at(arg_ln, 17 + quote + 1, "expected \">\"");
            auto key = xml_unescape(payload.substr(0, quote), arg_ln.offset + 17);
            auto frag = xml_unescape(payload.substr(quote + 2), arg_ln.offset + 17 + quote + 2);
            if (call.arguments.contains(key)) fail_at(arg_ln, 17, "duplicate argument " + key);
            call.arguments[key] = parse_whole_json(frag, arg_ln.offset + 17 + quote + 2);
            ++i;
          }
          ++i;  // </call>
        }
        out.tool_calls.push_back(std::move(call));
      }
      ++i;  // </tool_calls>
    } else {
      fail_at(ln, 0, "expected <tool_calls>");
    }
  }
  if (need("expected </output>").body != "</output>") fail_at(lines[i], 0, "expected </output>");
  ++i;
  if (i != lines.size()) fail_at(lines[i], 0, "trailing content");
  return out;
}

// --- yaml (block) -------------------------------------------------------------

std::string convert_yaml(const StepOutput& out) {
  std::string s = "thought: " + js(out.thought) + "\n";
  if (out.tool_calls.empty()) return s + "tool_calls: []";
  s += "tool_calls:";
  for (const auto& call : out.tool_calls) {
    s += "\n  - name: " + js(call.name);
    if (call.arguments.empty()) {
      s += "\n    arguments: {}";
    } else {
      s += "\n    arguments:";
      for (const auto& [k, v] : call.arguments.items())
        s += "\n      " + js(k) + ": " + jv(v);
    }
  }
  return s;
}

StepOutput parse_yaml(std::string_view text) {
  auto lines = lines_of(text);
  std::size_t i = 0;
  auto need = [&](const char* why) -> const Line& {
    if (i >= lines.size()) throw ParseError(text.size(), why);
    return lines[i];
  };
  StepOutput out;
  {
    const Line& ln = need("expected thought line");
    Cursor c = line_cursor(ln);
    out.thought = with_line_offsets(ln, [&] {
      c.expect("thought: ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
    ++i;
  }
  {
    const Line& ln = need("expected tool_calls line");
    if (ln.body == "tool_calls: []") {
      ++i;
    } else if (ln.body == "tool_calls:") {
      ++i;
      while (i < lines.size()) {
        const Line& name_ln = lines[i];
        if (name_ln.body.substr(0, 4) != "  - ") fail_at(name_ln, 0, "expected \"  - name:\"");
        ToolCall call;
        Cursor c = line_cursor(name_ln);
        call.name = with_line_offsets(name_ln, [&] {
          c.expect("  - name: ");
          auto s = scan_json_string(c);
          c.expect_end();
          return s;
        });
        ++i;
        const Line& args_ln = need("expected arguments line");
        call.arguments = Json::object();
        if (args_ln.body == "    arguments: {}") {
          ++i;
        } else if (args_ln.body == "    arguments:") {
          ++i;
          bool saw_entry = false;
          while (i < lines.size() && lines[i].body.substr(0, 6) == "      ") {
            const Line& arg_ln = lines[i];
            Cursor ac = line_cursor(arg_ln);
            with_line_offsets(arg_ln, [&] {
              ac.expect("      ");
              auto key = scan_json_string(ac);
              ac.expect(": ");
              auto value = scan_json_value(ac);
              ac.expect_end();
              if (call.arguments.contains(key))
                throw ParseError(6, "duplicate argument " + key);
              call.arguments[key] = std::move(value);
              return 0;
            });
            saw_entry = true;
            ++i;
          }
          if (!saw_entry) fail_at(need("expected argument entry"), 0, "expected argument entry");
        } else {
          fail_at(args_ln, 0, "expected arguments line");
        }
        out.tool_calls.push_back(std::move(call));
      }
    } else {
      fail_at(ln, 0, "expected tool_calls line");
    }
  }
  if (i != lines.size()) fail_at(lines[i], 0, "trailing content");
  return out;
}

// --- yaml_flow ------------------------------------------------------------------

std::string convert_yaml_flow(const StepOutput& out) {
  std::string s = "{thought: " + js(out.thought) + ", tool_calls: [";
  bool first_call = true;
  for (const auto& call : out.tool_calls) {
    if (!first_call) s += ", ";
    first_call = false;
    s += "{name: " + js(call.name) + ", arguments: {";
    bool first_arg = true;
    for (const auto& [k, v] : call.arguments.items()) {
      if (!first_arg) s += ", ";
      first_arg = false;
      s += js(k) + ": " + jv(v);
    }
    s += "}}";
  }
  return s + "]}";
}

StepOutput parse_yaml_flow(std::string_view text) {
  Cursor c{text, 0};
  StepOutput out;
  c.expect("{thought: ");
  out.thought = scan_json_string(c);
  c.expect(", tool_calls: [");
  if (!c.consume("]")) {
    while (true) {
      ToolCall call;
      c.expect("{name: ");
      call.name = scan_json_string(c);
      c.expect(", arguments: {");
      call.arguments = Json::object();
      if (!c.consume("}")) {
        while (true) {
          std::size_t key_at = c.pos;
          auto key = scan_json_string(c);
          c.expect(": ");
          auto value = scan_json_value(c);
          if (call.arguments.contains(key))
            throw ParseError(key_at, "duplicate argument " + key);
          call.arguments[key] = std::move(value);
          if (c.consume("}")) break;
          c.expect(", ");
        }
      }
      c.expect("}");
      out.tool_calls.push_back(std::move(call));
      if (c.consume("]")) break;
      c.expect(", ");
    }
  }
  c.expect("}");
  c.expect_end();
  return out;
}

// --- plain_kv --------------------------------------------------------------------

std::string convert_plain_kv(const StepOutput& out) {
  std::string s = "thought: " + js(out.thought);
  for (const auto& call : out.tool_calls) s += "\ntool_call: " + jv(call_payload_json(call));
  return s;
}

StepOutput parse_plain_kv(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected thought line");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("thought: ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    if (ln.body.substr(0, 11) != "tool_call: ") fail_at(ln, 0, "expected \"tool_call: \"");
    auto j = parse_whole_json(ln.body.substr(11), ln.offset + 11);
    out.tool_calls.push_back(call_from_json(j, ln.offset + 11));
  }
  return out;
}

// --- markdown_list ------------------------------------------------------------------

std::string convert_markdown_list(const StepOutput& out) {
  std::string s = "- thought: " + js(out.thought) + "\n";
  if (out.tool_calls.empty()) return s + "- tool_calls: []";
  s += "- tool_calls:";
  for (const auto& call : out.tool_calls)
    s += "\n    - " + name_token(call.name) + ": " + jv(call.arguments);
  return s;
}

StepOutput parse_markdown_list(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.size() < 2) throw ParseError(text.size(), "expected two list entries");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("- thought: ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  if (lines[1].body == "- tool_calls: []") {
    if (lines.size() != 2) fail_at(lines[2], 0, "trailing content");
    return out;
  }
  if (lines[1].body != "- tool_calls:") fail_at(lines[1], 0, "expected \"- tool_calls:\"");
  if (lines.size() == 2) throw ParseError(text.size(), "expected call entry");
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    Cursor c = line_cursor(ln);
    ToolCall call = with_line_offsets(ln, [&] {
      ToolCall parsed;
      c.expect("    - ");
      parsed.name = scan_name_token(c);
      c.expect(": ");
      auto args = scan_json_value(c);
      c.expect_end();
      if (!args.is_object()) throw ParseError(0, "arguments must be an object");
      parsed.arguments = std::move(args);
      return parsed;
    });
    out.tool_calls.push_back(std::move(call));
  }
  return out;
}

// --- pythonic_call ----------------------------------------------------------------

std::string convert_pythonic_call(const StepOutput& out) {
  std::string s = "# thought: " + js(out.thought);
  for (const auto& call : out.tool_calls) {
    s += "\n" + name_token(call.name) + "(";
    bool first = true;
    for (const auto& [k, v] : call.arguments.items()) {
      if (!first) s += ", ";
      first = false;
      s += name_token(k) + "=" + jv(v);
    }
    s += ")";
  }
  return s;
}

StepOutput parse_pythonic_call(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected thought comment");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("# thought: ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    Cursor c = line_cursor(ln);
    ToolCall call = with_line_offsets(ln, [&] {
      ToolCall parsed;
      parsed.name = scan_name_token(c);
      c.expect("(");
      parsed.arguments = Json::object();
      if (!c.consume(")")) {
        while (true) {
          std::size_t key_at = c.pos;
          auto key = scan_name_token(c);
          c.expect("=");
          auto value = scan_json_value(c);
          if (parsed.arguments.contains(key))
            throw ParseError(key_at, "duplicate argument " + key);
          parsed.arguments[key] = std::move(value);
          if (c.consume(")")) break;
          c.expect(", ");
        }
      }
      c.expect_end();
      return parsed;
    });
    out.tool_calls.push_back(std::move(call));
  }
  return out;
}

// --- tagged_call -------------------------------------------------------------------

std::string convert_tagged_call(const StepOutput& out) {
  std::string s = "<thought>" + xml_escape(out.thought) + "</thought>";
  for (const auto& call : out.tool_calls)
    s += "\n<call>" + xml_escape(jv(call_payload_json(call))) + "</call>";
  return s;
}

StepOutput parse_tagged_call(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected <thought> line");
  StepOutput out;
  out.thought = xml_unescape(between(lines[0], "<thought>", "</thought>"), lines[0].offset + 9);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    auto payload = xml_unescape(between(ln, "<call>", "</call>"), ln.offset + 6);
    auto j = parse_whole_json(payload, ln.offset + 6);
    out.tool_calls.push_back(call_from_json(j, ln.offset + 6));
  }
  return out;
}

// --- tsv_args ---------------------------------------------------------------------

std::string convert_tsv_args(const StepOutput& out) {
  // JSON string escaping covers tabs, so the field separators stay unambiguous.
  std::string s = "thought\t" + js(out.thought);
  for (const auto& call : out.tool_calls)
    s += "\ncall\t" + js(call.name) + "\t" + jv(call.arguments);
  return s;
}

StepOutput parse_tsv_args(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected thought row");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("thought\t");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    Cursor c = line_cursor(ln);
    ToolCall call = with_line_offsets(ln, [&] {
      ToolCall parsed;
      c.expect("call\t");
      parsed.name = scan_json_string(c);
      c.expect("\t");
      auto args = scan_json_value(c);
      c.expect_end();
      if (!args.is_object()) throw ParseError(0, "arguments must be an object");
      parsed.arguments = std::move(args);
      return parsed;
    });
    out.tool_calls.push_back(std::move(call));
  }
  return out;
}

// --- bulleted_text ----------------------------------------------------------------

std::string convert_bulleted_text(const StepOutput& out) {
  std::string s = "* Thought: " + js(out.thought);
  for (const auto& call : out.tool_calls)
    s += "\n* Call " + name_token(call.name) + " with arguments " + jv(call.arguments);
  return s;
}

StepOutput parse_bulleted_text(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected thought bullet");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("* Thought: ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    Cursor c = line_cursor(ln);
    ToolCall call = with_line_offsets(ln, [&] {
      ToolCall parsed;
      c.expect("* Call ");
      parsed.name = scan_name_token(c);
      c.expect(" with arguments ");
      auto args = scan_json_value(c);
      c.expect_end();
      if (!args.is_object()) throw ParseError(0, "arguments must be an object");
      parsed.arguments = std::move(args);
      return parsed;
    });
    out.tool_calls.push_back(std::move(call));
  }
  return out;
}

// --- numbered_text ----------------------------------------------------------------

std::string convert_numbered_text(const StepOutput& out) {
  std::string s = "Thought: " + js(out.thought);
  for (std::size_t i = 0; i < out.tool_calls.size(); ++i) {
    const auto& call = out.tool_calls[i];
    s += "\n" + std::to_string(i + 1) + ". " + name_token(call.name) + " " + jv(call.arguments);
  }
  return s;
}

StepOutput parse_numbered_text(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected thought line");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("Thought: ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    Cursor c = line_cursor(ln);
    ToolCall call = with_line_offsets(ln, [&] {
      std::size_t start = c.pos;
      while (!c.at_end() && std::isdigit(static_cast<unsigned char>(c.peek()))) ++c.pos;
      if (c.pos == start) throw ParseError(0, "expected line number");
      auto num = std::string(c.text.substr(start, c.pos - start));
      if (num != std::to_string(i)) throw ParseError(start, "expected line number " + std::to_string(i));
      c.expect(". ");
      ToolCall parsed;
      parsed.name = scan_name_token(c);
      c.expect(" ");
      auto args = scan_json_value(c);
      c.expect_end();
      if (!args.is_object()) throw ParseError(0, "arguments must be an object");
      parsed.arguments = std::move(args);
      return parsed;
    });
    out.tool_calls.push_back(std::move(call));
  }
  return out;
}

// --- key_equals --------------------------------------------------------------------

std::string convert_key_equals(const StepOutput& out) {
  Json calls = Json::array();
  for (const auto& c : out.tool_calls) calls.push_back(call_payload_json(c));
  return "thought = " + js(out.thought) + "\ntool_calls = " + jv(calls);
}

StepOutput parse_key_equals(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.size() != 2) throw ParseError(text.size(), "expected exactly two assignment lines");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("thought = ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  const Line& ln = lines[1];
  if (ln.body.substr(0, 13) != "tool_calls = ") fail_at(ln, 0, "expected \"tool_calls = \"");
  auto j = parse_whole_json(ln.body.substr(13), ln.offset + 13);
  if (!j.is_array()) fail_at(ln, 13, "tool_calls must be an array");
  for (const auto& c : j) out.tool_calls.push_back(call_from_json(c, ln.offset + 13));
  return out;
}

// --- bracket_call ------------------------------------------------------------------

std::string convert_bracket_call(const StepOutput& out) {
  std::string s = "[THOUGHT] " + js(out.thought);
  for (const auto& call : out.tool_calls)
    s += "\n[CALL " + name_token(call.name) + "] " + jv(call.arguments);
  return s;
}

StepOutput parse_bracket_call(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(0, "expected [THOUGHT] line");
  StepOutput out;
  {
    Cursor c = line_cursor(lines[0]);
    out.thought = with_line_offsets(lines[0], [&] {
      c.expect("[THOUGHT] ");
      auto s = scan_json_string(c);
      c.expect_end();
      return s;
    });
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    Cursor c = line_cursor(ln);
    ToolCall call = with_line_offsets(ln, [&] {
      ToolCall parsed;
      c.expect("[CALL ");
      parsed.name = scan_name_token(c);
      c.expect("] ");
      auto args = scan_json_value(c);
      c.expect_end();
      if (!args.is_object()) throw ParseError(0, "arguments must be an object");
      parsed.arguments = std::move(args);
      return parsed;
    });
    out.tool_calls.push_back(std::move(call));
  }
  return out;
}

// --- instruction catalog -----------------------------------------------------------

const StepOutput& instruction_example() {
  static const StepOutput ex = [] {
    StepOutput o;
    o.thought = "the thought process, or an empty string";
    ToolCall c;
    c.name = "api_name1";
    c.arguments = Json::object();
    c.arguments["argument1"] = "value1";
    c.arguments["argument2"] = "value2";
    o.tool_calls.push_back(std::move(c));
    return o;
  }();
  return ex;
}

std::string instruction_prefix(FormatId f) {
  switch (f) {
    case FormatId::JsonCompact:
      return "Your output should be in the JSON format, which specifies a list of function "
             "calls. The example format is as follows. Please make sure the parameter type "
             "is correct. If no function call is needed, please make tool_calls an empty "
             "list \"[]\".";
    case FormatId::JsonPretty:
      return "Your output should be in the pretty-printed JSON format, which specifies a "
             "list of function calls across indented lines. The example format is as "
             "follows. Please make sure the parameter type is correct. If no function call "
             "is needed, please make tool_calls an empty list \"[]\".";
    case FormatId::JsonFenced:
      return "Your output should be in the fenced JSON format, which wraps the JSON object "
             "in a ```json code fence. The example format is as follows. Please make sure "
             "the parameter type is correct. If no function call is needed, please make "
             "tool_calls an empty list \"[]\".";
    case FormatId::Xml:
      return "Your output should be in the XML format, which nests each function call "
             "inside a <tool_calls> element. The example format is as follows. Please make "
             "sure the parameter type is correct. If no function call is needed, please "
             "leave the <tool_calls> element empty.";
    case FormatId::Yaml:
      return "Your output should be in the YAML format, which lists each function call as "
             "a block sequence entry. The example format is as follows. Please make sure "
             "the parameter type is correct. If no function call is needed, please make "
             "tool_calls an empty list \"[]\".";
    case FormatId::PlainKv:
      return "Your output should be in the plain key-value format, which puts the thought "
             "and each function call on its own prefixed line. The example format is as "
             "follows. Please make sure the parameter type is correct. If no function call "
             "is needed, please emit only the thought line.";
    case FormatId::MarkdownList:
      return "Your output should be in the Markdown list format, which lists each function "
             "call as a nested bullet. The example format is as follows. Please make sure "
             "the parameter type is correct. If no function call is needed, please make "
             "tool_calls an empty list \"[]\".";
    case FormatId::PythonicCall:
      return "Your output should be in the pythonic call format, which writes each "
             "function call as a Python-style invocation on its own line. The example "
             "format is as follows. Please make sure the parameter type is correct. If no "
             "function call is needed, please emit only the thought comment line.";
    case FormatId::TaggedCall:
      return "Your output should be in the tagged call format, which wraps the thought and "
             "each function call in angle-bracket tags. The example format is as follows. "
             "Please make sure the parameter type is correct. If no function call is "
             "needed, please emit only the <thought> line.";
    case FormatId::TsvArgs:
      return "Your output should be in the TSV format, which separates the fields of each "
             "line with tab characters. The example format is as follows. Please make sure "
             "the parameter type is correct. If no function call is needed, please emit "
             "only the thought row.";
    case FormatId::BulletedText:
      return "Your output should be in the bulleted text format, which lists the thought "
             "and each function call as \"*\" bullets. The example format is as follows. "
             "Please make sure the parameter type is correct. If no function call is "
             "needed, please emit only the thought bullet.";
    case FormatId::NumberedText:
      return "Your output should be in the numbered text format, which lists each function "
             "call on a numbered line. The example format is as follows. Please make sure "
             "the parameter type is correct. If no function call is needed, please emit "
             "only the thought line.";
    case FormatId::KeyEquals:
      return "Your output should be in the key-equals format, which assigns the thought "
             "and the list of function calls with \"=\". The example format is as follows. "
             "Please make sure the parameter type is correct. If no function call is "
             "needed, please make tool_calls an empty list \"[]\".";
    case FormatId::BracketCall:
      return "Your output should be in the bracket call format, which prefixes each line "
             "with a bracketed directive. The example format is as follows. Please make "
             "sure the parameter type is correct. If no function call is needed, please "
             "emit only the [THOUGHT] line.";
    case FormatId::YamlFlow:
      return "Your output should be in the YAML flow format, which writes the whole output "
             "as one single-line flow mapping. The example format is as follows. Please "
             "make sure the parameter type is correct. If no function call is needed, "
             "please make tool_calls an empty list \"[]\".";
  }
  throw ConfigError("unknown format id");
}

}  // namespace

const std::array<FormatId, kFormatCount>& all_formats() {
  static const std::array<FormatId, kFormatCount> ids = {
      FormatId::JsonCompact,  FormatId::JsonPretty,   FormatId::JsonFenced,
      FormatId::Xml,          FormatId::Yaml,         FormatId::PlainKv,
      FormatId::MarkdownList, FormatId::PythonicCall, FormatId::TaggedCall,
      FormatId::TsvArgs,      FormatId::BulletedText, FormatId::NumberedText,
      FormatId::KeyEquals,    FormatId::BracketCall,  FormatId::YamlFlow,
  };
  return ids;
}

std::string to_string(FormatId f) {
  switch (f) {
    case FormatId::JsonCompact: return "json_compact";
    case FormatId::JsonPretty: return "json_pretty";
    case FormatId::JsonFenced: return "json_fenced";
    case FormatId::Xml: return "xml";
    case FormatId::Yaml: return "yaml";
    case FormatId::PlainKv: return "plain_kv";
    case FormatId::MarkdownList: return "markdown_list";
    case FormatId::PythonicCall: return "pythonic_call";
    case FormatId::TaggedCall: return "tagged_call";
    case FormatId::TsvArgs: return "tsv_args";
    case FormatId::BulletedText: return "bulleted_text";
    case FormatId::NumberedText: return "numbered_text";
    case FormatId::KeyEquals: return "key_equals";
    case FormatId::BracketCall: return "bracket_call";
    case FormatId::YamlFlow: return "yaml_flow";
  }
  throw ConfigError("unknown format id");
}

std::optional<FormatId> format_from_string(std::string_view s) {
  for (FormatId f : all_formats())
    if (to_string(f) == s) return f;
  return std::nullopt;
}

std::string convert_output(const StepOutput& out, FormatId f) {
  switch (f) {
    case FormatId::JsonCompact: return convert_json_compact(out);
    case FormatId::JsonPretty: return convert_json_pretty(out);
    case FormatId::JsonFenced: return convert_json_fenced(out);
    case FormatId::Xml: return convert_xml(out);
    case FormatId::Yaml: return convert_yaml(out);
    case FormatId::PlainKv: return convert_plain_kv(out);
    case FormatId::MarkdownList: return convert_markdown_list(out);
    case FormatId::PythonicCall: return convert_pythonic_call(out);
    case FormatId::TaggedCall: return convert_tagged_call(out);
    case FormatId::TsvArgs: return convert_tsv_args(out);
    case FormatId::BulletedText: return convert_bulleted_text(out);
    case FormatId::NumberedText: return convert_numbered_text(out);
    case FormatId::KeyEquals: return convert_key_equals(out);
    case FormatId::BracketCall: return convert_bracket_call(out);
    case FormatId::YamlFlow: return convert_yaml_flow(out);
  }
  throw ConfigError("unknown format id");
}

StepOutput parse_output(std::string_view text, FormatId f) {
  // Trailing newline or spaces are tolerated; everything else is exact.
  while (!text.empty()) {
    char c = text.back();
    if (c == '\n' || c == '\r' || c == ' ' || c == '\t') text.remove_suffix(1);
    else break;
  }
  if (!text.empty()) {
    char c = text.front();
    if (c == '\n' || c == '\r' || c == ' ' || c == '\t')
      throw ParseError(0, "unexpected leading whitespace");
  }
  switch (f) {
    case FormatId::JsonCompact:
    case FormatId::JsonPretty: return parse_json_whole(text, 0);
    case FormatId::JsonFenced: return parse_json_fenced(text);
    case FormatId::Xml: return parse_xml(text);
    case FormatId::Yaml: return parse_yaml(text);
    case FormatId::PlainKv: return parse_plain_kv(text);
    case FormatId::MarkdownList: return parse_markdown_list(text);
    case FormatId::PythonicCall: return parse_pythonic_call(text);
    case FormatId::TaggedCall: return parse_tagged_call(text);
    case FormatId::TsvArgs: return parse_tsv_args(text);
    case FormatId::BulletedText: return parse_bulleted_text(text);
    case FormatId::NumberedText: return parse_numbered_text(text);
    case FormatId::KeyEquals: return parse_key_equals(text);
    case FormatId::BracketCall: return parse_bracket_call(text);
    case FormatId::YamlFlow: return parse_yaml_flow(text);
  }
  throw ConfigError("unknown format id");
}

std::string format_instruction(FormatId f) {
  return instruction_prefix(f) + "\n\"\"\"\n" + convert_output(instruction_example(), f) +
         "\n\"\"\"";
}

}  // namespace fcpipe::augment
