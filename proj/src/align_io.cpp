#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "scriptalign/align.hpp"
#include "scriptalign/error.hpp"
#include "scriptalign/image_io.hpp"

namespace scriptalign {

namespace {

using nlohmann::ordered_json;

void check_shapes(const Document& left, const Document& right, std::span<const AlignmentResult> results) {
  if (left.lines.size() != results.size() || right.lines.size() != results.size()) {
    throw LinePairingError("alignment results do not match the documents' line counts");
  }
}

const SubwordAnnotation& token_at(const TextLine& line, std::size_t pos) {
  if (pos >= line.size()) throw InternalError("alignment op points past the end of its line");
  return line.tokens[pos];
}

ordered_json locator(const TextLine& line, const std::optional<std::size_t>& pos) {
  if (!pos) return nullptr;
  const auto& tok = token_at(line, *pos);
  return ordered_json{{"page", tok.page}, {"line", tok.line}, {"position", tok.position}};
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string base64(const std::vector<std::uint8_t>& bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
    if (i + 2 < bytes.size()) chunk |= bytes[i + 2];
    out += kAlphabet[(chunk >> 18) & 63];
    out += kAlphabet[(chunk >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(chunk >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kAlphabet[chunk & 63] : '=';
  }
  return out;
}

std::string html_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string token_cell(const TextLine& line, const std::optional<std::size_t>& pos) {
  if (!pos) return "<td class=\"gap\">&mdash;</td>";
  const auto& tok = token_at(line, *pos);
  std::string cell = "<td>";
  if (tok.image) {
    cell += "<img alt=\"" + html_escape(tok.form_id) + "\" src=\"data:image/png;base64," +
            base64(encode_png(*tok.image)) + "\"><br>";
  }
  cell += "<span>" + html_escape(tok.form_id) + " @" + std::to_string(tok.position) + "</span></td>";
  return cell;
}

}  // namespace

std::string alignment_to_json(const Document& left, const Document& right,
                              std::span<const AlignmentResult> results) {
  check_shapes(left, right, results);
  ordered_json ops = ordered_json::array();
  for (std::size_t l = 0; l < results.size(); ++l) {
    for (const auto& op : results[l].ops) {
      ops.push_back(ordered_json{{"kind", to_string(op.kind)},
                                 {"left", locator(left.lines[l], op.left_pos)},
                                 {"right", locator(right.lines[l], op.right_pos)},
                                 {"confidence", op.confidence},
                                 {"low_confidence", op.low_confidence}});
    }
  }
  return ops.dump(2) + "\n";
}

std::string alignment_to_tsv(const Document& left, const Document& right,
                             std::span<const AlignmentResult> results) {
  check_shapes(left, right, results);
  std::ostringstream out;
  out << "line_index\tkind\tleft_page\tleft_line\tleft_position\tleft_form\t"
         "right_page\tright_line\tright_position\tright_form\tconfidence\tlow_confidence\n";
  auto side = [&](const TextLine& line, const std::optional<std::size_t>& pos) {
    if (!pos) {
      out << "\t\t\t\t";
      return;
    }
    const auto& tok = token_at(line, *pos);
    out << tok.page << '\t' << tok.line << '\t' << tok.position << '\t' << tok.form_id << '\t';
  };
  for (std::size_t l = 0; l < results.size(); ++l) {
    for (const auto& op : results[l].ops) {
      out << l << '\t' << to_string(op.kind) << '\t';
      side(left.lines[l], op.left_pos);
      side(right.lines[l], op.right_pos);
      out << fixed(op.confidence) << '\t' << (op.low_confidence ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string alignment_to_html(const Document& left, const Document& right,
                              std::span<const AlignmentResult> results) {
  check_shapes(left, right, results);
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>"
      << html_escape(left.manuscript_id) << " vs " << html_escape(right.manuscript_id)
      << "</title>\n<style>\n"
         "body{font-family:sans-serif;margin:1em}\n"
         "table{border-collapse:collapse;margin-bottom:1.5em}\n"
         "td,th{border:1px solid #ccc;padding:4px;text-align:center;vertical-align:middle}\n"
         "img{height:48px;background:#fff;filter:invert(1)}\n"
         "tr.match{background:#eef8ee}tr.swap{background:#fdf3dc}\n"
         "tr.insert_left,tr.insert_right{background:#fbe9e9}\n"
         "tr.low td{font-style:italic;opacity:.75}td.gap{color:#999}\n"
         "</style></head><body>\n<h1>"
      << html_escape(left.manuscript_id) << " &harr; " << html_escape(right.manuscript_id) << "</h1>\n";
  for (std::size_t l = 0; l < results.size(); ++l) {
    const auto& r = results[l];
    out << "<h2>Line " << l << "</h2>\n<p>coverage left " << fixed(r.left_coverage) << ", right "
        << fixed(r.right_coverage) << "</p>\n<table><tr><th>kind</th><th>"
        << html_escape(left.manuscript_id) << "</th><th>" << html_escape(right.manuscript_id)
        << "</th><th>confidence</th></tr>\n";
    for (const auto& op : r.ops) {
      out << "<tr class=\"" << to_string(op.kind) << (op.low_confidence ? " low" : "") << "\"><td>"
          << to_string(op.kind) << "</td>" << token_cell(left.lines[l], op.left_pos)
          << token_cell(right.lines[l], op.right_pos) << "<td>" << fixed(op.confidence) << "</td></tr>\n";
    }
    out << "</table>\n";
  }
  out << "</body></html>\n";
  return out.str();
}

}  // namespace scriptalign
