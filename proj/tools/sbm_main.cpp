// sbm — turn an STPA analysis into a verified safe behavior model.
//
//   validate  diagnostics for an analysis file
//   ltl       the generated temporal obligations, one per rule context
//   synth     machine synthesis, emitted as text, JSON, or DOT
//   verify    exhaustive bounded check of the machine against its obligations
//   simulate  scripted run of an emitted machine
//
// Exit codes: 0 clean; 1 findings (ERROR diagnostics or violated obligations);
// 2 usage, I/O, or parse failure.
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbm/emit.hpp"
#include "sbm/parse.hpp"
#include "sbm/stpa.hpp"
#include "sbm/synth.hpp"
#include "sbm/verify.hpp"

namespace {

constexpr int kClean = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  return static_cast<bool>(out);
}

/// Parse an .stpa file; on failure print the errors and return nothing.
std::optional<sbm::StpaModel> load_model(const std::string& path) {
  std::optional<std::string> source = read_file(path);
  if (!source) {
    std::cerr << "error: cannot read '" << path << "'\n";
    return std::nullopt;
  }
  sbm::ParseResult result = sbm::parse_model(*source);
  for (const sbm::ParseError& e : result.errors)
    std::cerr << path << ":" << e.span.line << ":" << e.span.column << ": error: " << e.message
              << "\n";
  return result.model;
}

void print_diagnostics(const std::vector<sbm::Diagnostic>& diags) {
  for (const sbm::Diagnostic& d : diags) {
    std::cout << (d.severity == sbm::Diagnostic::Severity::Error ? "ERROR" : "WARNING");
    if (!d.rules.empty()) {
      std::cout << " [";
      for (std::size_t i = 0; i < d.rules.size(); ++i) std::cout << (i ? ", " : "") << d.rules[i];
      std::cout << "]";
    }
    std::cout << ": " << d.message << "\n";
  }
}

/// Validate before synthesis; ERROR diagnostics are findings, not usage.
std::optional<int> reject_invalid(const sbm::StpaModel& model) {
  std::vector<sbm::Diagnostic> diags = sbm::validate(model);
  if (!sbm::has_errors(diags)) return std::nullopt;
  print_diagnostics(diags);
  return kFindings;
}

void print_notes(const sbm::SynthResult& syn) {
  for (const sbm::Note& note : syn.notes) {
    std::cout << "note";
    if (!note.rule_id.empty()) std::cout << " [" << note.rule_id << "]";
    std::cout << ": " << note.message << "\n";
  }
}

int run_validate(const std::string& file) {
  std::optional<sbm::StpaModel> model = load_model(file);
  if (!model) return kUsage;
  std::vector<sbm::Diagnostic> diags = sbm::validate(*model);
  print_diagnostics(diags);
  if (sbm::has_errors(diags)) return kFindings;
  std::cout << "ok\n";
  return kClean;
}

int run_ltl(const std::string& file, bool as_json) {
  std::optional<sbm::StpaModel> model = load_model(file);
  if (!model) return kUsage;
  if (std::optional<int> bad = reject_invalid(*model)) return *bad;

  sbm::ValuationSpace space(*model);
  std::vector<sbm::TranslatedRule> rules = sbm::translate_all(*model, space);
  if (as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const sbm::TranslatedRule& rule : rules)
      arr.push_back({{"id", rule.instance.id},
                     {"shape", sbm::shape_label(rule.instance.shape)},
                     {"action", rule.instance.action},
                     {"formula", sbm::to_string(rule.formula)}});
    std::cout << arr.dump(2) << "\n";
  } else {
    for (const sbm::TranslatedRule& rule : rules)
      std::cout << rule.instance.id << ": " << sbm::to_string(rule.formula) << "\n";
  }
  return kClean;
}

int run_synth(const std::string& file, const std::string& out, std::string format) {
  std::optional<sbm::StpaModel> model = load_model(file);
  if (!model) return kUsage;
  if (std::optional<int> bad = reject_invalid(*model)) return *bad;

  if (format.empty()) {
    if (out.size() >= 5 && out.rfind(".json") == out.size() - 5) format = "json";
    else if (out.size() >= 4 && out.rfind(".dot") == out.size() - 4) format = "dot";
    else format = "text";
  }

  sbm::SynthResult syn = sbm::synthesize(*model);
  print_notes(syn);

  std::string rendered;
  if (format == "text") rendered = sbm::emit_textual(syn.chart, syn.formulas);
  else if (format == "json") rendered = sbm::emit_json(syn.chart, syn.formulas);
  else rendered = sbm::emit_dot(syn.chart);
  if (!write_file(out, rendered)) {
    std::cerr << "error: cannot write '" << out << "'\n";
    return kUsage;
  }
  std::cout << "wrote " << out << " (" << syn.chart.states.size() << " states, "
            << syn.chart.transitions.size() << " transitions)\n";
  return kClean;
}

int run_verify(const std::string& file, int bound, const std::string& report) {
  std::optional<sbm::StpaModel> model = load_model(file);
  if (!model) return kUsage;
  if (bound < 1) {
    std::cerr << "error: --bound must be at least 1\n";
    return kUsage;
  }
  if (std::optional<int> bad = reject_invalid(*model)) return *bad;

  sbm::SynthResult syn = sbm::synthesize(*model);
  print_notes(syn);
  sbm::Verdict verdict = sbm::check(syn.chart, syn.formulas, static_cast<std::size_t>(bound));

  for (const sbm::FormulaVerdict& f : verdict.formulas) {
    std::cout << f.id << " " << sbm::shape_label(f.shape) << ": ";
    if (f.too_early) std::cout << "not guaranteed (" << (f.holds ? "holds" : "violated") << ")\n";
    else std::cout << (f.holds ? "holds" : "violated") << "\n";
  }
  std::cout << (verdict.ok() ? "ok" : "violations found") << " — checked " << verdict.lasso_count
            << " input lassos up to length " << verdict.bound << "\n";

  if (!report.empty() &&
      !write_file(report, sbm::verdict_json(syn.chart, verdict).dump(2) + "\n")) {
    std::cerr << "error: cannot write '" << report << "'\n";
    return kUsage;
  }
  return verdict.ok() ? kClean : kFindings;
}

int run_simulate(const std::string& file, const std::string& inputs) {
  std::optional<std::string> doc_text = read_file(file);
  if (!doc_text) {
    std::cerr << "error: cannot read '" << file << "'\n";
    return kUsage;
  }
  sbm::Document doc;
  try {
    doc = sbm::parse_json(*doc_text);
  } catch (const std::invalid_argument& e) {
    std::cerr << file << ": error: " << e.what() << "\n";
    return kUsage;
  }
  const sbm::Statechart& sc = doc.chart;

  std::optional<std::string> trace_text = read_file(inputs);
  if (!trace_text) {
    std::cerr << "error: cannot read '" << inputs << "'\n";
    return kUsage;
  }

  // One valuation per line as comma-separated var=value pairs; an optional
  // `loop:` line marks where the periodic part begins.
  std::vector<std::size_t> values;
  std::optional<std::size_t> loop_start;
  std::istringstream lines(*trace_text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    const std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const std::size_t end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    if (line[0] == '#') continue;
    if (line == "loop:") {
      loop_start = values.size();
      continue;
    }
    sbm::Valuation valuation(sc.space.variable_count(), -1);
    std::istringstream pairs(line);
    std::string pair;
    bool bad = false;
    while (std::getline(pairs, pair, ',')) {
      const std::size_t eq = pair.find('=');
      auto trim = [](std::string s) {
        const std::size_t b = s.find_first_not_of(" \t");
        const std::size_t e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string var = eq == std::string::npos ? trim(pair) : trim(pair.substr(0, eq));
      const std::string value = eq == std::string::npos ? "" : trim(pair.substr(eq + 1));
      std::optional<std::size_t> vi = sc.space.find_variable(var);
      std::optional<int> xi = vi ? sc.space.find_value(*vi, value) : std::nullopt;
      if (eq == std::string::npos || !vi || !xi) {
        std::cerr << inputs << ":" << lineno << ": error: expected var=value with a declared "
                  << "variable and value, got '" << pair << "'\n";
        bad = true;
        break;
      }
      valuation[*vi] = *xi;
    }
    if (bad) return kUsage;
    for (std::size_t v = 0; v < valuation.size(); ++v)
      if (valuation[v] < 0) {
        std::cerr << inputs << ":" << lineno << ": error: no value for variable '"
                  << sc.space.variable_name(v) << "'\n";
        return kUsage;
      }
    values.push_back(sc.space.index_of(valuation));
  }
  if (values.empty()) {
    std::cerr << inputs << ": error: the trace file lists no valuations\n";
    return kUsage;
  }
  if (loop_start && *loop_start >= values.size()) {
    std::cerr << inputs << ": error: the loop: marker needs at least one valuation after it\n";
    return kUsage;
  }

  auto print_reaction = [&](std::size_t i, const sbm::MachineReaction& r) {
    std::cout << "reaction " << i << ": state=" << sc.states[static_cast<std::size_t>(r.state)].id
              << " controlAction=" << (r.sent < 0 ? "none" : sc.actions[static_cast<std::size_t>(r.sent)])
              << "\n";
  };
  if (loop_start) {
    sbm::MachineTrace trace = sbm::run_machine(sc, {values, *loop_start});
    for (std::size_t i = 0; i < trace.size(); ++i) print_reaction(i, trace.reactions[i]);
    std::cout << "loops back to reaction " << trace.loop_start << "\n";
  } else {
    int state = sc.initial;
    print_reaction(0, {values[0], state, sbm::kNoAction});
    for (std::size_t i = 0; i < values.size(); ++i) {
      state = sbm::step(sc, state, values[i]);
      const std::string& action = sc.states[static_cast<std::size_t>(state)].action;
      int sent = sbm::kNoAction;
      for (std::size_t a = 0; a < sc.actions.size(); ++a)
        if (sc.actions[a] == action) sent = static_cast<int>(a);
      print_reaction(i + 1, {values[i], state, sent});
    }
  }
  return kClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STPA safe-behavior-model toolchain"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string file, out, report, inputs;
  std::string format;
  bool as_json = false;
  int bound = static_cast<int>(sbm::kDefaultBound);

  CLI::App* validate = app.add_subcommand("validate", "Check an analysis for conflicts");
  validate->add_option("file", file, "STPA analysis (.stpa)")->required();

  CLI::App* ltl = app.add_subcommand("ltl", "Print the generated temporal obligations");
  ltl->add_option("file", file, "STPA analysis (.stpa)")->required();
  ltl->add_flag("--json", as_json, "Machine-readable output");

  CLI::App* synth = app.add_subcommand("synth", "Synthesize the safe behavior model");
  synth->add_option("file", file, "STPA analysis (.stpa)")->required();
  synth->add_option("-o,--output", out, "Output file")->required();
  synth->add_option("--format", format, "text, json, or dot (default: by extension)")
      ->check(CLI::IsMember({"text", "json", "dot"}));

  CLI::App* verify = app.add_subcommand("verify", "Check the machine against its obligations");
  verify->add_option("file", file, "STPA analysis (.stpa)")->required();
  verify->add_option("--bound", bound, "Maximum input-lasso length");
  verify->add_option("--report", report, "Write the JSON verdict here");

  CLI::App* simulate = app.add_subcommand("simulate", "Run an emitted machine on a trace");
  simulate->add_option("file", file, "Emitted machine (.sbm.json)")->required();
  simulate->add_option("--inputs", inputs, "Trace file, one var=value,... line per reaction")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 returns 0 for --help; everything else is a usage failure.
    return app.exit(e) == 0 ? kClean : kUsage;
  }

  try {
    if (app.got_subcommand(validate)) return run_validate(file);
    if (app.got_subcommand(ltl)) return run_ltl(file, as_json);
    if (app.got_subcommand(synth)) return run_synth(file, out, format);
    if (app.got_subcommand(verify)) return run_verify(file, bound, report);
    if (app.got_subcommand(simulate)) return run_simulate(file, inputs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
