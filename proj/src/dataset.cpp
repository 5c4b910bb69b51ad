#include "protoforge/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "protoforge/cpsa.hpp"
#include "protoforge/sexpr.hpp"

namespace protoforge::dataset {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

cpsa::LowerResult lower_text(const std::string& text) {
  auto parsed = sexpr::parse(text);
  auto res = cpsa::lower(parsed.forms);
  // Parse and validation errors both count against admission.
  for (const auto& d : parsed.diagnostics)
    res.diagnostics.push_back(d);
  for (const auto& d : cpsa::check_unit(res.unit))
    res.diagnostics.push_back(d);
  return res;
}

bool lowers_cleanly(const std::string& text) {
  return count_errors(lower_text(text).diagnostics) == 0;
}

}  // namespace

std::vector<SeedTemplate> load_seeds(const std::filesystem::path& directory) {
  json manifest = json::parse(read_file(directory / "seeds.json"));
  std::vector<SeedTemplate> seeds;
  for (const auto& entry : manifest) {
    SeedTemplate seed;
    seed.seed_id = entry.at("seed_id").get<std::string>();
    seed.topic = entry.value("topic", "");
    seed.cpsa_text =
        read_file(directory / entry.at("file").get<std::string>());
    if (!lowers_cleanly(seed.cpsa_text))
      throw DatasetError("seed `" + seed.seed_id +
                         "` does not lower cleanly");
    seeds.push_back(std::move(seed));
  }
  if (seeds.empty()) throw DatasetError("seeds.json lists no seeds");
  return seeds;
}

gateway::GenerationRequest synthesis_request(const SeedTemplate& seed,
                                             int index,
                                             const std::string& model_id) {
  gateway::GenerationRequest req;
  req.model_id = model_id;
  req.temperature = 0.0;
  std::ostringstream prompt;
  prompt << "Write a natural-language security protocol specification that "
            "describes exactly the protocol defined below. Name every "
            "participant role and every variable the definition uses, and "
            "walk through the message flow step by step. Write variation "
         << (index + 1)
         << " of the specification; make its wording distinct from other "
            "variations.\n\nProtocol definition:\n\n"
         << seed.cpsa_text;
  req.messages = {{gateway::ChatMessage::Role::User, prompt.str()}};
  return req;
}

std::string normalized_question_key(std::string_view question) {
  std::string key;
  bool pending_space = false;
  for (unsigned char c : question) {
    if (std::isalnum(c)) {
      if (pending_space && !key.empty()) key.push_back(' ');
      pending_space = false;
      key.push_back(static_cast<char>(std::tolower(c)));
    } else {
      // whitespace and punctuation both act as (collapsed) separators
      pending_space = true;
    }
  }
  return key;
}

std::vector<QAPair> synthesize_pairs(const std::vector<SeedTemplate>& seeds,
                                     gateway::Backend& backend, int per_seed,
                                     const std::string& model_id) {
  std::vector<QAPair> pairs;
  std::set<std::string> seen_questions;
  for (const SeedTemplate& seed : seeds) {
    int kept = 0;
    for (int i = 0; i < per_seed; ++i) {
      auto result = backend.generate(synthesis_request(seed, i, model_id));
      std::string key = normalized_question_key(result.text);
      if (key.empty()) continue;  // dropped: empty question
      if (!seen_questions.insert(key).second) continue;  // dropped: duplicate
      QAPair pair;
      pair.pair_id = seed.seed_id + "-q" + std::to_string(i + 1);
      pair.question = result.text;
      pair.answer = seed.cpsa_text;
      pair.seed_id = seed.seed_id;
      pair.generation = QAPair::Generation::BackTranslated;
      pairs.push_back(std::move(pair));
      ++kept;
    }
    if (per_seed > 0 && kept == 0)
      throw AllCandidatesRejected("every candidate for seed `" +
                                  seed.seed_id + "` was rejected");
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Variance
// ---------------------------------------------------------------------------

namespace {

using cpsa::CpsaUnit;
using cpsa::Term;

void rename_term(Term& t, const std::map<std::string, std::string>& map) {
  if (t.kind == Term::Kind::Var) {
    auto it = map.find(t.name);
    if (it != map.end()) t.name = it->second;
  }
  for (Term& a : t.args) rename_term(a, map);
}

void rename_unit(CpsaUnit& unit,
                 const std::map<std::string, std::string>& map) {
  auto rename = [&](std::string& id) {
    auto it = map.find(id);
    if (it != map.end()) id = it->second;
  };
  for (auto& p : unit.protocols) {
    rename(p.name);
    for (auto& r : p.roles) {
      rename(r.name);
      for (auto& [id, sort] : r.vars) rename(id);
      for (auto& e : r.trace) rename_term(e.message, map);
      for (auto& t : r.uniq_orig) rename_term(t, map);
      for (auto& t : r.non_orig) rename_term(t, map);
    }
  }
  for (auto& s : unit.skeletons) {
    rename(s.protocol_name);
    for (auto& [id, sort] : s.vars) rename(id);
    for (auto& strand : s.strands) {
      rename(strand.role_name);
      for (auto& [var, term] : strand.bindings) {
        rename(var);
        rename_term(term, map);
      }
    }
    for (auto& t : s.listeners) rename_term(t, map);
    for (auto& t : s.non_orig) rename_term(t, map);
    for (auto& t : s.uniq_orig) rename_term(t, map);
  }
}

std::vector<std::string> unit_identifiers(const CpsaUnit& unit) {
  std::set<std::string> ids;
  for (const auto& p : unit.protocols) {
    ids.insert(p.name);
    for (const auto& r : p.roles) {
      ids.insert(r.name);
      for (const auto& [id, sort] : r.vars) ids.insert(id);
    }
  }
  for (const auto& s : unit.skeletons)
    for (const auto& [id, sort] : s.vars) ids.insert(id);
  return {ids.begin(), ids.end()};
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-';
}

// Replaces identifier occurrences in prose. Single-character ids are only
// replaced in their parenthesized form, e.g. "(a)", so English words stay
// untouched.
std::string rename_in_prose(const std::string& prose, const std::string& id,
                            const std::string& replacement) {
  std::string needle = id.size() == 1 ? "(" + id + ")" : id;
  std::string with = id.size() == 1 ? "(" + replacement + ")" : replacement;
  std::string out;
  std::size_t pos = 0;
  while (true) {
    std::size_t at = prose.find(needle, pos);
    if (at == std::string::npos) {
      out += prose.substr(pos);
      return out;
    }
    bool left_ok = id.size() == 1 || at == 0 || !ident_char(prose[at - 1]);
    bool right_ok = id.size() == 1 || at + needle.size() == prose.size() ||
                    !ident_char(prose[at + needle.size()]);
    out += prose.substr(pos, at - pos);
    if (left_ok && right_ok)
      out += with;
    else
      out += needle;
    pos = at + needle.size();
  }
}

gateway::GenerationRequest paraphrase_request(const QAPair& pair, int variant,
                                              const std::string& model_id) {
  gateway::GenerationRequest req;
  req.model_id = model_id;
  req.temperature = 0.0;
  req.messages = {
      {gateway::ChatMessage::Role::User,
       "Paraphrase the following protocol specification without changing "
       "any variable or participant name. Write paraphrase number " +
           std::to_string(variant) + ".\n\n" + pair.question}};
  return req;
}

}  // namespace

std::vector<QAPair> augment_variance(const std::vector<QAPair>& pairs,
                                     gateway::Backend* backend, int k,
                                     const std::string& model_id) {
  std::vector<QAPair> out = pairs;
  for (const QAPair& parent : pairs) {
    auto lowered = lower_text(parent.answer);
    if (count_errors(lowered.diagnostics) != 0) continue;
    auto ids = unit_identifiers(lowered.unit);
    // Longest first so no id is clobbered as a substring of another.
    std::sort(ids.begin(), ids.end(), [](const auto& a, const auto& b) {
      return a.size() != b.size() ? a.size() > b.size() : a < b;
    });

    for (int v = 1; v <= k; ++v) {
      std::string suffix = "-v" + std::to_string(v);
      std::map<std::string, std::string> mapping;
      for (const auto& id : ids) mapping[id] = id + suffix;

      CpsaUnit renamed = lowered.unit;
      rename_unit(renamed, mapping);
      std::string answer = cpsa::format_unit(renamed);
      if (!lowers_cleanly(answer)) continue;  // rejected variant

      std::string question = parent.question;
      if (backend) {
        auto para =
            backend->generate(paraphrase_request(parent, v, model_id));
        if (!para.text.empty()) question = para.text;
      }
      for (const auto& id : ids)
        question = rename_in_prose(question, id, mapping.at(id));

      QAPair variant;
      variant.pair_id = parent.pair_id + suffix;
      variant.question = std::move(question);
      variant.answer = std::move(answer);
      variant.seed_id = parent.seed_id;
      variant.generation = QAPair::Generation::Variance;
      variant.parent_id = parent.pair_id;
      out.push_back(std::move(variant));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split and export
// ---------------------------------------------------------------------------

std::pair<std::vector<QAPair>, std::vector<QAPair>> split_pairs(
    std::vector<QAPair> pairs, double train_fraction,
    std::uint64_t rng_seed) {
  if (pairs.empty()) throw DatasetError("cannot split an empty corpus");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DatasetError("train fraction must be in (0,1)");

  std::vector<std::string> groups;
  std::map<std::string, std::size_t> group_sizes;
  for (const QAPair& p : pairs) {
    if (!group_sizes.count(p.seed_id)) groups.push_back(p.seed_id);
    ++group_sizes[p.seed_id];
  }
  std::mt19937_64 rng(rng_seed);
  std::shuffle(groups.begin(), groups.end(), rng);

  auto target = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(pairs.size())));
  std::set<std::string> train_groups;
  std::size_t train_count = 0;
  for (const std::string& g : groups) {
    auto size = static_cast<long long>(group_sizes[g]);
    auto have = static_cast<long long>(train_count);
    auto want = static_cast<long long>(target);
    if (have >= want) break;
    // Take the group unless it overshoots worse than stopping undershoots.
    if (std::llabs(have + size - want) <= want - have) {
      train_groups.insert(g);
      train_count += size;
    }
  }

  std::vector<QAPair> train, test;
  for (QAPair& p : pairs) {
    bool in_train = train_groups.count(p.seed_id) > 0;
    p.split = in_train ? Split::Train : Split::Test;
    (in_train ? train : test).push_back(std::move(p));
  }
  if (train.empty() || test.empty())
    throw DegenerateSplit("split left one side empty");
  return {std::move(train), std::move(test)};
}

std::size_t estimate_message_tokens(std::string_view content) {
  return (content.size() + 3) / 4 + 4;
}

ExportReport export_jsonl(const std::vector<QAPair>& pairs,
                          const std::string& system_prompt,
                          const std::filesystem::path& out, int epochs) {
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw DatasetError("cannot write " + out.string());

  ExportReport report;
  report.epochs = epochs;
  std::size_t train_tokens = 0;
  for (const QAPair& p : pairs) {
    if (!p.split)
      throw DatasetError("pair `" + p.pair_id + "` has no split assigned");
    json messages = json::array();
    if (!system_prompt.empty())
      messages.push_back({{"role", "system"}, {"content", system_prompt}});
    messages.push_back({{"role", "user"}, {"content", p.question}});
    messages.push_back({{"role", "assistant"}, {"content", p.answer}});
    file << json{{"messages", messages}}.dump() << "\n";

    std::size_t tokens = estimate_message_tokens(p.question) +
                         estimate_message_tokens(p.answer);
    if (!system_prompt.empty())
      tokens += estimate_message_tokens(system_prompt);
    report.estimated_tokens += tokens;
    ++report.pair_count;
    if (*p.split == Split::Train) {
      ++report.train_count;
      train_tokens += tokens;
    } else {
      ++report.test_count;
    }
  }
  report.estimated_training_tokens =
      static_cast<std::size_t>(epochs) * train_tokens;
  return report;
}

// ---------------------------------------------------------------------------
// Corpus on disk
// ---------------------------------------------------------------------------

namespace {

const char* generation_name(QAPair::Generation g) {
  switch (g) {
    case QAPair::Generation::Seed: return "seed";
    case QAPair::Generation::BackTranslated: return "back_translated";
    case QAPair::Generation::Variance: return "variance";
  }
  return "seed";
}

QAPair::Generation generation_from_name(const std::string& name) {
  if (name == "back_translated") return QAPair::Generation::BackTranslated;
  if (name == "variance") return QAPair::Generation::Variance;
  return QAPair::Generation::Seed;
}

}  // namespace

void save_corpus(const std::vector<QAPair>& pairs,
                 const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  json manifest;
  manifest["pairs"] = json::array();
  for (const QAPair& p : pairs) {
    json j = {{"pair_id", p.pair_id},
              {"question", p.question},
              {"answer", p.answer},
              {"seed_id", p.seed_id},
              {"generation", generation_name(p.generation)},
              {"parent_id", p.parent_id}};
    if (p.split)
      j["split"] = *p.split == Split::Train ? "train" : "test";
    std::ofstream out(directory / ("pair-" + p.pair_id + ".json"),
                      std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot write pair file for " + p.pair_id);
    out << j.dump(2) << "\n";
    manifest["pairs"].push_back(
        {{"pair_id", p.pair_id},
         {"seed_id", p.seed_id},
         {"generation", generation_name(p.generation)},
         {"split", p.split ? (*p.split == Split::Train ? "train" : "test")
                           : ""}});
  }
  std::ofstream out(directory / "manifest.json",
                    std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

std::vector<QAPair> load_corpus(const std::filesystem::path& directory) {
  json manifest = json::parse(read_file(directory / "manifest.json"));
  std::vector<QAPair> pairs;
  for (const auto& entry : manifest.at("pairs")) {
    std::string id = entry.at("pair_id").get<std::string>();
    json j = json::parse(read_file(directory / ("pair-" + id + ".json")));
    QAPair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.question = j.at("question").get<std::string>();
    p.answer = j.at("answer").get<std::string>();
    p.seed_id = j.at("seed_id").get<std::string>();
    p.generation = generation_from_name(j.value("generation", "seed"));
    p.parent_id = j.value("parent_id", "");
    if (j.contains("split"))
      p.split = j["split"] == "train" ? Split::Train : Split::Test;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Reference cassette
// ---------------------------------------------------------------------------

namespace {

std::string describe_term(const Term& t);

std::string describe_parts(const std::vector<Term>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += i + 1 == parts.size() ? " and " : ", ";
    out += describe_term(parts[i]);
  }
  return out;
}

std::string describe_term(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Var:
      return "(" + t.name + ")";
    case Term::Kind::Tag:
      return "the literal tag \"" + t.name + "\"";
    case Term::Kind::PubKeyOf:
      return "the public key of " + describe_term(t.args[0]);
    case Term::Kind::InvKeyOf:
      if (t.args[0].kind == Term::Kind::PubKeyOf)
        return "the private key of " + describe_term(t.args[0].args[0]);
      return "the inverse of " + describe_term(t.args[0]);
    case Term::Kind::LongTermKey:
      return "the long-term key shared by " + describe_term(t.args[0]) +
             " and " + describe_term(t.args[1]);
    case Term::Kind::Cat:
      return "the concatenation of " + describe_parts(t.args);
    case Term::Kind::Enc:
      return describe_term(t.args[0]) + ", encrypted under " +
             describe_term(t.args[1]);
    case Term::Kind::Hash:
      return "the hash of " + describe_term(t.args[0]);
  }
  return "?";
}

const char* sort_phrase(cpsa::Sort s) {
  switch (s) {
    case cpsa::Sort::Name: return "a principal name";
    case cpsa::Sort::Text: return "a plaintext value such as a nonce";
    case cpsa::Sort::Data: return "an opaque data value";
    case cpsa::Sort::Skey: return "a symmetric key";
    case cpsa::Sort::Akey: return "an asymmetric key";
    case cpsa::Sort::Mesg: return "an arbitrary message";
  }
  return "a value";
}

// Deterministic reference specification for one seed. The variation index
// rotates the phrasing so candidates are not near-duplicates of each other.
std::string reference_specification(const SeedTemplate& seed, int index) {
  auto lowered = lower_text(seed.cpsa_text);
  const auto& unit = lowered.unit;

  static const char* openings[] = {
      "Protocol Description: ",
      "Specification Overview: ",
      "Design Brief: ",
      "Engineering Specification: ",
  };
  static const char* goals[] = {
      "The parties require a secure protocol for this exchange over an "
      "insecure network, and the protocol must be expressed as a CPSA "
      "protocol definition.",
      "The goal is a protocol suitable for formal analysis; translate this "
      "specification into a CPSA protocol definition.",
      "This exchange must resist a network adversary; produce a CPSA "
      "protocol definition capturing it.",
      "The design below should be captured precisely as a CPSA protocol "
      "definition for later shape analysis.",
  };

  std::ostringstream out;
  out << openings[index % 4];
  if (!unit.protocols.empty() && unit.protocols[0].herald)
    out << "This document specifies the " << *unit.protocols[0].herald
        << ". ";
  out << "It concerns the topic of " << seed.topic << ". "
      << goals[index % 4] << "\n\n";

  for (const auto& p : unit.protocols) {
    out << "Participants: The protocol `" << p.name << "` involves "
        << p.roles.size() << " role(s): ";
    for (std::size_t i = 0; i < p.roles.size(); ++i) {
      if (i) out << ", ";
      out << "`" << p.roles[i].name << "`";
    }
    out << ".\n\n";

    for (const auto& r : p.roles) {
      out << "Role `" << r.name << "`: This role works with the following "
          << "values: ";
      for (std::size_t i = 0; i < r.vars.size(); ++i) {
        if (i) out << "; ";
        out << "(" << r.vars[i].first << ") is "
            << sort_phrase(r.vars[i].second);
      }
      out << ". ";
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& e = r.trace[i];
        out << "Step " << (i + 1) << ": it "
            << (e.direction == cpsa::Event::Direction::Send ? "sends "
                                                            : "receives ")
            << describe_term(e.message) << ". ";
      }
      if (!r.uniq_orig.empty())
        out << "It freshly generates " << describe_parts(r.uniq_orig)
            << ", which must originate nowhere else. ";
      if (!r.non_orig.empty())
        out << "It assumes " << describe_parts(r.non_orig)
            << " are uncompromised. ";
      out << "\n\n";
    }
  }

  out << "Security Considerations: The network is hostile; messages may be "
         "intercepted, replayed, or forged. Keys are distributed out of "
         "band and must never travel in the clear.\n\n";
  out << "Deliverable: One CPSA protocol definition with a herald, every "
         "variable declared with its sort, and the role traces exactly as "
         "above (variation " << (index + 1) << ").\n";
  return out.str();
}

}  // namespace

void write_reference_cassette(const std::vector<SeedTemplate>& seeds,
                              int per_seed, const std::string& model_id,
                              const std::filesystem::path& path) {
  gateway::Cassette cassette = gateway::Cassette::empty(path);
  for (const SeedTemplate& seed : seeds) {
    for (int i = 0; i < per_seed; ++i) {
      auto req = synthesis_request(seed, i, model_id);
      std::string spec = reference_specification(seed, i);
      gateway::CassetteEntry entry;
      entry.hash = gateway::request_digest(req);
      entry.model = model_id;
      entry.temperature = req.temperature;
      entry.response_text = spec;
      entry.prompt_tokens = static_cast<int>(
          estimate_message_tokens(req.messages[0].content));
      entry.completion_tokens =
          static_cast<int>(estimate_message_tokens(spec));
      cassette.put(entry);
    }
  }
}

}  // namespace protoforge::dataset
