#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "actlang/bpe.hpp"
#include "actlang/classifier/training.hpp"
#include "actlang/errors.hpp"
#include "actlang/events.hpp"
#include "actlang/tokenizer.hpp"

namespace actlang::io {

inline constexpr std::string_view kTokenFileMagic = "#actlang-tokens v1";
inline constexpr int kModelFormatVersion = 1;

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string file_hash(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

// Writes through a sibling temporary and renames, so readers never see a
// partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + csv_field(fields[i]);
  return out + '\n';
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

// Tokenised trials plus the alphabet they were produced against.
struct TokenFile {
  DatasetProfile profile = DatasetProfile::EmakiLike;
  Modality modality = Modality::Joint;
  Alphabet alphabet;
  int window_length = 0;  // 0: whole trials ending in <EOT>; else fixed windows
  std::vector<TokenizedTrial> trials;
};

// Header lines, then one trial per line: participant TAB task TAB trial TAB tokens.
inline void write_token_file(const TokenFile& f, std::ostream& out) {
  out << kTokenFileMagic << '\n';
  out << "#profile\t" << to_string(f.profile) << '\n';
  out << "#modality\t" << to_string(f.modality) << '\n';
  if (f.window_length > 0) out << "#window\t" << f.window_length << '\n';
  out << "#alphabet";
  for (const auto& t : f.alphabet.texts()) out << '\t' << t;
  out << '\n';
  for (const auto& t : f.trials)
    out << t.participant_id << '\t' << t.task_id << '\t' << t.trial_index << '\t' << tokens_to_line(t.tokens) << '\n';
}

inline std::string write_token_file(const TokenFile& f) {
  std::ostringstream out;
  write_token_file(f, out);
  return out.str();
}

inline TokenFile read_token_file(std::istream& in) {
  TokenFile f;
  std::string line;
  int line_no = 0;
  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto tab = s.find('\t', start);
      out.push_back(s.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return out;
  };
  if (!std::getline(in, line) || line != kTokenFileMagic) throw ParseError(1, "not an actlang token file");
  ++line_no;
  bool have_alphabet = false, have_profile = false, have_modality = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto parts = fields(line);
    try {
      if (line[0] == '#') {
        if (parts[0] == "#profile" && parts.size() == 2) {
          const auto p = dataset_profile_from_string(parts[1]);
          if (!p) throw ParseError(line_no, "unknown profile '" + parts[1] + "'");
          f.profile = *p;
          have_profile = true;
        } else if (parts[0] == "#modality" && parts.size() == 2) {
          const auto m = modality_from_string(parts[1]);
          if (!m) throw ParseError(line_no, "unknown modality '" + parts[1] + "'");
          f.modality = *m;
          have_modality = true;
        } else if (parts[0] == "#window" && parts.size() == 2) {
          f.window_length = std::stoi(parts[1]);
          if (f.window_length < 1) throw ParseError(line_no, "window length must be >= 1");
        } else if (parts[0] == "#alphabet") {
          f.alphabet = Alphabet(std::span<const std::string>(parts).subspan(1));
          have_alphabet = true;
        }
        continue;
      }
      if (parts.size() != 4) throw ParseError(line_no, "expected 4 tab-separated fields");
      TokenizedTrial t;
      t.participant_id = parts[0];
      t.task_id = parts[1];
      t.trial_index = std::stoi(parts[2]);
      t.tokens = tokens_from_line(parts[3]);
      if (have_alphabet)
        for (const auto& tok : t.tokens) f.alphabet.id_of(tok);
      f.trials.push_back(std::move(t));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_alphabet || !have_profile || !have_modality) throw ParseError(line_no, "token file header is incomplete");
  return f;
}

inline TokenFile read_token_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return read_token_file(in);
}

// A trained classifier together with everything needed to encode new windows.
struct ModelBundle {
  classifier::EncodingContext context;
  classifier::ClassifierConfig config;
  classifier::ModelShape shape;
  std::unique_ptr<classifier::Model> model;
};

inline nlohmann::json save_model(const ModelBundle& b) {
  nlohmann::json j;
  j["format"] = "actlang-model";
  j["version"] = kModelFormatVersion;
  j["method"] = std::string(to_string(b.context.method));
  j["classes"] = b.context.classes;
  j["modality"] = std::string(to_string(b.context.modality));
  j["window_length"] = b.context.window_length;
  j["atoms"] = b.context.atoms.texts();
  if (b.context.vocab) j["vocabulary"] = nlohmann::json::parse(bpe::save_vocab(*b.context.vocab));
  if (b.context.encoder) j["encoder"] = *b.context.encoder;
  j["config"] = b.config;
  j["shape"] = {{"input", b.shape.input == classifier::InputKind::Features ? "features" : "ids"},
                {"vocab_size", b.shape.vocab_size},
                {"feature_dim", b.shape.feature_dim},
                {"max_len", b.shape.max_len},
                {"num_classes", b.shape.num_classes}};
  j["parameters"] = b.model->save_parameters();
  return j;
}

inline ModelBundle load_model(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "actlang-model") throw LoadError("not an actlang model file");
    if (j.value("version", 0) != kModelFormatVersion) throw LoadError("unsupported model version");
    ModelBundle b;
    const auto method = classifier::encoding_method_from_string(j.at("method").get<std::string>());
    const auto modality = modality_from_string(j.at("modality").get<std::string>());
    if (!method || !modality) throw LoadError("model names an unknown method or modality");
    b.context.method = *method;
    b.context.modality = *modality;
    b.context.classes = j.at("classes").get<std::vector<std::string>>();
    b.context.window_length = j.at("window_length").get<int>();
    b.context.atoms = Alphabet(j.at("atoms").get<std::vector<std::string>>());
    if (j.contains("vocabulary")) b.context.vocab = bpe::load_vocab(j["vocabulary"].dump());
    if (j.contains("encoder"))
      b.context.encoder = std::make_shared<const classifier::FrozenEncoder>(j["encoder"].get<classifier::FrozenEncoder>());
    b.config = j.at("config").get<classifier::ClassifierConfig>();
    const auto& s = j.at("shape");
    b.shape.input = s.at("input") == "features" ? classifier::InputKind::Features : classifier::InputKind::TokenIds;
    b.shape.vocab_size = s.at("vocab_size").get<int>();
    b.shape.feature_dim = s.at("feature_dim").get<int>();
    b.shape.max_len = s.at("max_len").get<int>();
    b.shape.num_classes = s.at("num_classes").get<int>();
    b.model = std::make_unique<classifier::Model>(b.config, b.shape);
    b.model->load_parameters(j.at("parameters"));
    return b;
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(std::string("invalid model file: ") + e.what());
  }
}

}  // namespace actlang::io
