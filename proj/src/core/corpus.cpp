#include "corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "metrics.hpp"
#include "text.hpp"

namespace creastress::corpus {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(first, last - first + 1);
}

AdConcept validate_ad(std::string id, std::string raw_text, std::vector<std::string> tags,
                      std::size_t line_no) {
    AdConcept ad;
    ad.id = trim(id);
    ad.text = trim(raw_text);
    ad.tags = std::move(tags);
    if (ad.id.empty())
        throw Error(Errc::parse, "corpus line " + std::to_string(line_no) + ": empty id");
    if (ad.text.empty())
        throw Error(Errc::parse,
                    "corpus line " + std::to_string(line_no) + ": text empty after trim");
    ad.word_count = text::word_count(ad.text);
    return ad;
}

std::vector<AdConcept> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open corpus file: " + path.string());
    std::vector<AdConcept> ads;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(Errc::parse,
                        "corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
            !obj["id"].is_string() || !obj["text"].is_string())
            throw Error(Errc::parse, "corpus line " + std::to_string(line_no) +
                                         ": record must have string fields 'id' and 'text'");
        std::vector<std::string> tags;
        if (obj.contains("tags")) {
            if (!obj["tags"].is_array())
                throw Error(Errc::parse,
                            "corpus line " + std::to_string(line_no) + ": 'tags' must be an array");
            for (const auto& t : obj["tags"]) tags.push_back(t.get<std::string>());
        }
        ads.push_back(validate_ad(obj["id"].get<std::string>(), obj["text"].get<std::string>(),
                                  std::move(tags), line_no));
    }
    return ads;
}

// Minimal RFC 4180 reader; quoted fields may contain commas, quotes ("" escape)
// and newlines. Returns one record per row together with its starting line.
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(std::istream& in) {
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    std::size_t line_no = 1;
    std::size_t row_line = 1;
    char c;
    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        if (row_started || !fields.empty() || !field.empty()) {
            end_field();
            rows.emplace_back(row_line, fields);
        }
        fields.clear();
        field.clear();
        row_started = false;
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
            row_started = true;
        } else if (c == ',') {
            end_field();
            row_started = true;
        } else if (c == '\n') {
            end_row();
            ++line_no;
            row_line = line_no;
        } else if (c == '\r') {
            // swallowed; \r\n handled at \n
        } else {
            field.push_back(c);
            row_started = true;
        }
    }
    end_row();
    return rows;
}

std::vector<AdConcept> load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open corpus file: " + path.string());
    auto rows = read_csv(in);
    std::vector<AdConcept> ads;
    bool first = true;
    for (const auto& [line_no, fields] : rows) {
        if (first) {
            first = false;
            // optional header row
            if (fields.size() >= 2 && trim(fields[0]) == "id" && trim(fields[1]) == "text")
                continue;
        }
        if (fields.size() < 2)
            throw Error(Errc::parse, "corpus line " + std::to_string(line_no) +
                                         ": expected columns id,text");
        ads.push_back(validate_ad(fields[0], fields[1], {}, line_no));
    }
    return ads;
}

}  // namespace

CorpusFormat detect_format(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

std::vector<AdConcept> load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    auto ads = format == CorpusFormat::csv ? load_csv(path) : load_jsonl(path);
    if (ads.empty()) throw Error(Errc::parse, "corpus file has no records: " + path.string());
    std::set<std::string> seen;
    for (const auto& ad : ads)
        if (!seen.insert(ad.id).second)
            throw Error(Errc::parse, "duplicate ad id: " + ad.id);
    return ads;
}

void write_corpus(const std::filesystem::path& path, const std::vector<AdConcept>& ads) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io, "cannot write corpus file: " + path.string());
    for (const auto& ad : ads) {
        ordered_json obj;
        obj["id"] = ad.id;
        obj["text"] = ad.text;
        if (!ad.tags.empty()) obj["tags"] = ad.tags;
        out << obj.dump() << '\n';
    }
}

MarkerSet load_markers(const std::filesystem::path& path, const std::vector<AdConcept>& ads) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open markers file: " + path.string());
    std::set<std::string> known_ids;
    for (const auto& ad : ads) known_ids.insert(ad.id);

    MarkerSet result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(Errc::parse,
                        "markers line " + std::to_string(line_no) + ": " + e.what());
        }
        Marker m;
        try {
            m.ad_id = obj.at("ad_id").get<std::string>();
            m.text = trim(obj.at("text").get<std::string>());
            m.category = marker_category_from_string(obj.at("category").get<std::string>());
        } catch (const json::exception& e) {
            throw Error(Errc::parse,
                        "markers line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!known_ids.count(m.ad_id))
            throw Error(Errc::parse, "markers line " + std::to_string(line_no) +
                                         ": unknown ad_id '" + m.ad_id + "'");
        const auto n_tokens = text::word_count(m.text);
        if (n_tokens == 0)
            throw Error(Errc::parse,
                        "markers line " + std::to_string(line_no) + ": marker has no tokens");
        if (n_tokens > 10)
            throw Error(Errc::parse, "markers line " + std::to_string(line_no) + ": marker '" +
                                         m.text + "' has " + std::to_string(n_tokens) +
                                         " tokens (limit 10)");
        result.markers.push_back(std::move(m));
    }

    for (const auto& [ad_id, group] : group_markers(result.markers)) {
        if (group.size() > 6)
            throw Error(Errc::parse, "ad '" + ad_id + "' has " + std::to_string(group.size()) +
                                         " markers (limit 6)");
        if (group.size() < 3 || group.size() > 4)
            result.warnings.push_back("ad '" + ad_id + "' has " + std::to_string(group.size()) +
                                      " markers (expected 3-4)");
    }
    return result;
}

void write_markers(const std::filesystem::path& path, const std::vector<Marker>& markers) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::io, "cannot write markers file: " + path.string());
    for (const auto& m : markers) {
        ordered_json obj;
        obj["ad_id"] = m.ad_id;
        obj["text"] = m.text;
        obj["category"] = std::string(to_string(m.category));
        out << obj.dump() << '\n';
    }
}

std::map<std::string, std::vector<Marker>> group_markers(const std::vector<Marker>& markers) {
    std::map<std::string, std::vector<Marker>> grouped;
    for (const auto& m : markers) grouped[m.ad_id].push_back(m);
    return grouped;
}

std::string marker_id(const std::string& ad_id, std::size_t index) {
    return ad_id + "#" + std::to_string(index);
}

CorpusStats corpus_stats(const std::vector<AdConcept>& ads) {
    if (ads.empty()) throw Error(Errc::invalid_argument, "corpus_stats: empty corpus");
    CorpusStats stats;
    stats.n_ads = ads.size();
    double wc_sum = 0.0;
    double h_sum = 0.0;
    for (const auto& ad : ads) {
        wc_sum += static_cast<double>(ad.word_count);
        h_sum += metrics::shannon_entropy(ad.text);
    }
    stats.mean_word_count = wc_sum / static_cast<double>(ads.size());
    stats.mean_entropy = h_sum / static_cast<double>(ads.size());
    return stats;
}

}  // namespace creastress::corpus
