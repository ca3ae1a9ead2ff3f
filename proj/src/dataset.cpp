#include "fusion/dataset.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "fusion/errors.hpp"
#include "fusion/rng.hpp"
#include "json.hpp"

namespace fusion {

namespace {

struct Fact {
    const char* question;
    const char* ground_truth;
    const char* explanation;
    const char* topic;
};

// A couple of entries leave the explanation empty on purpose so the
// bare-ground-truth enrichment path stays exercised.
constexpr std::array<Fact, 20> kFacts = {{
    {"What is the capital of France?", "Paris",
     "Paris has been the French capital since the tenth century.", "geography"},
    {"Who wrote the play Hamlet?", "William Shakespeare",
     "Shakespeare wrote Hamlet around the year sixteen hundred.", "literature"},
    {"What gas do plants absorb from the air?", "carbon dioxide",
     "Photosynthesis converts carbon dioxide and water into sugar.", "biology"},
    {"How many legs does a spider have?", "eight",
     "Spiders are arachnids, and arachnids have eight legs.", "biology"},
    {"What planet is known as the red planet?", "Mars",
     "Iron oxide dust gives Mars its reddish color.", "astronomy"},
    {"Who painted the Mona Lisa?", "Leonardo da Vinci",
     "Leonardo painted the portrait in the early fifteen hundreds.", "art"},
    {"What is the largest ocean on Earth?", "the Pacific Ocean",
     "The Pacific covers about a third of the planet's surface.", "geography"},
    {"What is the chemical symbol for gold?", "Au",
     "The symbol comes from aurum, the Latin word for gold.", "chemistry"},
    {"How many continents are there?", "seven", "", "geography"},
    {"What is the boiling point of water in Celsius?", "one hundred degrees",
     "At sea level pressure water boils at one hundred degrees Celsius.", "physics"},
    {"Who developed the theory of general relativity?", "Albert Einstein",
     "Einstein published general relativity in nineteen fifteen.", "physics"},
    {"What is the tallest mountain on Earth?", "Mount Everest",
     "Everest rises almost nine kilometers above sea level.", "geography"},
    {"What animal is the largest living land mammal?", "the African elephant",
     "Adult African elephants can weigh over six tonnes.", "biology"},
    {"What language has the most native speakers?", "Mandarin Chinese", "", "language"},
    {"What is the smallest prime number?", "two",
     "Two is the only even prime number.", "mathematics"},
    {"Which metal is liquid at room temperature?", "mercury",
     "Mercury melts at about minus thirty nine degrees Celsius.", "chemistry"},
    {"Who was the first person to walk on the Moon?", "Neil Armstrong",
     "Armstrong stepped onto the Moon in July nineteen sixty nine.", "history"},
    {"What is the longest river in the world?", "the Nile",
     "The Nile runs about six thousand six hundred fifty kilometers.", "geography"},
    {"What organ pumps blood through the human body?", "the heart",
     "The heart beats roughly one hundred thousand times per day.", "biology"},
    {"How many sides does a hexagon have?", "six",
     "A hexagon is a polygon with six sides and six angles.", "mathematics"},
}};

std::string record_id(std::size_t index) {
    std::ostringstream out;
    out << "synth-";
    out.width(4);
    out.fill('0');
    out << index;
    return out.str();
}

}  // namespace

std::vector<PromptRecord> gen_dataset(std::size_t count, std::uint64_t seed) {
    std::vector<PromptRecord> records;
    records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        PromptRecord record;
        record.id = record_id(i);
        if (i < kFacts.size()) {
            const Fact& fact = kFacts[i];
            record.question = fact.question;
            record.ground_truth = fact.ground_truth;
            record.explanation = fact.explanation;
            record.topic = fact.topic;
        } else {
            const auto a = static_cast<std::uint64_t>(
                uniform_at({seed, i}, 0, 2.0, 50.0));
            const auto b = static_cast<std::uint64_t>(
                uniform_at({seed, i}, 1, 2.0, 50.0));
            record.question = "What is " + std::to_string(a) + " plus " +
                              std::to_string(b) + "?";
            record.ground_truth = std::to_string(a + b);
            record.explanation = "Adding " + std::to_string(a) + " and " +
                                 std::to_string(b) + " gives " +
                                 std::to_string(a + b) + ".";
            record.topic = "arithmetic";
        }
        records.push_back(std::move(record));
    }
    return records;
}

void write_jsonl(const std::vector<PromptRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open dataset file for writing: " + path);
    }
    for (const PromptRecord& record : records) {
        nlohmann::ordered_json line = {
            {"id", record.id},
            {"question", record.question},
            {"ground_truth", record.ground_truth},
            {"explanation", record.explanation},
            {"topic", record.topic},
        };
        out << line.dump() << "\n";
    }
    if (!out) {
        throw IoError("failed while writing dataset file: " + path);
    }
}

std::vector<PromptRecord> ingest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset file: " + path);
    }
    std::vector<PromptRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
            continue;
        }
        const std::string where = "dataset line " + std::to_string(line_number);
        nlohmann::json object = nlohmann::json::parse(line, nullptr, false);
        if (object.is_discarded() || !object.is_object()) {
            throw InputError(where + ": malformed JSON object");
        }
        PromptRecord record;
        for (const char* field : {"id", "question", "ground_truth"}) {
            if (!object.contains(field) || !object[field].is_string() ||
                object[field].get<std::string>().empty()) {
                throw InputError(where + ": missing or empty required field '" +
                                 field + "'");
            }
        }
        record.id = object["id"].get<std::string>();
        record.question = object["question"].get<std::string>();
        record.ground_truth = object["ground_truth"].get<std::string>();
        if (object.contains("explanation") && object["explanation"].is_string()) {
            record.explanation = object["explanation"].get<std::string>();
        }
        if (object.contains("topic") && object["topic"].is_string()) {
            record.topic = object["topic"].get<std::string>();
        }
        if (!seen_ids.insert(record.id).second) {
            throw InputError(where + ": duplicate prompt id '" + record.id + "'");
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace fusion
