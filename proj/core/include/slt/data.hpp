#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slt/config.hpp"
#include "slt/tensor.hpp"
#include "slt/vocab.hpp"

namespace slt {

enum class SentenceKind : std::uint8_t { kAffirmative, kNegative, kInterrogative };
std::string to_string(SentenceKind kind);

// Fixed gloss grammar of the synthetic corpus:
//   SUBJECT VERB [OBJECT] [TIME] [NEG | PREGUNTA]
// Glosses come in mirrored pairs (1,2), (3,4), ..., (11,12) that share an
// appearance and move along opposite trajectories.
namespace gloss {
inline constexpr std::size_t kBlank = 0;
inline constexpr std::size_t kCarlos = 1, kJuan = 2, kMary = 3, kAna = 4;
inline constexpr std::size_t kViajar = 5, kComprar = 6;
inline constexpr std::size_t kBogota = 7, kCasa = 8;
inline constexpr std::size_t kHoy = 9, kManana = 10;
inline constexpr std::size_t kNeg = 11, kPregunta = 12;
inline constexpr std::size_t kCount = 12;  // excluding blank
}  // namespace gloss

class Grammar {
 public:
  static Vocabulary gloss_vocabulary();  // blank + 12 glosses
  static Vocabulary text_vocabulary();   // <pad> <bos> <eos> <unk> + words

  // Throws ContractError if the sequence does not follow the template.
  static void validate(std::span<const std::size_t> glosses);
  static SentenceKind kind_of(std::span<const std::size_t> glosses);
  // Spoken words: glosses in order, "no" before the verb for negatives,
  // "?" appended for questions.
  static std::vector<std::string> realize(std::span<const std::size_t> glosses);
  // BOS + realize() ids + EOS.
  static std::vector<std::size_t> text_ids(std::span<const std::size_t> glosses);
  static std::size_t partner(std::size_t gloss_id);
};

struct Sentence {
  std::size_t id = 0;
  std::vector<std::size_t> glosses;
  SentenceKind kind = SentenceKind::kAffirmative;
  std::string split;  // "train", "dev" or "test"
};

// Chooses the corpus sentences and their split. Deterministic in the config.
std::vector<Sentence> plan_sentences(const CorpusConfig& config);

// One gloss's blob: a square of side `size` and colour `color` whose centre
// moves from `center - velocity * (F-1)/2` to `center + velocity * (F-1)/2`
// over the gesture's F frames.
struct GestureSpec {
  std::size_t gloss_id = 0;
  double size = 0.0;
  std::array<double, 3> color{};
  double center_row = 0.0, center_col = 0.0;
  double velocity_row = 0.0, velocity_col = 0.0;  // pixels per frame
  std::size_t frames = 0;
};

GestureSpec gesture_spec(std::size_t gloss_id, const CorpusConfig& config);

// A gesture as performed in one repetition (speed scaled by the jitter).
struct GestureInstance {
  GestureSpec spec;
  double speed_scale = 1.0;
};

// [T, 3, S, S] with T = sum of frames; pixel = area of the square covering
// it times the colour, rounded to float32. Throws ContractError if a blob
// leaves the frame.
Tensor render_frames(std::span<const GestureInstance> gestures, std::size_t image_size);

// Exhaustive block-matching flow between two [C, H, W] frames (compared on
// the channel mean). For every block x block tile the displacement (dx, dy)
// in [-radius, radius]^2 minimising the sum of absolute differences with
// `next` is broadcast to its pixels; pixels outside `next` read as 0. Ties
// go to the smallest |dx|+|dy|, then smallest dy, then smallest dx.
// Returns [2, H, W] with channel 0 = dx (columns), channel 1 = dy (rows).
Tensor optical_flow(const Tensor& prev, const Tensor& next, std::size_t block, std::size_t radius);

// [T, 3, H, W] -> [T, 2, H, W]: frame t holds flow(t-1, t); frame 0
// repeats flow(0, 1).
Tensor video_flow(const Tensor& frames, std::size_t block, std::size_t radius);

struct SampleRecord {
  InputKind kind = InputKind::kRgb;
  Tensor frames;  // [T, C, H, W], float32-representable values
  std::vector<std::size_t> gloss_ids;
  std::vector<std::size_t> text_ids;
  SentenceKind sentence_kind = SentenceKind::kAffirmative;
};

// Binary sample file, little-endian:
//   "SLTS" | u16 version | u8 kind | u32 T, C, H, W | f32 payload
//   | u16 gloss count, u16 ids | u16 text count, u16 ids
// Throws ContractError if a value is not exactly representable as float32.
void save_sample(const SampleRecord& record, const std::string& path);
std::vector<std::uint8_t> encode_sample(const SampleRecord& record);
// Throws FormatError (with the byte offset) on any malformed input.
SampleRecord load_sample(const std::string& path);
SampleRecord decode_sample(std::span<const std::uint8_t> bytes);

struct ManifestEntry {
  std::string path;  // relative to the data directory
  std::string split;
  std::size_t sentence_id = 0;
  InputKind kind = InputKind::kRgb;
  bool operator==(const ManifestEntry&) const = default;
};

std::string serialize_manifest(std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> parse_manifest(const std::string& text);
void write_manifest(std::span<const ManifestEntry> entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

struct CorpusSummary {
  std::size_t sentences = 0;
  std::size_t samples = 0;  // per input kind
  std::size_t train = 0, dev = 0, test = 0;
  std::size_t affirmative = 0, negative = 0, interrogative = 0;
  std::string hash;  // 16 hex digits over every sample file
  std::uint64_t seed = 0;
};

// Writes samples/, manifest.jsonl, gloss_vocab.json, text_vocab.json and
// corpus.json under `out_dir` (created if its parent exists). Every sample
// is written twice, as RGB frames and as flow. Refuses to overwrite an
// existing manifest unless `overwrite`.
CorpusSummary generate_dataset(const CorpusConfig& config, const std::string& out_dir, bool overwrite);

// Reads the summary written by generate_dataset.
CorpusSummary read_corpus_summary(const std::string& data_dir);
std::string corpus_summary_json(const CorpusSummary& summary, const CorpusConfig& config);

std::string hex64(std::uint64_t value);

}  // namespace slt
