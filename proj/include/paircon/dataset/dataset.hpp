// Dataset ingest, preprocessing, labeling, and balanced splitting.
//
// Datasets carry a role: A is the primary set that is split and evaluated on,
// B is an auxiliary pool whose images only ever appear inside training
// batches.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace paircon::data {

// Codes are alphabetical over the seven expression names and stable.
enum class EmotionLabel : int {
  anger = 0,
  disgust = 1,
  fear = 2,
  happiness = 3,
  neutral = 4,
  sadness = 5,
  surprise = 6,
};

inline constexpr int kNumClasses = 7;
inline constexpr int kImageSide = 48;
inline constexpr int kImagePixels = kImageSide * kImageSide;

const char* label_name(EmotionLabel label);
std::optional<EmotionLabel> label_from_name(std::string_view name);

struct LabeledImage {
  std::vector<float> pixels;  // kImagePixels grayscale values in [0,1]
  EmotionLabel label = EmotionLabel::anger;
  std::string id;             // unique within a dataset
};

enum class DatasetRole { A, B };

struct LabeledDataset {
  std::vector<LabeledImage> images;
  DatasetRole role = DatasetRole::A;
  std::string name;
};

struct SplitSpec {
  double train_fraction = 0.5;  // in (0,1)
  uint64_t seed = 0;
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

// CSV parse failure carrying the 1-based data row number.
class ParseError : public std::runtime_error {
 public:
  ParseError(long row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

// Loads the emotion,pixels,Usage CSV layout: emotion code 0-6 in file order
// anger, disgust, fear, happiness, sadness, surprise, neutral (re-coded to
// the alphabetical EmotionLabel order), then 2304 space-separated intensities
// in 0..255, then a usage tag (ignored). Returns a role-B dataset; ids are
// data row numbers.
LabeledDataset load_fer_csv(const std::string& path);

// Loads root/<label-name>/*.{png,jpg,jpeg,pgm}, preprocessing every file to
// 48x48 grayscale. Unknown label directories and undecodable files are
// errors; an empty root yields an empty dataset and a warning on stderr.
// Returns a role-A dataset; ids are "<label>/<file-stem>".
LabeledDataset load_image_directory(const std::string& root);

// Center-crops to square (rows for portrait, columns for landscape), converts
// RGB to grayscale with luminance weights (0.299, 0.587, 0.114), and resizes
// to 48x48 bilinearly. Input is HWC in [0,1], C in {1,3}.
std::vector<float> preprocess_to_square_grayscale(const float* values, int height, int width,
                                                  int channels);

// Balanced split: every class contributes floor(train_fraction * minority
// count) training images sampled without replacement; all remaining images
// are shuffled per class and dealt alternately to validation/test, the
// starting side alternating with class position so the two halves stay equal
// within one image per class. Deterministic in (dataset, spec).
DatasetSplit split_balanced(const LabeledDataset& dataset, const SplitSpec& spec);

// Writes root/<label-name>/<id>.pgm for every image (directories created;
// '/', '\', '#', and spaces in ids become '_'). The result reloads with
// load_image_directory, which re-derives ids as "<label>/<file-stem>".
void save_image_directory(const LabeledDataset& dataset, const std::string& root);

// Writes the emotion,pixels,Usage CSV layout read by load_fer_csv (header
// line included, all rows tagged Training, values rounded to 0..255).
void save_fer_csv(const LabeledDataset& dataset, const std::string& path);

}  // namespace paircon::data
