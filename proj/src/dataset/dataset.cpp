#include "paircon/dataset/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

#include "paircon/core/interp.hpp"
#include "paircon/core/rng.hpp"
#include "paircon/dataset/image_io.hpp"

namespace fs = std::filesystem;

namespace paircon::data {
namespace {

constexpr std::array<const char*, kNumClasses> kLabelNames = {
    "anger", "disgust", "fear", "happiness", "neutral", "sadness", "surprise"};

// CSV emotion codes use the FER-2013 order; indices here are file codes.
constexpr std::array<EmotionLabel, kNumClasses> kCsvCodeToLabel = {
    EmotionLabel::anger,   EmotionLabel::disgust,  EmotionLabel::fear,
    EmotionLabel::happiness, EmotionLabel::sadness, EmotionLabel::surprise,
    EmotionLabel::neutral};

int parse_int_token(std::string_view tok, long row, const char* what) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError(row, std::string("non-integer ") + what + " token '" + std::string(tok) + "'");
  return value;
}

}  // namespace

const char* label_name(EmotionLabel label) {
  return kLabelNames[static_cast<size_t>(label)];
}

std::optional<EmotionLabel> label_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (name == kLabelNames[static_cast<size_t>(i)]) return static_cast<EmotionLabel>(i);
  return std::nullopt;
}

LabeledDataset load_fer_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("CSV '" + path + "' is empty");

  LabeledDataset out;
  out.role = DatasetRole::B;
  out.name = fs::path(path).stem().string();

  long row = 0;
  constexpr float kInv = 1.0f / 255.0f;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError(row, "expected three comma-separated fields");

    const int code = parse_int_token(std::string_view(line).substr(0, c1), row, "emotion");
    if (code < 0 || code >= kNumClasses)
      throw ParseError(row, "emotion code " + std::to_string(code) + " outside 0-6");

    LabeledImage img;
    img.label = kCsvCodeToLabel[static_cast<size_t>(code)];
    img.id = std::to_string(row);
    img.pixels.reserve(kImagePixels);

    const std::string_view pix(line.data() + c1 + 1, c2 - c1 - 1);
    size_t pos = 0;
    while (pos < pix.size()) {
      while (pos < pix.size() && pix[pos] == ' ') ++pos;
      if (pos >= pix.size()) break;
      size_t end = pix.find(' ', pos);
      if (end == std::string_view::npos) end = pix.size();
      const int v = parse_int_token(pix.substr(pos, end - pos), row, "pixel");
      if (v < 0 || v > 255)
        throw ParseError(row, "pixel value " + std::to_string(v) + " outside 0-255");
      img.pixels.push_back(static_cast<float>(v) * kInv);
      pos = end;
    }
    if (img.pixels.size() != kImagePixels)
      throw ParseError(row, "expected " + std::to_string(kImagePixels) + " pixel tokens, got " +
                                std::to_string(img.pixels.size()));
    out.images.push_back(std::move(img));
  }
  return out;
}

std::vector<float> preprocess_to_square_grayscale(const float* values, int height, int width,
                                                  int channels) {
  if (height < 1 || width < 1 || (channels != 1 && channels != 3))
    throw std::invalid_argument("preprocess: bad input shape");

  std::vector<float> gray(static_cast<size_t>(height) * width);
  if (channels == 1) {
    std::copy(values, values + gray.size(), gray.begin());
  } else {
    for (size_t i = 0; i < gray.size(); ++i) {
      const float* px = values + i * 3;
      gray[i] = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
    }
  }

  // Center crop to square: portrait loses rows (top and bottom), landscape
  // loses columns.
  const int side = std::min(height, width);
  const int y0 = (height - side) / 2;
  const int x0 = (width - side) / 2;

  std::vector<float> out(kImagePixels);
  core::resize_bilinear_rect(gray.data(), height, width, x0, y0, side, side, out.data(),
                             kImageSide, kImageSide);
  for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

LabeledDataset load_image_directory(const std::string& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: '" + root + "'");

  LabeledDataset out;
  out.role = DatasetRole::A;
  out.name = fs::path(root).filename().string();

  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());

  for (const auto& dir : subdirs) {
    const std::string dirname = dir.filename().string();
    const auto label = label_from_name(dirname);
    if (!label) throw std::runtime_error("unknown label directory '" + dirname + "'");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      if (!has_image_extension(entry.path().filename().string())) continue;
      files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
      const DecodedImage dec = read_image(file.string());
      LabeledImage img;
      img.pixels = preprocess_to_square_grayscale(dec.values.data(), dec.height, dec.width,
                                                  dec.channels);
      img.label = *label;
      img.id = dirname + "/" + file.stem().string();
      out.images.push_back(std::move(img));
    }
  }

  // Duplicate ids would silently break split bookkeeping downstream.
  std::vector<std::string> ids;
  ids.reserve(out.images.size());
  for (const auto& img : out.images) ids.push_back(img.id);
  std::sort(ids.begin(), ids.end());
  const auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) throw std::runtime_error("duplicate image id '" + *dup + "'");

  if (out.images.empty())
    std::cerr << "warning: no images found under '" << root << "'\n";
  return out;
}

DatasetSplit split_balanced(const LabeledDataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1)");

  // Indices per class, in dataset order; only classes present participate.
  std::map<int, std::vector<int64_t>> by_class;
  for (int64_t i = 0; i < static_cast<int64_t>(dataset.images.size()); ++i)
    by_class[static_cast<int>(dataset.images[static_cast<size_t>(i)].label)].push_back(i);
  if (by_class.empty()) throw std::invalid_argument("split: empty dataset");

  int64_t minority = std::numeric_limits<int64_t>::max();
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < 2)
      throw std::invalid_argument(std::string("split: class '") +
                                  label_name(static_cast<EmotionLabel>(label)) +
                                  "' has fewer than 2 images");
    minority = std::min(minority, static_cast<int64_t>(idx.size()));
  }

  const auto per_class_train =
      static_cast<int64_t>(std::floor(spec.train_fraction * static_cast<double>(minority)));
  if (per_class_train == 0) throw std::invalid_argument("training split too small");

  core::Rng rng(spec.seed);
  DatasetSplit split;
  split.train.role = split.validation.role = split.test.role = dataset.role;
  split.train.name = dataset.name + "/train";
  split.validation.name = dataset.name + "/validation";
  split.test.name = dataset.name + "/test";

  int class_pos = 0;
  for (const auto& [label, idx] : by_class) {
    const int64_t n = static_cast<int64_t>(idx.size());
    const auto picked = rng.sample_without_replacement(n, per_class_train);
    std::vector<bool> taken(static_cast<size_t>(n), false);
    for (int64_t p : picked) {
      taken[static_cast<size_t>(p)] = true;
      split.train.images.push_back(dataset.images[static_cast<size_t>(idx[static_cast<size_t>(p)])]);
    }

    std::vector<int64_t> rest;
    for (int64_t j = 0; j < n; ++j)
      if (!taken[static_cast<size_t>(j)]) rest.push_back(idx[static_cast<size_t>(j)]);
    rng.shuffle(rest);

    // Alternate val/test, starting side alternating per class so odd
    // remainders cancel instead of piling onto one half.
    const bool val_first = (class_pos % 2 == 0);
    for (size_t j = 0; j < rest.size(); ++j) {
      const bool to_val = ((j % 2 == 0) == val_first);
      auto& part = to_val ? split.validation : split.test;
      part.images.push_back(dataset.images[static_cast<size_t>(rest[j])]);
    }
    ++class_pos;
  }
  return split;
}

namespace {

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (c == '/' || c == '\\' || c == '#' || c == ' ') c = '_';
  return out;
}

}  // namespace

void save_image_directory(const LabeledDataset& dataset, const std::string& root) {
  for (const auto& img : dataset.images) {
    const fs::path dir = fs::path(root) / label_name(img.label);
    fs::create_directories(dir);
    write_pgm((dir / (sanitize_id(img.id) + ".pgm")).string(), img.pixels.data(), kImageSide,
              kImageSide);
  }
}

void save_fer_csv(const LabeledDataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV '" + path + "'");
  out << "emotion,pixels,Usage\n";
  for (const auto& img : dataset.images) {
    const auto code = std::find(kCsvCodeToLabel.begin(), kCsvCodeToLabel.end(), img.label) -
                      kCsvCodeToLabel.begin();
    out << code << ',';
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      if (i) out << ' ';
      out << static_cast<int>(std::lround(std::clamp(img.pixels[i], 0.0f, 1.0f) * 255.0f));
    }
    out << ",Training\n";
  }
  if (!out) throw std::runtime_error("failed writing CSV '" + path + "'");
}

}  // namespace paircon::data
