#include "detcal/synth.hpp"

#include <algorithm>
#include <cmath>

namespace detcal::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& w : state_) w = splitmix64(s);
}

std::uint64_t Rng::next_word() {
  // xoshiro256++
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_word() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_word() % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::gamma(double alpha) {
  // Marsaglia-Tsang squeeze; the alpha < 1 case boosts through alpha + 1.
  if (alpha < 1.0) {
    const double u = uniform();
    return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> Rng::dirichlet(double alpha, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (auto& x : v) {
    x = gamma(alpha);
    sum += x;
  }
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), 1.0 / n);
    return v;
  }
  for (auto& x : v) x /= sum;
  return v;
}

int Rng::categorical(const std::vector<double>& p) {
  const double u = uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

void SyntheticConfig::validate() const {
  if (num_classes < 2) throw Error(ErrorKind::InvalidConfig, "need K >= 2 object classes");
  if (num_images < 1) throw Error(ErrorKind::InvalidConfig, "need at least one image");
  if (objects_min < 0 || objects_max < objects_min) {
    throw Error(ErrorKind::InvalidConfig, "invalid objects_per_image range");
  }
  if (miss_rate < 0.0 || miss_rate > 1.0 || spurious_rate < 0.0 || spurious_rate > 1.0) {
    throw Error(ErrorKind::InvalidConfig, "rates must lie in [0,1]");
  }
  if (box_jitter < 0.0 || box_jitter > 1.0) {
    throw Error(ErrorKind::InvalidConfig, "box_jitter must lie in [0,1]");
  }
  if (miscalibration == Miscalibration::Temperature && !(temperature > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "temperature must be > 0");
  }
  if (miscalibration == Miscalibration::BackgroundBias && !(background_bias > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "background_bias must be > 0");
  }
}

namespace {

constexpr double kGtSideMin = 0.06;
constexpr double kGtSideMax = 0.25;
constexpr double kGtOverlapCap = 0.3;    // pairwise IoU cap between ground truths
constexpr double kBgOverlapCap = 0.2;    // background detections stay clear of objects

double max_iou_against(const BBox& box, const std::vector<BBox>& boxes) {
  double best = 0.0;
  for (const auto& b : boxes) best = std::max(best, iou(box, b));
  return best;
}

BBox random_box(Rng& rng, double side_min, double side_max) {
  const double w = rng.uniform(side_min, side_max);
  const double h = rng.uniform(side_min, side_max);
  const double x1 = rng.uniform(0.0, 1.0 - w);
  const double y1 = rng.uniform(0.0, 1.0 - h);
  return BBox{x1, y1, x1 + w, y1 + h};
}

BBox draw_gt_box(Rng& rng, const std::vector<BBox>& existing) {
  BBox box;
  for (int attempt = 0; attempt < 100; ++attempt) {
    box = random_box(rng, kGtSideMin, kGtSideMax);
    if (max_iou_against(box, existing) <= kGtOverlapCap) return box;
  }
  return box;  // dense scenes degrade gracefully
}

BBox draw_background_box(Rng& rng, const std::vector<BBox>& gts) {
  double side_min = 0.04;
  double side_max = 0.12;
  BBox box;
  for (int attempt = 0; attempt < 300; ++attempt) {
    box = random_box(rng, side_min, side_max);
    if (max_iou_against(box, gts) < kBgOverlapCap) return box;
    if (attempt % 100 == 99) {
      side_min *= 0.5;
      side_max *= 0.5;
    }
  }
  return box;
}

BBox jitter_box(Rng& rng, const BBox& box, double sigma) {
  if (sigma <= 0.0) return box;
  BBox out{std::clamp(box.x1 + rng.uniform(-sigma, sigma), 0.0, 1.0),
           std::clamp(box.y1 + rng.uniform(-sigma, sigma), 0.0, 1.0),
           std::clamp(box.x2 + rng.uniform(-sigma, sigma), 0.0, 1.0),
           std::clamp(box.y2 + rng.uniform(-sigma, sigma), 0.0, 1.0)};
  out.x2 = std::max(out.x2, out.x1);
  out.y2 = std::max(out.y2, out.y1);
  return out;
}

ProbVector report_vector(const SyntheticConfig& cfg, std::vector<double> q) {
  switch (cfg.miscalibration) {
    case Miscalibration::None: break;
    case Miscalibration::Temperature:
      for (auto& v : q) v = std::pow(v, 1.0 / cfg.temperature);
      break;
    case Miscalibration::BackgroundBias:
      q.back() *= cfg.background_bias;
      break;
  }
  return ProbVector::normalized(std::move(q));
}

ingest::Dataset dataset_shell(int num_images, int num_classes) {
  ingest::Dataset ds;
  ds.class_names.reserve(static_cast<std::size_t>(num_classes));
  for (int k = 0; k < num_classes; ++k) {
    char name[24];
    std::snprintf(name, sizeof(name), "class_%02d", k);
    ds.class_names.emplace_back(name);
  }
  for (int i = 0; i < num_images; ++i) {
    ds.images.push_back({i, 640, 480});
    ds.targets[i];
  }
  return ds;
}

}  // namespace

std::pair<ingest::Dataset, ingest::PredictionDump> generate(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ingest::Dataset ds = dataset_shell(cfg.num_images, cfg.num_classes);
  ingest::PredictionDump dump;
  dump.num_classes = cfg.num_classes;
  dump.source_tag = "raw";

  const int width = cfg.num_classes + 1;
  for (int img = 0; img < cfg.num_images; ++img) {
    const int slots = rng.uniform_int(cfg.objects_min, cfg.objects_max);
    struct Slot {
      std::vector<double> q;
      int z;
    };
    std::vector<Slot> draws;
    draws.reserve(static_cast<std::size_t>(slots));
    for (int s = 0; s < slots; ++s) {
      std::vector<double> q = rng.dirichlet(1.0, width);
      const int z = rng.categorical(q);
      draws.push_back({std::move(q), z});
    }

    std::vector<BBox> gt_boxes;
    auto& gts = ds.targets[img];
    std::vector<Detection> dets;
    for (const auto& slot : draws) {
      if (slot.z >= cfg.num_classes) continue;
      const BBox box = draw_gt_box(rng, gt_boxes);
      gt_boxes.push_back(box);
      gts.push_back({img, slot.z, box});
      const bool missed = rng.uniform() < cfg.miss_rate;
      if (!missed) {
        dets.push_back({img, report_vector(cfg, slot.q), jitter_box(rng, box, cfg.box_jitter)});
      }
    }
    for (const auto& slot : draws) {
      if (slot.z < cfg.num_classes) continue;
      dets.push_back({img, report_vector(cfg, slot.q), draw_background_box(rng, gt_boxes)});
    }
    if (cfg.spurious_rate > 0.0 && rng.uniform() < cfg.spurious_rate) {
      // Rejection keeps spurious vectors on the background-conditioned slice.
      std::vector<double> q;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        q = rng.dirichlet(1.0, width);
        if (rng.categorical(q) == cfg.num_classes) break;
      }
      dets.push_back({img, report_vector(cfg, std::move(q)), draw_background_box(rng, gt_boxes)});
    }
    if (!dets.empty()) dump.detections[img] = std::move(dets);
  }
  return {std::move(ds), std::move(dump)};
}

std::pair<ingest::Dataset, ingest::PredictionDump> make_tce_blind_instance(std::uint64_t seed,
                                                                           int num_records) {
  if (num_records < 1000) {
    throw Error(ErrorKind::InvalidConfig, "tce-blind instance needs at least 1000 records");
  }
  constexpr int kClasses = 3;
  constexpr int kSlotsPerImage = 20;
  const int num_images = (num_records + kSlotsPerImage - 1) / kSlotsPerImage;

  Rng rng(seed);
  ingest::Dataset ds = dataset_shell(num_images, kClasses);
  ingest::PredictionDump dump;
  dump.num_classes = kClasses;
  dump.source_tag = "raw";

  // Top mass is calibrated (argmax hits at exactly its rate); the rest of the
  // mass sits on class 1 although non-argmax outcomes are uniform over the
  // remaining three classes.
  const std::vector<double> reported{0.55, 0.35, 0.05, 0.05};
  int emitted = 0;
  for (int img = 0; img < num_images && emitted < num_records; ++img) {
    std::vector<BBox> gt_boxes;
    auto& gts = ds.targets[img];
    std::vector<Detection> dets;
    for (int s = 0; s < kSlotsPerImage && emitted < num_records; ++s, ++emitted) {
      const double u = rng.uniform();
      const int y = u < 0.55 ? 0 : u < 0.70 ? 1 : u < 0.85 ? 2 : kClasses;
      const ProbVector probs = ProbVector::validated(reported, false);
      if (y < kClasses) {
        const BBox box = draw_gt_box(rng, gt_boxes);
        gt_boxes.push_back(box);
        gts.push_back({img, y, box});
        dets.push_back({img, probs, box});
      } else {
        dets.push_back({img, probs, draw_background_box(rng, gt_boxes)});
      }
    }
    if (!dets.empty()) dump.detections[img] = std::move(dets);
  }
  return {std::move(ds), std::move(dump)};
}

std::pair<ingest::Dataset, ingest::PredictionDump> make_duplicate_rich_instance(
    std::uint64_t seed, int num_images, int num_classes) {
  if (num_classes < 2 || num_images < 1) {
    throw Error(ErrorKind::InvalidConfig, "duplicate-rich instance needs K >= 2 and >= 1 image");
  }
  constexpr double kJitter = 0.003;  // keeps every copy above the 0.5 match threshold
  Rng rng(seed);
  ingest::Dataset ds = dataset_shell(num_images, num_classes);
  ingest::PredictionDump dump;
  dump.num_classes = num_classes;
  dump.source_tag = "raw";

  const int width = num_classes + 1;
  for (int img = 0; img < num_images; ++img) {
    const int slots = rng.uniform_int(8, 12);
    std::vector<BBox> gt_boxes;
    auto& gts = ds.targets[img];
    std::vector<Detection> dets;
    for (int s = 0; s < slots; ++s) {
      std::vector<double> q = rng.dirichlet(1.0, width);
      const int z = rng.categorical(q);
      if (z < num_classes) {
        const BBox box = draw_gt_box(rng, gt_boxes);
        gt_boxes.push_back(box);
        gts.push_back({img, z, box});
        const ProbVector primary = ProbVector::normalized(std::move(q));
        dets.push_back({img, primary, jitter_box(rng, box, kJitter)});
        // Flattened duplicates share the primary's argmax but hedge its mass;
        // per-class NMS drops them, many-to-one matching absorbs them. Only
        // object-argmax vectors get copies: background-argmax detections
        // bypass NMS, so their duplicates could never be suppressed.
        if (argmax_class(primary) < num_classes) {
          std::vector<double> flattened(primary.values().begin(), primary.values().end());
          for (auto& v : flattened) v = std::sqrt(v);
          const ProbVector flat = ProbVector::normalized(std::move(flattened));
          dets.push_back({img, flat, jitter_box(rng, box, kJitter)});
          dets.push_back({img, flat, jitter_box(rng, box, kJitter)});
        }
      } else {
        dets.push_back({img, ProbVector::normalized(std::move(q)),
                        draw_background_box(rng, gt_boxes)});
      }
    }
    if (!dets.empty()) dump.detections[img] = std::move(dets);
  }
  return {std::move(ds), std::move(dump)};
}

}  // namespace detcal::synth
