#pragma once

#include <cstdint>
#include <utility>

#include "detcal/ingest.hpp"

namespace detcal::synth {

enum class Miscalibration { None, Temperature, BackgroundBias };

/// Generator for detection scenarios whose calibration is known by
/// construction. Each slot draws a probability vector q from a Dirichlet and
/// a class z from q itself; object draws materialize a ground truth labeled z
/// with a matching detection, background draws materialize an off-object
/// detection. Labels sampled from the very vectors the detector reports make
/// the resulting evaluation set exactly calibrated; the miscalibration knobs
/// then distort the reported vectors after the labels are fixed, so the
/// direction of the distortion is known.
struct SyntheticConfig {
  std::uint64_t seed = 0;
  int num_images = 100;
  int num_classes = 2;
  int objects_min = 1;  // slots per image
  int objects_max = 5;
  Miscalibration miscalibration = Miscalibration::None;
  double temperature = 1.0;       // sharpen (<1) or flatten (>1) reported vectors
  double background_bias = 1.0;   // multiplies the reported background entry
  double box_jitter = 0.02;       // detector_noise sigma
  double miss_rate = 0.0;
  double spurious_rate = 0.0;

  void validate() const;
};

std::pair<ingest::Dataset, ingest::PredictionDump> generate(const SyntheticConfig& cfg);

/// Scenario whose top-label calibration is nearly perfect while the marginal
/// calibration is badly off: constant vectors put their second-place mass on
/// one fixed class although the non-argmax outcomes are uniform.
std::pair<ingest::Dataset, ingest::PredictionDump> make_tce_blind_instance(std::uint64_t seed,
                                                                           int num_records);

/// Scenario where every matched detection is accompanied by two flattened
/// duplicates sharing its argmax class. Raw evaluation with many-to-one
/// matching absorbs the miscalibrated duplicates; post-processing suppresses
/// them, so the two perspectives split by a wide calibration margin.
std::pair<ingest::Dataset, ingest::PredictionDump> make_duplicate_rich_instance(
    std::uint64_t seed, int num_images, int num_classes);

/// Deterministic self-contained samplers (std distributions are
/// implementation defined, these are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int lo, int hi);        // inclusive
  double normal();
  double gamma(double alpha);
  std::vector<double> dirichlet(double alpha, int n);
  int categorical(const std::vector<double>& p);

 private:
  std::uint64_t next_word();
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detcal::synth
