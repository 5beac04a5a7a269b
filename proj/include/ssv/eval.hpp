#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssv/dataset.hpp"
#include "ssv/network.hpp"
#include "ssv/objective.hpp"

namespace ssv {

// Indices refer to the dataset the trials were drawn from.
struct Trial {
  std::size_t a = 0;
  std::size_t b = 0;
  PairLabel label = PairLabel::Impostor;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialSet {
  std::vector<Trial> trials;  // genuine trials first, then impostor
  std::uint64_t seed = 0;

  friend bool operator==(const TrialSet&, const TrialSet&) = default;
};

// Number of distinct unordered same-speaker and cross-speaker pairs.
std::size_t genuine_pair_count(const Dataset& data);
std::size_t impostor_pair_count(const Dataset& data);

// Uniform sampling without replacement from all distinct pairs of each class.
// Throws CapacityError when a class has fewer pairs than requested.
TrialSet make_trials(const Dataset& data, std::size_t n_genuine, std::size_t n_impostor,
                     std::uint64_t seed);

// Embedding distance per trial; each utterance is embedded once.
std::vector<double> score_trials(const Model& model, const Dataset& data, const TrialSet& trials);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// FAR(t): impostor distances <= t. FRR(t): genuine distances > t. Evaluated at
// midpoints between consecutive distinct scores plus one point below the
// minimum and one above the maximum; the first crossing of FAR - FRR is
// linearly interpolated. Throws DomainError on an empty class.
EerResult eer(const std::vector<double>& genuine, const std::vector<double>& impostor);

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// FAR and FRR at every candidate threshold of eer(), ascending.
std::vector<DetPoint> det_points(const std::vector<double>& genuine, const std::vector<double>& impostor);

struct EvalReport {
  std::vector<double> distances;  // aligned with the trial set
  std::vector<double> genuine;
  std::vector<double> impostor;
  double eer = 0.0;
  double threshold = 0.0;
  std::vector<DetPoint> det;
};

EvalReport evaluate(const Model& model, const Dataset& data, const TrialSet& trials);

// trial_id,label,distance
void write_scores_csv(const TrialSet& trials, const std::vector<double>& distances,
                      const std::filesystem::path& path);
// metric,value: eer, threshold, n_genuine, n_impostor, then `extra` in order.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, double>>& extra = {});
// threshold,far,frr
void write_det_csv(const std::vector<DetPoint>& det, const std::filesystem::path& path);

}  // namespace ssv
