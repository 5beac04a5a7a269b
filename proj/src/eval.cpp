#include "ssv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "ssv/csv.hpp"
#include "ssv/errors.hpp"

namespace ssv {

std::size_t genuine_pair_count(const Dataset& data) {
  std::size_t n = 0;
  for (const auto& s : data.speakers()) n += s.size() * (s.size() - 1) / 2;
  return n;
}

std::size_t impostor_pair_count(const Dataset& data) {
  return data.size() * (data.size() - 1) / 2 - genuine_pair_count(data);
}

namespace {

using Pair = std::pair<std::size_t, std::size_t>;

// Chooses k of `all` uniformly without replacement, in sampled order.
std::vector<Pair> sample_enumerated(std::vector<Pair> all, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  return all;
}

std::vector<Pair> sample_genuine(const Dataset& data, std::size_t k, std::mt19937_64& rng) {
  std::vector<Pair> all;
  for (const auto& s : data.speakers())
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j < s.size(); ++j) all.push_back({s[i], s[j]});
  return sample_enumerated(std::move(all), k, rng);
}

std::vector<Pair> sample_impostor(const Dataset& data, std::size_t k, std::size_t available,
                                  std::mt19937_64& rng) {
  if (2 * k >= available) {
    std::vector<Pair> all;
    all.reserve(available);
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t j = i + 1; j < data.size(); ++j)
        if (data.speaker_of(i) != data.speaker_of(j)) all.push_back({i, j});
    return sample_enumerated(std::move(all), k, rng);
  }
  // Sparse request: rejection sampling over all unordered pairs stays uniform
  // over the impostor pairs and avoids materialising them.
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::set<Pair> chosen;
  std::vector<Pair> out;
  while (out.size() < k) {
    std::size_t i = pick(rng), j = pick(rng);
    if (i == j || data.speaker_of(i) == data.speaker_of(j)) continue;
    if (i > j) std::swap(i, j);
    if (chosen.insert({i, j}).second) out.push_back({i, j});
  }
  return out;
}

}  // namespace

TrialSet make_trials(const Dataset& data, std::size_t n_genuine, std::size_t n_impostor,
                     std::uint64_t seed) {
  const std::size_t gen = genuine_pair_count(data), imp = impostor_pair_count(data);
  if (n_genuine > gen)
    throw CapacityError("requested " + std::to_string(n_genuine) + " genuine trials, only " +
                        std::to_string(gen) + " distinct same-speaker pairs exist");
  if (n_impostor > imp)
    throw CapacityError("requested " + std::to_string(n_impostor) + " impostor trials, only " +
                        std::to_string(imp) + " distinct cross-speaker pairs exist");
  std::mt19937_64 rng(seed);
  TrialSet set;
  set.seed = seed;
  for (const Pair& p : sample_genuine(data, n_genuine, rng)) set.trials.push_back({p.first, p.second, PairLabel::Genuine});
  for (const Pair& p : sample_impostor(data, n_impostor, imp, rng))
    set.trials.push_back({p.first, p.second, PairLabel::Impostor});
  return set;
}

std::vector<double> score_trials(const Model& model, const Dataset& data, const TrialSet& trials) {
  std::map<std::size_t, Embedding> cache;
  auto embed = [&](std::size_t i) -> const Embedding& {
    if (i >= data.size()) throw ContractError("trial refers to utterance " + std::to_string(i) + " of " +
                                              std::to_string(data.size()));
    auto it = cache.find(i);
    if (it == cache.end()) it = cache.emplace(i, forward(model, data[i].features)).first;
    return it->second;
  };
  std::vector<double> out;
  out.reserve(trials.trials.size());
  for (const Trial& t : trials.trials) {
    const double d = distance(embed(t.a), embed(t.b));
    out.push_back(d);
  }
  return out;
}

namespace {

struct Counter {
  std::vector<double> genuine, impostor;

  Counter(std::vector<double> g, std::vector<double> i) : genuine(std::move(g)), impostor(std::move(i)) {
    if (genuine.empty() || impostor.empty()) throw DomainError("EER needs genuine and impostor scores");
    for (const auto* v : {&genuine, &impostor})
      for (double s : *v)
        if (!std::isfinite(s)) throw DomainError("non-finite score");
    std::sort(genuine.begin(), genuine.end());
    std::sort(impostor.begin(), impostor.end());
  }

  double far(double t) const {
    const auto n = std::upper_bound(impostor.begin(), impostor.end(), t) - impostor.begin();
    return static_cast<double>(n) / static_cast<double>(impostor.size());
  }
  double frr(double t) const {
    const auto n = genuine.end() - std::upper_bound(genuine.begin(), genuine.end(), t);
    return static_cast<double>(n) / static_cast<double>(genuine.size());
  }

  std::vector<double> candidates() const {
    std::vector<double> all = genuine;
    all.insert(all.end(), impostor.begin(), impostor.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    std::vector<double> c{all.front() - 1.0};
    for (std::size_t i = 0; i + 1 < all.size(); ++i) c.push_back(0.5 * (all[i] + all[i + 1]));
    c.push_back(all.back() + 1.0);
    return c;
  }
};

}  // namespace

EerResult eer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  const Counter c(genuine, impostor);
  const std::vector<double> cand = c.candidates();
  double prev_t = cand[0], prev_far = c.far(prev_t), prev_d = prev_far - c.frr(prev_t);
  for (std::size_t k = 1; k < cand.size(); ++k) {
    const double t = cand[k], fa = c.far(t), d = fa - c.frr(t);
    if (d == 0.0) return {fa, t};
    if (d > 0.0) {
      const double alpha = -prev_d / (d - prev_d);
      return {prev_far + alpha * (fa - prev_far), prev_t + alpha * (t - prev_t)};
    }
    prev_t = t;
    prev_far = fa;
    prev_d = d;
  }
  // Unreachable: the last candidate has FAR 1 and FRR 0.
  throw DomainError("EER sweep found no crossing");
}

std::vector<DetPoint> det_points(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  const Counter c(genuine, impostor);
  std::vector<DetPoint> out;
  for (double t : c.candidates()) out.push_back({t, c.far(t), c.frr(t)});
  return out;
}

EvalReport evaluate(const Model& model, const Dataset& data, const TrialSet& trials) {
  EvalReport r;
  r.distances = score_trials(model, data, trials);
  for (std::size_t i = 0; i < r.distances.size(); ++i)
    (trials.trials[i].label == PairLabel::Genuine ? r.genuine : r.impostor).push_back(r.distances[i]);
  const EerResult e = eer(r.genuine, r.impostor);
  r.eer = e.eer;
  r.threshold = e.threshold;
  r.det = det_points(r.genuine, r.impostor);
  return r;
}

void write_scores_csv(const TrialSet& trials, const std::vector<double>& distances,
                      const std::filesystem::path& path) {
  if (distances.size() != trials.trials.size()) throw ShapeError("one distance per trial is required");
  CsvWriter csv(path, {"trial_id", "label", "distance"});
  for (std::size_t i = 0; i < distances.size(); ++i)
    csv.row({i, static_cast<int>(trials.trials[i].label), distances[i]});
  csv.close();
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, double>>& extra) {
  CsvWriter csv(path, {"metric", "value"});
  csv.row({"eer", report.eer});
  csv.row({"threshold", report.threshold});
  csv.row({"n_genuine", report.genuine.size()});
  csv.row({"n_impostor", report.impostor.size()});
  for (const auto& [name, value] : extra) csv.row({name, value});
  csv.close();
}

void write_det_csv(const std::vector<DetPoint>& det, const std::filesystem::path& path) {
  CsvWriter csv(path, {"threshold", "far", "frr"});
  for (const DetPoint& p : det) csv.row({p.threshold, p.far, p.frr});
  csv.close();
}

}  // namespace ssv
