#include "planeloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json_util.hpp"
#include "planeloc/error.hpp"
#include "planeloc/parallel.hpp"

namespace planeloc {

using detail::json;

void CorrectnessCriterion::validate() const {
  if (!(max_translation > 0.0) || !(max_orientation > 0.0)) {
    throw InvalidArgument("correctness thresholds must be positive");
  }
}

PoseError pose_error(const Pose& estimate, const Pose& ground_truth) {
  PoseError e;
  e.translation = (estimate.t - ground_truth.t).norm();
  e.orientation = rad2deg(rotation_angle_between(ground_truth.rotation(), estimate.rotation()));
  return e;
}

bool is_correct(const PoseError& e, const CorrectnessCriterion& crit) {
  return e.translation <= crit.max_translation && e.orientation <= crit.max_orientation;
}

bool is_correct(const Pose& estimate, const Pose& ground_truth, const CorrectnessCriterion& crit) {
  return is_correct(pose_error(estimate, ground_truth), crit);
}

Pose world_pose(const PoseHypothesis& h, const TopologicalMap& map) {
  return compose(map.model(h.model_id).reference_pose, h.belief.mean);
}

void score_record(EvalRecord& record, const CorrectnessCriterion& crit) {
  record.error.reset();
  record.first_correct_rank.reset();
  for (std::size_t i = 0; i < record.hypotheses.size(); ++i) {
    const PoseError e = pose_error(record.hypotheses[i].pose, record.ground_truth);
    if (i == 0) record.error = e;
    if (is_correct(e, crit)) {
      record.error = e;
      record.first_correct_rank = static_cast<int>(i + 1);
      return;
    }
  }
}

Statistic statistic(const std::vector<double>& values) {
  Statistic s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (const double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

CumulativeHistogram cumulative_histogram(std::vector<double> values) {
  CumulativeHistogram h;
  if (values.empty()) return h;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // one row per distinct value, fraction of samples at or below it
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    h.values.push_back(values[i]);
    h.fractions.push_back(static_cast<double>(i + 1) / n);
  }
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * n));
  h.percentile99 = values[std::max<std::size_t>(rank, 1) - 1];
  return h;
}

EvalSummary summarize(const std::vector<EvalRecord>& records) {
  EvalSummary s;
  s.total = records.size();
  std::vector<double> trans, orient, ranks;
  for (const auto& r : records) {
    if (r.hypotheses.empty()) {
      ++s.no_hypothesis;
    } else if (!r.first_correct_rank) {
      ++s.no_correct_hypothesis;
    } else {
      ++s.correct_hypothesis;
      trans.push_back(r.error->translation * 1000.0);
      orient.push_back(r.error->orientation);
      ranks.push_back(static_cast<double>(*r.first_correct_rank));
    }
  }
  if (s.total > 0) {
    const double n = static_cast<double>(s.total);
    s.pct_no_hypothesis = 100.0 * static_cast<double>(s.no_hypothesis) / n;
    s.pct_no_correct_hypothesis = 100.0 * static_cast<double>(s.no_correct_hypothesis) / n;
    s.pct_correct_hypothesis = 100.0 * static_cast<double>(s.correct_hypothesis) / n;
  }
  s.translation_mm = statistic(trans);
  s.orientation_deg = statistic(orient);
  s.rank = statistic(ranks);
  if (!ranks.empty()) {
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    s.median_rank = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  s.translation_hist = cumulative_histogram(trans);
  s.orientation_hist = cumulative_histogram(orient);
  s.rank_hist = cumulative_histogram(ranks);
  return s;
}

EvalRecord evaluate_frame(const QueryFrame& frame, const TopologicalMap& map, const EvalConfig& config) {
  EvalRecord rec;
  rec.frame_id = frame.frame_id;
  rec.ground_truth = frame.ground_truth;
  const auto scene = detect_features(frame.depth, frame.intrinsics, config.features.noise, config.features.segmentation);
  RegistrationParams params = config.registration;
  params.threads = 1;  // parallelism lives at the frame level
  for (const auto& h : localize(scene, map, config.prior, config.camera_mount, params)) {
    rec.hypotheses.push_back({h.model_id, world_pose(h, map), h.consensus});
  }
  score_record(rec, config.criterion);
  return rec;
}

EvalResult evaluate(const std::vector<QueryFrame>& frames, const TopologicalMap& map, const EvalConfig& config) {
  config.criterion.validate();
  map.validate();
  EvalResult result;
  result.records.resize(frames.size());
  parallel_for(frames.size(), config.threads,
               [&](std::size_t i) { result.records[i] = evaluate_frame(frames[i], map, config); });
  result.summary = summarize(result.records);
  return result;
}

EvalResult evaluate(const std::vector<FrameRecord>& records, const TopologicalMap& map, const EvalConfig& config) {
  std::vector<QueryFrame> frames;
  frames.reserve(records.size());
  for (const auto& rec : records) {
    if (!rec.ground_truth) throw ParseError("manifest record " + rec.frame_id + " has no ground_truth");
    QueryFrame f;
    f.frame_id = rec.frame_id;
    f.depth = read_depth_pgm(rec.depth);
    f.intrinsics = read_intrinsics(rec.intrinsics);
    f.ground_truth = *rec.ground_truth;
    frames.push_back(std::move(f));
  }
  return evaluate(frames, map, config);
}

// --- reports -------------------------------------------------------------------

namespace {

json statistic_json(const Statistic& s) { return {{"mean", s.mean}, {"std", s.std}, {"max", s.max}}; }

json histogram_json(const CumulativeHistogram& h) {
  return {{"values", h.values}, {"fractions", h.fractions}, {"percentile99", h.percentile99}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string report_json(const EvalResult& result, const EvalConfig& config) {
  const EvalSummary& s = result.summary;
  json frames = json::array();
  for (const auto& r : result.records) {
    frames.push_back({{"frame_id", r.frame_id},
                      {"n_hypotheses", r.hypotheses.size()},
                      {"first_correct_rank", r.first_correct_rank ? json(*r.first_correct_rank) : json(nullptr)},
                      {"translation_error_mm", optional_number(r.error ? std::optional(r.error->translation * 1000.0)
                                                                        : std::nullopt)},
                      {"orientation_error_deg",
                       optional_number(r.error ? std::optional(r.error->orientation) : std::nullopt)}});
  }
  const json doc = {
      {"criterion", {{"max_translation_m", config.criterion.max_translation},
                     {"max_orientation_deg", config.criterion.max_orientation}}},
      {"rank_ties", "hypotheses ordered by consensus desc, covariance trace asc, model id asc"},
      {"counts", {{"total", s.total},
                  {"no_hypothesis", s.no_hypothesis},
                  {"no_correct_hypothesis", s.no_correct_hypothesis},
                  {"correct_hypothesis", s.correct_hypothesis}}},
      {"percentages", {{"no_hypothesis", s.pct_no_hypothesis},
                       {"no_correct_hypothesis", s.pct_no_correct_hypothesis},
                       {"correct_hypothesis", s.pct_correct_hypothesis}}},
      {"translation_error_mm", statistic_json(s.translation_mm)},
      {"orientation_error_deg", statistic_json(s.orientation_deg)},
      {"first_correct_rank", statistic_json(s.rank)},
      {"median_first_correct_rank", s.median_rank},
      {"histograms", {{"translation_error_mm", histogram_json(s.translation_hist)},
                      {"orientation_error_deg", histogram_json(s.orientation_hist)},
                      {"first_correct_rank", histogram_json(s.rank_hist)}}},
      {"frames", frames}};
  return doc.dump(1) + "\n";
}

std::string report_csv(const EvalResult& result) {
  std::ostringstream os;
  os << "frame_id,n_hypotheses,first_correct_rank,translation_error_mm,orientation_error_deg\n";
  for (const auto& r : result.records) {
    os << r.frame_id << "," << r.hypotheses.size() << ",";
    if (r.first_correct_rank) os << *r.first_correct_rank;
    os << ",";
    if (r.error) os << fixed(r.error->translation * 1000.0, 3) << "," << fixed(r.error->orientation, 4);
    else os << ",";
    os << "\n";
  }
  return os.str();
}

std::string histogram_csv(const CumulativeHistogram& h) {
  std::ostringstream os;
  os << "value,cumulative_fraction\n";
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    os << fixed(h.values[i], 6) << "," << fixed(h.fractions[i], 6) << "\n";
  }
  return os.str();
}

void write_report(const std::filesystem::path& dir, const EvalResult& result, const EvalConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", report_json(result, config));
  write_text(dir / "report.csv", report_csv(result));
  write_text(dir / "hist_translation.csv", histogram_csv(result.summary.translation_hist));
  write_text(dir / "hist_orientation.csv", histogram_csv(result.summary.orientation_hist));
  write_text(dir / "hist_rank.csv", histogram_csv(result.summary.rank_hist));
}

}  // namespace planeloc
