#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "planeloc/dataset.hpp"
#include "planeloc/map.hpp"
#include "planeloc/registration.hpp"
#include "planeloc/synthetic.hpp"

namespace planeloc {

struct CorrectnessCriterion {
  double max_translation = 0.2;  ///< m
  double max_orientation = 2.0;  ///< degrees

  void validate() const;
};

struct PoseError {
  double translation = 0.0;  ///< m
  double orientation = 0.0;  ///< degrees, geodesic angle of R_gt^T R_est
};

PoseError pose_error(const Pose& estimate, const Pose& ground_truth);
bool is_correct(const PoseError& e, const CorrectnessCriterion& crit);
bool is_correct(const Pose& estimate, const Pose& ground_truth, const CorrectnessCriterion& crit);

/// World pose of a hypothesis: model reference pose composed with the
/// relative camera pose.
Pose world_pose(const PoseHypothesis& h, const TopologicalMap& map);

struct RankedPose {
  int model_id = 0;
  Pose pose;  ///< world frame
  double consensus = 0.0;
};

struct EvalRecord {
  std::string frame_id;
  Pose ground_truth;
  std::vector<RankedPose> hypotheses;
  /// Error of the first correct hypothesis, else of the top-ranked one;
  /// empty when there are no hypotheses.
  std::optional<PoseError> error;
  std::optional<int> first_correct_rank;  ///< 1-based
};

/// Fills error and first_correct_rank from the hypotheses.
void score_record(EvalRecord& record, const CorrectnessCriterion& crit);

struct Statistic {
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
  double max = 0.0;
};

/// Empirical normalized cumulative histogram: fraction of samples <= value.
struct CumulativeHistogram {
  std::vector<double> values;
  std::vector<double> fractions;
  double percentile99 = 0.0;  ///< nearest-rank
};

struct EvalSummary {
  std::size_t total = 0;
  std::size_t no_hypothesis = 0;
  std::size_t no_correct_hypothesis = 0;
  std::size_t correct_hypothesis = 0;
  double pct_no_hypothesis = 0.0;
  double pct_no_correct_hypothesis = 0.0;
  double pct_correct_hypothesis = 0.0;
  // over frames with a correct hypothesis
  Statistic translation_mm;
  Statistic orientation_deg;
  Statistic rank;
  double median_rank = 0.0;
  CumulativeHistogram translation_hist;  ///< mm
  CumulativeHistogram orientation_hist;  ///< degrees
  CumulativeHistogram rank_hist;
};

Statistic statistic(const std::vector<double>& values);
CumulativeHistogram cumulative_histogram(std::vector<double> values);
EvalSummary summarize(const std::vector<EvalRecord>& records);

struct EvalConfig {
  MatchPrior prior;
  Pose camera_mount = default_camera_mount();
  CorrectnessCriterion criterion;
  FeatureConfig features;
  RegistrationParams registration;
  /// Frame-level workers; 0 = PLANELOC_THREADS or hardware concurrency.
  std::size_t threads = 0;
};

struct EvalResult {
  std::vector<EvalRecord> records;  ///< input order
  EvalSummary summary;
};

EvalRecord evaluate_frame(const QueryFrame& frame, const TopologicalMap& map, const EvalConfig& config);
EvalResult evaluate(const std::vector<QueryFrame>& frames, const TopologicalMap& map, const EvalConfig& config);
/// Manifest variant; every record needs ground truth. Throws IoError naming a missing file.
EvalResult evaluate(const std::vector<FrameRecord>& records, const TopologicalMap& map, const EvalConfig& config);

std::string report_json(const EvalResult& result, const EvalConfig& config);
/// frame_id,n_hypotheses,first_correct_rank,translation_error_mm,orientation_error_deg
std::string report_csv(const EvalResult& result);
/// value,cumulative_fraction
std::string histogram_csv(const CumulativeHistogram& h);
/// report.json, report.csv, hist_translation.csv, hist_orientation.csv, hist_rank.csv
void write_report(const std::filesystem::path& dir, const EvalResult& result, const EvalConfig& config);

}  // namespace planeloc
