#include "detcal/recal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "detcal/parallel.hpp"

namespace detcal::recal {

void RecalTransform::validate() const {
  if (kind != TransformKind::Identity && !(param > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "transform parameter must be > 0");
  }
}

std::string RecalTransform::label() const {
  char buf[48];
  switch (kind) {
    case TransformKind::Identity:
      return "identity";
    case TransformKind::TemperatureScale:
      std::snprintf(buf, sizeof(buf), "temperature=%g", param);
      return buf;
    case TransformKind::BackgroundWeight:
      std::snprintf(buf, sizeof(buf), "bg_weight=%g", param);
      return buf;
  }
  return "unknown";
}

ProbVector apply(const RecalTransform& transform, const ProbVector& p) {
  transform.validate();
  switch (transform.kind) {
    case TransformKind::Identity:
      return p;
    case TransformKind::TemperatureScale: {
      std::vector<double> scaled(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        scaled[i] = std::log(std::max(p[i], 1e-12)) / transform.param;
      }
      return ProbVector::softmax(scaled);
    }
    case TransformKind::BackgroundWeight: {
      std::vector<double> scaled(p.values().begin(), p.values().end());
      scaled.back() *= transform.param;
      return ProbVector::normalized(std::move(scaled));
    }
  }
  return p;
}

SweepResult sweep(const EvaluationSet& set, const std::vector<RecalTransform>& grid,
                  const metrics::BinningConfig& cfg, bool skip_missing) {
  if (grid.empty()) {
    throw Error(ErrorKind::InvalidConfig, "sweep grid is empty");
  }
  if (set.empty()) {
    throw Error(ErrorKind::EmptyEvaluationSet, "no records to sweep over");
  }
  cfg.validate();
  for (const auto& t : grid) t.validate();

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid[a].param < grid[b].param;
  });

  SweepResult result;
  result.rows.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const RecalTransform& transform = grid[order[i]];
    EvaluationSet transformed;
    transformed.num_classes = set.num_classes;
    transformed.records.reserve(set.size());
    for (const auto& rec : set.records) {
      EvaluationRecord out = rec;
      if (!(skip_missing && rec.kind == RecordKind::MissingGroundTruth)) {
        out.probs = apply(transform, rec.probs);
      }
      transformed.records.push_back(std::move(out));
    }
    SweepRow& row = result.rows[i];
    row.param_label = transform.label();
    row.param_value = transform.param;
    row.nll = metrics::nll(transformed);
    row.brier = metrics::brier(transformed);
    row.tce = metrics::tce(transformed, cfg);
    row.mce = metrics::mce(transformed, cfg);
    try {
      row.dmce = metrics::detection_variants(transformed, cfg).dmce;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyEvaluationSet) throw;
      row.dmce = std::numeric_limits<double>::quiet_NaN();
    }
  });

  auto argmin = [&](auto field) {
    const auto value = [&](std::size_t i) {
      const double v = field(result.rows[i]);
      return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    int best = 0;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
      if (value(i) < value(static_cast<std::size_t>(best))) best = static_cast<int>(i);
    }
    return best;
  };
  result.argmin_nll = argmin([](const SweepRow& r) { return r.nll; });
  result.argmin_brier = argmin([](const SweepRow& r) { return r.brier; });
  result.argmin_tce = argmin([](const SweepRow& r) { return r.tce; });
  result.argmin_mce = argmin([](const SweepRow& r) { return r.mce; });
  result.argmin_dmce = argmin([](const SweepRow& r) { return r.dmce; });
  return result;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}
}  // namespace

std::string sweep_to_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "param,nll,brier,tce,mce,dmce\n";
  for (const auto& row : result.rows) {
    out << fmt(row.param_value) << ',' << fmt(row.nll) << ',' << fmt(row.brier) << ','
        << fmt(row.tce) << ',' << fmt(row.mce) << ',' << fmt(row.dmce) << '\n';
  }
  return out.str();
}

std::string sweep_argmin_json(const SweepResult& result) {
  nlohmann::json doc;
  doc["note"] =
      "post-hoc probability reweighting sweep; transforms predicted vectors only, no training";
  auto row_json = [&](int idx) {
    const SweepRow& r = result.rows[static_cast<std::size_t>(idx)];
    return nlohmann::json{{"param", r.param_value}, {"label", r.param_label},
                          {"nll", r.nll},           {"brier", r.brier},
                          {"tce", r.tce},           {"mce", r.mce},
                          {"dmce", std::isnan(r.dmce) ? nlohmann::json() : nlohmann::json(r.dmce)}};
  };
  doc["argmin"] = {{"nll", row_json(result.argmin_nll)},
                   {"brier", row_json(result.argmin_brier)},
                   {"tce", row_json(result.argmin_tce)},
                   {"mce", row_json(result.argmin_mce)},
                   {"dmce", row_json(result.argmin_dmce)}};
  return doc.dump(2) + "\n";
}

}  // namespace detcal::recal
