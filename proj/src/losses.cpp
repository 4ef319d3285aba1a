#include <limits>
#include <string>

#include "bcareid/errors.hpp"
#include "bcareid/losses.hpp"

namespace bcareid {

double LossOutput::active_fraction() const {
  std::size_t valid = 0, active = 0;
  for (const auto& t : selection) {
    valid += t.valid;
    active += t.valid && t.active;
  }
  return valid == 0 ? 0.0 : static_cast<double>(active) / static_cast<double>(valid);
}

Matrix pairwise_sqdist(const Matrix& e) {
  const Eigen::Index n = e.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (e.row(i) - e.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

namespace {

// d/de of d2(a,p) - d2(a,n), scaled, accumulated into grad.
void add_triplet_gradient(const Matrix& e, const TripletChoice& t, double scale, Matrix& grad) {
  const auto a = static_cast<Eigen::Index>(t.anchor);
  const auto p = static_cast<Eigen::Index>(t.positive);
  const auto n = static_cast<Eigen::Index>(t.negative);
  const auto dap = (2.0 * scale) * (e.row(a) - e.row(p));
  const auto dan = (2.0 * scale) * (e.row(a) - e.row(n));
  grad.row(a) += dap - dan;
  grad.row(p) -= dap;
  grad.row(n) += dan;
}

void check_labels(const Matrix& e, std::size_t labels, const char* what) {
  if (static_cast<std::size_t>(e.rows()) != labels)
    throw ConfigError(std::string(what) + ": label count differs from embedding rows");
}

}  // namespace

LossOutput reid_hard_loss(const Matrix& e, std::span<const int> ids, double margin) {
  check_labels(e, ids.size(), "reid_hard_loss");
  const std::size_t n = ids.size();
  const Matrix d = pairwise_sqdist(e);
  LossOutput out;
  out.gradient = Matrix::Zero(e.rows(), e.cols());
  for (std::size_t a = 0; a < n; ++a) {
    TripletChoice t;
    t.anchor = a;
    double hardest_pos = -1.0;
    double hardest_neg = std::numeric_limits<double>::infinity();
    bool has_pos = false, has_neg = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double dist = d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
      if (ids[j] == ids[a]) {
        if (!has_pos || dist > hardest_pos) {
          hardest_pos = dist;
          t.positive = j;
          has_pos = true;
        }
      } else if (!has_neg || dist < hardest_neg) {
        hardest_neg = dist;
        t.negative = j;
        has_neg = true;
      }
    }
    if (!has_pos || !has_neg)
      throw BatchCompositionError("anchor " + std::to_string(a) + " has no " +
                                  (has_pos ? "negative" : "positive") + " in the batch");
    t.argument = margin + hardest_pos - hardest_neg;
    t.active = t.argument > 0.0;
    if (t.active) {
      out.value += t.argument;
      add_triplet_gradient(e, t, 1.0, out.gradient);
    }
    out.selection.push_back(t);
  }
  return out;
}

LossOutput bias_easy_loss(const Matrix& e, std::span<const int> bias, double margin, bool hinge) {
  check_labels(e, bias.size(), "bias_easy_loss");
  const std::size_t n = bias.size();
  const Matrix d = pairwise_sqdist(e);
  LossOutput out;
  out.gradient = Matrix::Zero(e.rows(), e.cols());
  for (std::size_t a = 0; a < n; ++a) {
    TripletChoice t;
    t.anchor = a;
    double easiest_pos = std::numeric_limits<double>::infinity();
    double easiest_neg = -1.0;
    bool has_pos = false, has_neg = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double dist = d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
      if (bias[j] == bias[a]) {
        if (!has_pos || dist < easiest_pos) {
          easiest_pos = dist;
          t.positive = j;
          has_pos = true;
        }
      } else if (!has_neg || dist > easiest_neg) {
        easiest_neg = dist;
        t.negative = j;
        has_neg = true;
      }
    }
    if (!has_pos || !has_neg) {
      t.valid = false;
      ++out.skipped_anchors;
      out.selection.push_back(t);
      continue;
    }
    t.argument = margin + easiest_pos - easiest_neg;
    t.active = !hinge || t.argument > 0.0;
    if (t.active) {
      out.value += t.argument;
      add_triplet_gradient(e, t, 1.0, out.gradient);
    }
    out.selection.push_back(t);
  }
  if (n > 0 && out.skipped_anchors == n)
    throw BatchCompositionError("no anchor has both a same-bias and a different-bias sample");
  return out;
}

CombinedLoss combined_loss(const Matrix& e, std::span<const int> ids, std::span<const int> bias,
                           BranchMode mode, const CombinedWeights& w) {
  if (!(w.lambda_dr >= 0.0) || !(w.lambda_db >= 0.0))
    throw ConfigError("loss weights must be >= 0 (the mode carries the sign)");
  CombinedLoss out;
  out.reid = reid_hard_loss(e, ids, w.margin_dr);
  out.total.value = w.lambda_dr * out.reid.value;
  out.total.gradient = w.lambda_dr * out.reid.gradient;
  out.total.selection = out.reid.selection;
  if (w.lambda_db == 0.0) {
    if (!bias.empty()) {
      try {
        out.bias = bias_easy_loss(e, bias, w.margin_db, w.bias_hinge);
      } catch (const BatchCompositionError&) {
        // Diagnostics only; the term carries no weight.
      }
    }
    return out;
  }
  out.bias = bias_easy_loss(e, bias, w.margin_db, w.bias_hinge);
  const double sign = mode == BranchMode::kReduce ? -1.0 : 1.0;
  out.total.value += sign * w.lambda_db * out.bias.value;
  out.total.gradient += (sign * w.lambda_db) * out.bias.gradient;
  out.total.skipped_anchors = out.bias.skipped_anchors;
  return out;
}

}  // namespace bcareid
